#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "svlab/numcore/tensor.hpp"

namespace svlab {

/// Binary tensor container used for checkpoints and dataset shards.
///
/// Layout (all integers little-endian):
///   "SVLB" | version u32 | count u32 |
///   count x { name_len u16 | name UTF-8 | rank u8 | dims u64[rank] | f64[numel] }
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct NamedTensor {
  std::string name;
  Tensor tensor;

  bool operator==(const NamedTensor&) const = default;
};

std::vector<std::uint8_t> encode_tensors(const std::vector<NamedTensor>& tensors);
std::vector<NamedTensor> decode_tensors(const std::vector<std::uint8_t>& bytes);

void save_tensors(const std::filesystem::path& path, const std::vector<NamedTensor>& tensors);
std::vector<NamedTensor> load_tensors(const std::filesystem::path& path);

/// Looks up a tensor by name; throws ParseError if absent.
const Tensor& find_tensor(const std::vector<NamedTensor>& tensors, const std::string& name);

}  // namespace svlab
