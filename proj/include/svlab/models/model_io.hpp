#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "svlab/models/inner.hpp"
#include "svlab/models/outer.hpp"
#include "svlab/numcore/checkpoint.hpp"

namespace svlab {

/// Checkpoints are a tensor file (e.g. inner.bin) plus a JSON sidecar with
/// the same stem (inner.json) describing the architecture.
std::filesystem::path sidecar_path(const std::filesystem::path& checkpoint);

void save_inner(const std::filesystem::path& path, const InnerModel& model);
InnerModel load_inner(const std::filesystem::path& path);

void save_outer(const std::filesystem::path& path, const OuterAE& model);
OuterAE load_outer(const std::filesystem::path& path);

/// Copies tensors into same-named parameters. Every parameter must be present
/// with a matching shape; extra tensors are an error too.
void assign_parameters(const std::vector<std::pair<std::string, Var>>& params, const std::vector<NamedTensor>& tensors);
std::vector<NamedTensor> snapshot_parameters(const std::vector<std::pair<std::string, Var>>& params);

}  // namespace svlab
