#include "svlab/numcore/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "svlab/error.hpp"

namespace svlab {

namespace {

constexpr char kMagic[4] = {'S', 'V', 'L', 'B'};

template <typename T>
void put_le(std::vector<std::uint8_t>& out, T value) {
  for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<std::uint8_t>(value >> (8 * i)));
}

class Reader {
 public:
  explicit Reader(const std::vector<std::uint8_t>& bytes) : bytes_(bytes) {}

  template <typename T>
  T get_le() {
    need(sizeof(T));
    T value = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) value |= static_cast<T>(static_cast<T>(bytes_[pos_ + i]) << (8 * i));
    pos_ += sizeof(T);
    return value;
  }

  std::string get_string(std::size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }

  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > bytes_.size()) throw ParseError("tensor container truncated at byte " + std::to_string(pos_));
  }

  const std::vector<std::uint8_t>& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> encode_tensors(const std::vector<NamedTensor>& tensors) {
  std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
  put_le<std::uint32_t>(out, kCheckpointVersion);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& [name, t] : tensors) {
    if (name.size() > 0xFFFF) throw ContractError("tensor name too long: " + name.substr(0, 32) + "...");
    if (t.rank() > 0xFF) throw ContractError("tensor rank too large for " + name);
    put_le<std::uint16_t>(out, static_cast<std::uint16_t>(name.size()));
    out.insert(out.end(), name.begin(), name.end());
    out.push_back(static_cast<std::uint8_t>(t.rank()));
    for (auto d : t.shape()) put_le<std::uint64_t>(out, d);
    for (double v : t.data()) put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v));
  }
  return out;
}

std::vector<NamedTensor> decode_tensors(const std::vector<std::uint8_t>& bytes) {
  Reader r(bytes);
  if (r.get_string(4) != std::string(kMagic, 4)) throw ParseError("bad magic: not an SVLB tensor container");
  const auto version = r.get_le<std::uint32_t>();
  if (version != kCheckpointVersion) throw ParseError("unsupported SVLB version " + std::to_string(version));
  const auto count = r.get_le<std::uint32_t>();
  std::vector<NamedTensor> out;
  out.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto len = r.get_le<std::uint16_t>();
    std::string name = r.get_string(len);
    const auto rank = r.get_le<std::uint8_t>();
    Shape shape(rank);
    for (auto& d : shape) d = static_cast<std::size_t>(r.get_le<std::uint64_t>());
    std::vector<double> data(shape_numel(shape));
    for (auto& v : data) v = std::bit_cast<double>(r.get_le<std::uint64_t>());
    try {
      out.push_back({std::move(name), Tensor(std::move(shape), std::move(data))});
    } catch (const DimensionError& e) {
      throw ParseError(std::string("invalid tensor in container: ") + e.what());
    }
  }
  if (!r.done()) throw ParseError("trailing bytes after SVLB container");
  return out;
}

void save_tensors(const std::filesystem::path& path, const std::vector<NamedTensor>& tensors) {
  const auto bytes = encode_tensors(tensors);
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open " + path.string() + " for writing");
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw IoError("write failed for " + path.string());
}

std::vector<NamedTensor> load_tensors(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  try {
    return decode_tensors(bytes);
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

const Tensor& find_tensor(const std::vector<NamedTensor>& tensors, const std::string& name) {
  for (const auto& t : tensors) {
    if (t.name == name) return t.tensor;
  }
  throw ParseError("tensor '" + name + "' not found in container");
}

}  // namespace svlab
