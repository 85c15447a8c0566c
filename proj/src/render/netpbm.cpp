#include "svlab/render/netpbm.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iterator>
#include <map>
#include <string>

#include "svlab/error.hpp"

namespace svlab {

namespace {

class HeaderReader {
 public:
  explicit HeaderReader(const std::vector<std::uint8_t>& b) : b_(b) {}

  std::string token() {
    skip_space_and_comments();
    std::string out;
    while (pos_ < b_.size() && !std::isspace(b_[pos_]) && b_[pos_] != '#') out.push_back(static_cast<char>(b_[pos_++]));
    if (out.empty()) throw ParseError("truncated header");
    return out;
  }

  std::size_t number(const char* what) {
    const std::string t = token();
    if (!std::all_of(t.begin(), t.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); })) {
      throw ParseError(std::string("bad ") + what + " '" + t + "'");
    }
    return std::stoul(t);
  }

  // Exactly one whitespace byte separates the header from the raster.
  std::size_t raster_start() {
    if (pos_ >= b_.size() || !std::isspace(b_[pos_])) throw ParseError("missing whitespace before raster");
    return pos_ + 1;
  }

 private:
  void skip_space_and_comments() {
    while (pos_ < b_.size()) {
      if (std::isspace(b_[pos_])) {
        ++pos_;
      } else if (b_[pos_] == '#') {
        while (pos_ < b_.size() && b_[pos_] != '\n') ++pos_;
      } else {
        break;
      }
    }
  }

  const std::vector<std::uint8_t>& b_;
  std::size_t pos_ = 0;
};

std::vector<double> convert_channels(const std::vector<double>& px, std::size_t from, std::size_t to, std::size_t plane) {
  if (from == to) return px;
  std::vector<double> out(to * plane);
  if (from == 1) {
    for (std::size_t c = 0; c < to; ++c) std::copy(px.begin(), px.end(), out.begin() + static_cast<std::ptrdiff_t>(c * plane));
  } else {
    for (std::size_t k = 0; k < plane; ++k) out[k] = 0.299 * px[k] + 0.587 * px[plane + k] + 0.114 * px[2 * plane + k];
  }
  return out;
}

}  // namespace

NetpbmImage decode_netpbm(const std::vector<std::uint8_t>& bytes) {
  HeaderReader r(bytes);
  const std::string magic = r.token();
  NetpbmImage img;
  if (magic == "P5") {
    img.channels = 1;
  } else if (magic == "P6") {
    img.channels = 3;
  } else {
    throw ParseError("unsupported magic '" + magic + "' (expected P5 or P6)");
  }
  img.width = r.number("width");
  img.height = r.number("height");
  const std::size_t maxval = r.number("maxval");
  if (img.width == 0 || img.height == 0) throw ParseError("zero image size");
  if (maxval == 0 || maxval > 65535) throw ParseError("maxval out of range: " + std::to_string(maxval));
  const std::size_t start = r.raster_start();
  const std::size_t sample_bytes = maxval > 255 ? 2 : 1;
  const std::size_t plane = img.width * img.height;
  const std::size_t n = plane * img.channels;
  if (bytes.size() < start + n * sample_bytes) throw ParseError("raster truncated");

  img.pixels.resize(n);
  for (std::size_t k = 0; k < plane; ++k) {
    for (std::size_t c = 0; c < img.channels; ++c) {
      const std::size_t at = start + (k * img.channels + c) * sample_bytes;
      const unsigned v = sample_bytes == 2 ? (static_cast<unsigned>(bytes[at]) << 8) | bytes[at + 1] : bytes[at];
      if (v > maxval) throw ParseError("sample exceeds maxval");
      img.pixels[c * plane + k] = static_cast<double>(v) / static_cast<double>(maxval);
    }
  }
  return img;
}

NetpbmImage read_netpbm(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  try {
    return decode_netpbm(bytes);
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

std::vector<std::uint8_t> encode_netpbm(const Frame& frame, unsigned maxval) {
  const auto& g = frame.geometry;
  if (g.channels != 1 && g.channels != 3) throw ContractError("netpbm export needs 1 or 3 channels");
  if (maxval == 0 || maxval > 65535) throw ContractError("maxval must lie in [1, 65535]");
  const std::string header = std::string(g.channels == 1 ? "P5" : "P6") + "\n" + std::to_string(g.width) + " " +
                             std::to_string(g.height) + "\n" + std::to_string(maxval) + "\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  const std::size_t plane = g.height * g.width;
  for (std::size_t k = 0; k < plane; ++k) {
    for (std::size_t c = 0; c < g.channels; ++c) {
      const double v = std::clamp(frame.pixels[c * plane + k], 0.0, 1.0);
      const auto q = static_cast<unsigned>(std::lround(v * maxval));
      if (maxval > 255) out.push_back(static_cast<std::uint8_t>(q >> 8));
      out.push_back(static_cast<std::uint8_t>(q & 0xFF));
    }
  }
  return out;
}

void write_netpbm(const std::filesystem::path& path, const Frame& frame, unsigned maxval) {
  const auto bytes = encode_netpbm(frame, maxval);
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open " + path.string() + " for writing");
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw IoError("write failed for " + path.string());
}

Dataset import_frames_dir(const std::filesystem::path& dir, const FrameGeometry& geometry, int shift,
                          std::uint64_t seed) {
  geometry.validate();
  if (shift < 1) throw ContractError("shift must be >= 1");
  if (!std::filesystem::is_directory(dir)) throw IoError("not a directory: " + dir.string());

  std::map<std::string, std::map<std::size_t, std::filesystem::path>> groups;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    const auto ext = entry.path().extension().string();
    if (ext != ".pgm" && ext != ".ppm") continue;
    const std::string stem = entry.path().stem().string();
    const auto cut = stem.rfind('_');
    const std::string index = cut == std::string::npos ? "" : stem.substr(cut + 1);
    if (cut == 0 || index.empty() || !std::all_of(index.begin(), index.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); })) {
      throw ParseError(entry.path().string() + ": name is not <trajectory>_<index>");
    }
    groups[stem.substr(0, cut)][std::stoul(index)] = entry.path();
  }
  if (groups.empty()) throw IoError("no .pgm or .ppm frames in " + dir.string());

  std::size_t n_frames = 0;
  for (const auto& [name, frames] : groups) {
    std::size_t expected = frames.begin()->first;
    for (const auto& [idx, path] : frames) {
      if (idx != expected) {
        throw ContractError("trajectory '" + name + "' is missing frame index " + std::to_string(expected) +
                            " (next present: " + std::to_string(idx) + ")");
      }
      ++expected;
    }
    if (n_frames == 0) n_frames = frames.size();
    if (frames.size() != n_frames) {
      throw ContractError("trajectory '" + name + "' has " + std::to_string(frames.size()) + " frames, expected " +
                          std::to_string(n_frames));
    }
  }
  if (n_frames < static_cast<std::size_t>(shift) + 2) {
    throw ContractError("imported trajectories have " + std::to_string(n_frames) + " frames; shift " +
                        std::to_string(shift) + " needs " + std::to_string(shift + 2));
  }

  // Decode everything in sorted trajectory order.
  std::vector<std::vector<double>> frames_by_traj;
  std::size_t src_h = 0, src_w = 0;
  const std::size_t plane = geometry.height * geometry.width;
  for (const auto& [name, frames] : groups) {
    std::vector<double> pixels;
    for (const auto& [idx, path] : frames) {
      const NetpbmImage img = read_netpbm(path);
      if (src_h == 0) {
        src_h = img.height;
        src_w = img.width;
      }
      if (img.height != src_h || img.width != src_w) {
        throw ContractError(path.string() + ": size " + std::to_string(img.width) + "x" + std::to_string(img.height) +
                            " differs from " + std::to_string(src_w) + "x" + std::to_string(src_h));
      }
      std::vector<double> px = img.pixels;
      if (img.height != geometry.height || img.width != geometry.width) {
        px = resample_bilinear(px, img.channels, img.height, img.width, geometry.height, geometry.width);
      }
      px = convert_channels(px, img.channels, geometry.channels, plane);
      pixels.insert(pixels.end(), px.begin(), px.end());
    }
    frames_by_traj.push_back(std::move(pixels));
  }

  Dataset ds;
  ds.system = "external";
  ds.mode = DatasetMode::frames;
  ds.geometry = geometry;
  ds.shift = shift;
  ds.seed = seed;
  const auto assignment = assign_splits(frames_by_traj.size(), seed);
  const SplitName names[] = {SplitName::train, SplitName::validation, SplitName::test};
  for (std::size_t s = 0; s < 3; ++s) {
    DatasetSplit& split = ds.split(names[s]);
    split.n_frames = n_frames;
    split.feature_dim = geometry.numel();
    split.trajectory_ids = assignment[s];
    for (std::size_t id : assignment[s]) {
      split.features.insert(split.features.end(), frames_by_traj[id].begin(), frames_by_traj[id].end());
    }
  }
  return ds;
}

}  // namespace svlab
