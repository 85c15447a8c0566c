#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "svlab/render/dataset.hpp"
#include "svlab/render/raster.hpp"

namespace svlab {

/// Decoded binary PGM (P5) or PPM (P6), intensities scaled to [0, 1],
/// channel-major like Frame.
struct NetpbmImage {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t channels = 1;
  std::vector<double> pixels;
};

NetpbmImage decode_netpbm(const std::vector<std::uint8_t>& bytes);
NetpbmImage read_netpbm(const std::filesystem::path& path);

/// P5 for one channel, P6 for three. maxval > 255 writes 16-bit big-endian samples.
std::vector<std::uint8_t> encode_netpbm(const Frame& frame, unsigned maxval = 255);
void write_netpbm(const std::filesystem::path& path, const Frame& frame, unsigned maxval = 255);

/// Reads <trajectory>_<index>.pgm|ppm files, resamples them to `geometry`
/// and splits trajectories 80/10/10 with `seed`. Trajectories are numbered
/// in sorted name order; indices must be contiguous within each trajectory.
Dataset import_frames_dir(const std::filesystem::path& dir, const FrameGeometry& geometry, int shift,
                          std::uint64_t seed = 0);

}  // namespace svlab
