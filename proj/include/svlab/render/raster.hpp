#pragma once

#include <array>
#include <cstddef>
#include <vector>

#include "svlab/dynsys/system.hpp"

namespace svlab {

struct FrameGeometry {
  std::size_t height = 32;
  std::size_t width = 32;
  std::size_t channels = 1;

  std::size_t numel() const { return height * width * channels; }
  /// Channels must be 1 or 3 and each side in [4, 64].
  void validate() const;
  bool operator==(const FrameGeometry&) const = default;
};

/// Pixels in [0, 1], channel-major then row-major: index (c * height + i) * width + j.
struct Frame {
  FrameGeometry geometry;
  std::vector<double> pixels;
  /// Set when part of the drawing fell outside the frame and was clamped.
  bool clamped = false;

  double at(std::size_t c, std::size_t i, std::size_t j) const {
    return pixels[(c * geometry.height + i) * geometry.width + j];
  }
};

/// World-to-pixel mapping used by rasterize. The pivot sits at the frame
/// centre, y points up, and sizes are in pixels.
struct RenderLayout {
  double center_x = 0.0;
  double center_y = 0.0;
  double scale = 1.0;  // pixels per metre
  double bob_radius = 1.0;
  double stroke_width = 1.0;

  std::array<double, 2> to_pixel(const Point2& p) const { return {center_x + p.x * scale, center_y - p.y * scale}; }
};

RenderLayout render_layout(const SystemSpec& spec, const FrameGeometry& geometry);

/// Arms as anti-aliased strokes and masses as disks, dark on white.
Frame rasterize(const SystemSpec& spec, const StateVector& state, const FrameGeometry& geometry);

/// Diverging colormap for field values in [-1, 1]: entries at -1, -0.5, 0, 0.5, 1.
inline constexpr std::array<std::array<double, 3>, 5> kFieldColormap{{
    {0.0, 0.0, 1.0},
    {0.3, 0.4, 0.85},
    {0.5, 0.5, 0.5},
    {0.85, 0.4, 0.3},
    {1.0, 0.0, 0.0},
}};

std::array<double, 3> field_color(double value);

/// Maps u (G x G row-major) to a frame. Three channels use the colormap;
/// one channel stores (u + 1) / 2. Values are clamped to [-1, 1] first and
/// the grid is bilinearly resampled when G differs from the frame size.
Frame rasterize_field(const std::vector<double>& u, std::size_t grid, const FrameGeometry& geometry);

/// Any system state to a frame: rasterize for mechanical systems, the u
/// field for reaction-diffusion.
Frame render_state(const SystemSpec& spec, const StateVector& state, const FrameGeometry& geometry);

/// Bilinear resampling of a channel-major image with pixel-centre alignment.
std::vector<double> resample_bilinear(const std::vector<double>& src, std::size_t channels, std::size_t src_h,
                                      std::size_t src_w, std::size_t dst_h, std::size_t dst_w);

}  // namespace svlab
