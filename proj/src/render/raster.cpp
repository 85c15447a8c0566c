#include "svlab/render/raster.hpp"

#include <algorithm>
#include <cmath>

#include "svlab/error.hpp"

namespace svlab {

namespace {

struct Shape2 {
  bool disk;
  double ax, ay, bx, by;  // disk centre in (ax, ay)
  double radius;
  std::array<double, 3> color;
};

double segment_distance(double px, double py, const Shape2& s) {
  const double dx = s.bx - s.ax, dy = s.by - s.ay;
  const double len2 = dx * dx + dy * dy;
  double t = len2 > 0.0 ? ((px - s.ax) * dx + (py - s.ay) * dy) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  return std::hypot(px - (s.ax + t * dx), py - (s.ay + t * dy));
}

double coverage(double px, double py, const Shape2& s) {
  const double d = s.disk ? std::hypot(px - s.ax, py - s.ay) : segment_distance(px, py, s);
  return std::clamp(0.5 - (d - s.radius), 0.0, 1.0);
}

double system_reach(const SystemSpec& spec) {
  switch (spec.kind) {
    case SystemKind::single_pendulum: return spec.l1;
    case SystemKind::double_pendulum: return spec.l1 + spec.l2;
    case SystemKind::elastic_pendulum:
      return spec.r0 * (1.0 + spec.extension_range) + 2.0 * (spec.m1 + spec.m2) * spec.g / spec.k + spec.l2;
    case SystemKind::reaction_diffusion: break;
  }
  return 1.0;
}

constexpr std::array<std::array<double, 3>, 2> kBobColors{{{0.8, 0.1, 0.1}, {0.1, 0.2, 0.8}}};

}  // namespace

void FrameGeometry::validate() const {
  if (channels != 1 && channels != 3) throw ContractError("frame channels must be 1 or 3");
  if (height < 4 || width < 4 || height > 64 || width > 64) {
    throw ContractError("frame size must lie in [4, 64] on each side, got " + std::to_string(height) + "x" +
                        std::to_string(width));
  }
}

RenderLayout render_layout(const SystemSpec& spec, const FrameGeometry& geometry) {
  RenderLayout l;
  const double side = static_cast<double>(std::min(geometry.height, geometry.width));
  l.center_x = 0.5 * static_cast<double>(geometry.width);
  l.center_y = 0.5 * static_cast<double>(geometry.height);
  l.scale = 0.5 * side / (1.05 * system_reach(spec));
  l.bob_radius = 0.07 * side;
  l.stroke_width = 0.035 * side;
  return l;
}

Frame rasterize(const SystemSpec& spec, const StateVector& state, const FrameGeometry& geometry) {
  if (!spec.mechanical()) throw UnsupportedSystemError("rasterize draws mechanical systems; use rasterize_field");
  geometry.validate();
  const RenderLayout layout = render_layout(spec, geometry);
  Frame frame{geometry, std::vector<double>(geometry.numel(), 1.0), false};

  const double w = static_cast<double>(geometry.width), h = static_cast<double>(geometry.height);
  std::vector<std::array<double, 2>> joints{layout.to_pixel({0.0, 0.0})};
  for (const auto& p : mass_positions(spec, state)) {
    auto px = layout.to_pixel(p);
    const std::array<double, 2> clamped{std::clamp(px[0], 0.0, w), std::clamp(px[1], 0.0, h)};
    if (clamped != px) frame.clamped = true;
    joints.push_back(clamped);
  }

  std::vector<Shape2> shapes;
  const double half_stroke = 0.5 * layout.stroke_width;
  for (std::size_t i = 1; i < joints.size(); ++i) {
    shapes.push_back({false, joints[i - 1][0], joints[i - 1][1], joints[i][0], joints[i][1], half_stroke, {0.0, 0.0, 0.0}});
  }
  for (std::size_t i = 1; i < joints.size(); ++i) {
    shapes.push_back({true, joints[i][0], joints[i][1], 0.0, 0.0, layout.bob_radius, kBobColors[(i - 1) % 2]});
  }

  const std::size_t plane = geometry.height * geometry.width;
  for (std::size_t i = 0; i < geometry.height; ++i) {
    for (std::size_t j = 0; j < geometry.width; ++j) {
      const double px = static_cast<double>(j) + 0.5, py = static_cast<double>(i) + 0.5;
      std::array<double, 3> rgb{1.0, 1.0, 1.0};
      for (const auto& s : shapes) {
        const double a = coverage(px, py, s);
        if (a <= 0.0) continue;
        // Single-channel frames draw every shape in black.
        for (int c = 0; c < 3; ++c) rgb[c] = rgb[c] * (1.0 - a) + (geometry.channels == 1 ? 0.0 : s.color[c]) * a;
      }
      for (std::size_t c = 0; c < geometry.channels; ++c) frame.pixels[c * plane + i * geometry.width + j] = rgb[c];
    }
  }
  return frame;
}

std::array<double, 3> field_color(double value) {
  const double pos = (std::clamp(value, -1.0, 1.0) + 1.0) * 2.0;
  const std::size_t lo = std::min<std::size_t>(static_cast<std::size_t>(pos), 3);
  const double t = pos - static_cast<double>(lo);
  std::array<double, 3> out{};
  for (int c = 0; c < 3; ++c) out[c] = (1.0 - t) * kFieldColormap[lo][c] + t * kFieldColormap[lo + 1][c];
  return out;
}

Frame rasterize_field(const std::vector<double>& u, std::size_t grid, const FrameGeometry& geometry) {
  geometry.validate();
  if (grid == 0 || u.size() < grid * grid) throw ContractError("field grid must be square and non-empty");
  std::vector<double> values(u.begin(), u.begin() + static_cast<std::ptrdiff_t>(grid * grid));
  if (grid != geometry.height || grid != geometry.width) {
    values = resample_bilinear(values, 1, grid, grid, geometry.height, geometry.width);
  }
  Frame frame{geometry, std::vector<double>(geometry.numel()), false};
  const std::size_t plane = geometry.height * geometry.width;
  for (std::size_t k = 0; k < plane; ++k) {
    if (geometry.channels == 1) {
      frame.pixels[k] = 0.5 * (std::clamp(values[k], -1.0, 1.0) + 1.0);
    } else {
      const auto rgb = field_color(values[k]);
      for (std::size_t c = 0; c < 3; ++c) frame.pixels[c * plane + k] = rgb[c];
    }
  }
  return frame;
}

Frame render_state(const SystemSpec& spec, const StateVector& state, const FrameGeometry& geometry) {
  if (spec.mechanical()) return rasterize(spec, state, geometry);
  const std::size_t g = static_cast<std::size_t>(spec.grid);
  if (state.size() != spec.state_size()) throw ContractError("reaction-diffusion state size mismatch");
  return rasterize_field(std::vector<double>(state.begin(), state.begin() + static_cast<std::ptrdiff_t>(g * g)), g,
                         geometry);
}

std::vector<double> resample_bilinear(const std::vector<double>& src, std::size_t channels, std::size_t src_h,
                                      std::size_t src_w, std::size_t dst_h, std::size_t dst_w) {
  if (src.size() != channels * src_h * src_w) throw ContractError("resample_bilinear: source size mismatch");
  std::vector<double> out(channels * dst_h * dst_w);
  const double sy = static_cast<double>(src_h) / static_cast<double>(dst_h);
  const double sx = static_cast<double>(src_w) / static_cast<double>(dst_w);
  for (std::size_t i = 0; i < dst_h; ++i) {
    const double y = std::clamp((static_cast<double>(i) + 0.5) * sy - 0.5, 0.0, static_cast<double>(src_h - 1));
    const std::size_t y0 = static_cast<std::size_t>(y), y1 = std::min(y0 + 1, src_h - 1);
    const double fy = y - static_cast<double>(y0);
    for (std::size_t j = 0; j < dst_w; ++j) {
      const double x = std::clamp((static_cast<double>(j) + 0.5) * sx - 0.5, 0.0, static_cast<double>(src_w - 1));
      const std::size_t x0 = static_cast<std::size_t>(x), x1 = std::min(x0 + 1, src_w - 1);
      const double fx = x - static_cast<double>(x0);
      for (std::size_t c = 0; c < channels; ++c) {
        const double* p = src.data() + c * src_h * src_w;
        const double top = (1.0 - fx) * p[y0 * src_w + x0] + fx * p[y0 * src_w + x1];
        const double bottom = (1.0 - fx) * p[y1 * src_w + x0] + fx * p[y1 * src_w + x1];
        out[(c * dst_h + i) * dst_w + j] = (1.0 - fy) * top + fy * bottom;
      }
    }
  }
  return out;
}

}  // namespace svlab
