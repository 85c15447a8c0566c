#pragma once

#include <cstddef>
#include <span>

namespace svlab::detail {

struct ConvGeometry {
  std::size_t channels;  // channels of the "image" side
  std::size_t height, width;
  std::size_t kernel_h, kernel_w;
  std::size_t stride, padding;
  std::size_t out_h, out_w;  // spatial size of the "column" side

  std::size_t col_rows() const { return channels * kernel_h * kernel_w; }
  std::size_t col_cols() const { return out_h * out_w; }
};

/// Unfolds `batch` images [B x C x H x W] into columns
/// [C*kh*kw x B*out_h*out_w].
void im2col(std::span<const double> images, std::size_t batch, const ConvGeometry& g, std::span<double> cols);

/// Adjoint of im2col: scatters columns back, accumulating into images.
void col2im(std::span<const double> cols, std::size_t batch, const ConvGeometry& g, std::span<double> images);

}  // namespace svlab::detail
