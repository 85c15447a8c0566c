#include "conv_kernels.hpp"

namespace svlab::detail {

void im2col(std::span<const double> images, std::size_t batch, const ConvGeometry& g, std::span<double> cols) {
  const std::size_t plane = g.height * g.width;
  const std::size_t per_image = g.channels * plane;
  const std::size_t ncols = batch * g.col_cols();
  const auto pad = static_cast<std::ptrdiff_t>(g.padding);
  for (std::size_t c = 0; c < g.channels; ++c) {
    for (std::size_t ki = 0; ki < g.kernel_h; ++ki) {
      for (std::size_t kj = 0; kj < g.kernel_w; ++kj) {
        const std::size_t row = (c * g.kernel_h + ki) * g.kernel_w + kj;
        double* out = cols.data() + row * ncols;
        for (std::size_t b = 0; b < batch; ++b) {
          const double* img = images.data() + b * per_image + c * plane;
          for (std::size_t oi = 0; oi < g.out_h; ++oi) {
            const std::ptrdiff_t ii = static_cast<std::ptrdiff_t>(oi * g.stride + ki) - pad;
            for (std::size_t oj = 0; oj < g.out_w; ++oj) {
              const std::ptrdiff_t jj = static_cast<std::ptrdiff_t>(oj * g.stride + kj) - pad;
              const bool inside = ii >= 0 && jj >= 0 && ii < static_cast<std::ptrdiff_t>(g.height) &&
                                  jj < static_cast<std::ptrdiff_t>(g.width);
              *out++ = inside ? img[ii * static_cast<std::ptrdiff_t>(g.width) + jj] : 0.0;
            }
          }
        }
      }
    }
  }
}

void col2im(std::span<const double> cols, std::size_t batch, const ConvGeometry& g, std::span<double> images) {
  const std::size_t plane = g.height * g.width;
  const std::size_t per_image = g.channels * plane;
  const std::size_t ncols = batch * g.col_cols();
  const auto pad = static_cast<std::ptrdiff_t>(g.padding);
  for (std::size_t c = 0; c < g.channels; ++c) {
    for (std::size_t ki = 0; ki < g.kernel_h; ++ki) {
      for (std::size_t kj = 0; kj < g.kernel_w; ++kj) {
        const std::size_t row = (c * g.kernel_h + ki) * g.kernel_w + kj;
        const double* in = cols.data() + row * ncols;
        for (std::size_t b = 0; b < batch; ++b) {
          double* img = images.data() + b * per_image + c * plane;
          for (std::size_t oi = 0; oi < g.out_h; ++oi) {
            const std::ptrdiff_t ii = static_cast<std::ptrdiff_t>(oi * g.stride + ki) - pad;
            for (std::size_t oj = 0; oj < g.out_w; ++oj, ++in) {
              const std::ptrdiff_t jj = static_cast<std::ptrdiff_t>(oj * g.stride + kj) - pad;
              if (ii >= 0 && jj >= 0 && ii < static_cast<std::ptrdiff_t>(g.height) &&
                  jj < static_cast<std::ptrdiff_t>(g.width)) {
                img[ii * static_cast<std::ptrdiff_t>(g.width) + jj] += *in;
              }
            }
          }
        }
      }
    }
  }
}

}  // namespace svlab::detail
