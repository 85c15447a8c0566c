#pragma once

#include <string>
#include <utility>
#include <vector>

#include "svlab/numcore/mlp.hpp"
#include "svlab/render/raster.hpp"

namespace svlab {

inline constexpr std::size_t kOuterLatent = 64;
inline constexpr std::size_t kOuterKernel = 4;
inline constexpr std::array<std::size_t, 5> kOuterChannels{8, 16, 32, 64, 64};

struct ConvLayer {
  Var kernels;  // conv: [C_out x C_in x 4 x 4]; transposed: [C_in x C_out x 4 x 4]
  Var bias;     // [C_out]
};

/// Convolutional autoencoder on 2-frame stacks [B x 2C x H x W].
///
/// Encoder: five stride-2 convolutions (kernel 4, padding 1) with tanh,
/// flattened into a dense layer that produces the 64-float latent.
/// Decoder: dense back to the bottleneck grid, then five stride-2 transposed
/// convolutions mirroring the encoder, tanh between them and a sigmoid on
/// the output. Frame sides must be multiples of 32.
class OuterAE {
 public:
  OuterAE() = default;
  OuterAE(const FrameGeometry& geometry, Rng& rng);

  struct Output {
    Var latent;      // [B x 64]
    Var prediction;  // [B x 2C x H x W]
  };

  Var encode(const Var& input) const;
  Var decode(const Var& latent) const;
  Output forward(const Var& input) const;

  /// Fills the output bias with logit(mean) so an untrained model starts at
  /// the mean-pixel predictor instead of 0.5 everywhere.
  void set_output_bias(double mean_pixel);

  const FrameGeometry& geometry() const { return geometry_; }
  std::size_t stack_channels() const { return 2 * geometry_.channels; }

  std::vector<Var> parameters() const;
  std::vector<std::pair<std::string, Var>> named_parameters() const;

 private:
  std::size_t bottleneck_h() const { return geometry_.height / 32; }
  std::size_t bottleneck_w() const { return geometry_.width / 32; }
  std::size_t bottleneck_size() const { return kOuterChannels.back() * bottleneck_h() * bottleneck_w(); }
  void check_input(const Var& input) const;

  FrameGeometry geometry_;
  std::vector<ConvLayer> down_;
  DenseLayer to_latent_;
  DenseLayer from_latent_;
  std::vector<ConvLayer> up_;
};

/// Throws ContractError unless the geometry is valid and both sides are
/// multiples of 32.
void check_outer_geometry(const FrameGeometry& geometry);

}  // namespace svlab
