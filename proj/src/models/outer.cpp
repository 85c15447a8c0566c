#include "svlab/models/outer.hpp"

#include <algorithm>
#include <cmath>

#include "svlab/error.hpp"

namespace svlab {

namespace {

// Fan-in uniform kernels. A stride-2 transposed layer feeds each output pixel
// from a quarter of its taps. Transposed layers store [C_in x C_out] leading dims.
ConvLayer make_conv(std::size_t c_in, std::size_t c_out, bool transposed, Rng& rng) {
  const std::size_t taps = transposed ? kOuterKernel * kOuterKernel / 4 : kOuterKernel * kOuterKernel;
  const double limit = std::sqrt(3.0 / static_cast<double>(c_in * taps));
  Tensor k(transposed ? Shape{c_in, c_out, kOuterKernel, kOuterKernel} : Shape{c_out, c_in, kOuterKernel, kOuterKernel});
  for (auto& v : k.data()) v = rng.uniform(-limit, limit);
  return {Var::parameter(std::move(k)), Var::parameter(Tensor({c_out}))};
}

}  // namespace

void check_outer_geometry(const FrameGeometry& geometry) {
  geometry.validate();
  if (geometry.height % 32 != 0 || geometry.width % 32 != 0) {
    throw ContractError("outer autoencoder needs frame sides divisible by 32, got " + std::to_string(geometry.height) +
                        "x" + std::to_string(geometry.width));
  }
}

OuterAE::OuterAE(const FrameGeometry& geometry, Rng& rng) : geometry_(geometry) {
  check_outer_geometry(geometry);
  std::size_t c_in = stack_channels();
  for (std::size_t c_out : kOuterChannels) {
    down_.push_back(make_conv(c_in, c_out, false, rng));
    c_in = c_out;
  }
  to_latent_ = make_dense(bottleneck_size(), kOuterLatent, Activation::identity, rng);
  from_latent_ = make_dense(kOuterLatent, bottleneck_size(), Activation::tanh, rng);
  for (std::size_t i = kOuterChannels.size(); i-- > 0;) {
    const std::size_t c_out = i == 0 ? stack_channels() : kOuterChannels[i - 1];
    up_.push_back(make_conv(kOuterChannels[i], c_out, true, rng));
  }
}

void OuterAE::check_input(const Var& input) const {
  const Shape& s = input.shape();
  if (s.size() != 4 || s[1] != stack_channels() || s[2] != geometry_.height || s[3] != geometry_.width) {
    throw ContractError("outer autoencoder expects [B x " + std::to_string(stack_channels()) + " x " +
                        std::to_string(geometry_.height) + " x " + std::to_string(geometry_.width) + "] input");
  }
}

Var OuterAE::encode(const Var& input) const {
  check_input(input);
  Var h = input;
  for (const auto& layer : down_) h = tanh(add_channel_bias(conv2d(h, layer.kernels, 2, 1), layer.bias));
  h = reshape(h, {input.shape()[0], bottleneck_size()});
  return dense_forward(to_latent_, h);
}

Var OuterAE::decode(const Var& latent) const {
  if (latent.shape().size() != 2 || latent.shape()[1] != kOuterLatent) {
    throw ContractError("outer decoder expects [B x 64] latents");
  }
  const std::size_t batch = latent.shape()[0];
  Var h = reshape(dense_forward(from_latent_, latent), {batch, kOuterChannels.back(), bottleneck_h(), bottleneck_w()});
  for (std::size_t i = 0; i < up_.size(); ++i) {
    h = add_channel_bias(conv_transpose2d(h, up_[i].kernels, 2, 1), up_[i].bias);
    h = i + 1 == up_.size() ? sigmoid(h) : tanh(h);
  }
  return h;
}

OuterAE::Output OuterAE::forward(const Var& input) const {
  Var z = encode(input);
  Var y = decode(z);
  return {z, y};
}

void OuterAE::set_output_bias(double mean_pixel) {
  const double p = std::clamp(mean_pixel, 1e-4, 1.0 - 1e-4);
  for (auto& b : up_.back().bias.mutable_value().data()) b = std::log(p / (1.0 - p));
}

std::vector<Var> OuterAE::parameters() const {
  std::vector<Var> out;
  for (const auto& [name, v] : named_parameters()) out.push_back(v);
  return out;
}

std::vector<std::pair<std::string, Var>> OuterAE::named_parameters() const {
  std::vector<std::pair<std::string, Var>> out;
  for (std::size_t i = 0; i < down_.size(); ++i) {
    out.emplace_back("outer.down." + std::to_string(i) + ".kernels", down_[i].kernels);
    out.emplace_back("outer.down." + std::to_string(i) + ".bias", down_[i].bias);
  }
  out.emplace_back("outer.to_latent.weight", to_latent_.weight);
  out.emplace_back("outer.to_latent.bias", to_latent_.bias);
  out.emplace_back("outer.from_latent.weight", from_latent_.weight);
  out.emplace_back("outer.from_latent.bias", from_latent_.bias);
  for (std::size_t i = 0; i < up_.size(); ++i) {
    out.emplace_back("outer.up." + std::to_string(i) + ".kernels", up_[i].kernels);
    out.emplace_back("outer.up." + std::to_string(i) + ".bias", up_[i].bias);
  }
  return out;
}

}  // namespace svlab
