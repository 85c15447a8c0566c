#include "svlab/models/inner.hpp"

#include "svlab/error.hpp"
#include "svlab/models/losses.hpp"

namespace svlab {

std::string to_string(Variant v) {
  switch (v) {
    case Variant::baseline: return "baseline";
    case Variant::pi_ae: return "pi-ae";
    case Variant::pi_vae: return "pi-vae";
    case Variant::hpi_vae: return "hpi-vae";
  }
  return "unknown";
}

Variant parse_variant(std::string_view name) {
  for (auto v : {Variant::baseline, Variant::pi_ae, Variant::pi_vae, Variant::hpi_vae}) {
    if (name == to_string(v)) return v;
  }
  throw ContractError("unknown variant '" + std::string(name) + "' (expected baseline, pi-ae, pi-vae or hpi-vae)");
}

bool is_variational(Variant v) { return v == Variant::pi_vae || v == Variant::hpi_vae; }

bool is_second_order(Variant v) { return v != Variant::baseline; }

void InnerConfig::validate() const {
  if (input_dim == 0 || hidden == 0 || latent == 0 || hnn_hidden == 0) {
    throw ContractError("inner model widths must be positive");
  }
  if (is_second_order(variant) && latent % 2 != 0) {
    throw ContractError(to_string(variant) + " needs an even latent width, got " + std::to_string(latent));
  }
}

HnnHead::HnnHead(std::size_t latent, std::size_t hidden, Rng& rng)
    : net_({latent, hidden, hidden, 1}, {Activation::tanh, Activation::tanh, Activation::identity}, rng) {}

InnerModel::InnerModel(const InnerConfig& config, Rng& rng) : config_(config) {
  config.validate();
  const std::size_t enc_out = is_variational(config.variant) ? 2 * config.latent : config.latent;
  encoder_ = Mlp({config.input_dim, config.hidden, enc_out}, {Activation::tanh, Activation::identity}, rng);
  decoder_ = Mlp({config.latent, config.hidden, config.input_dim}, {Activation::tanh, Activation::identity}, rng);
  if (config.variant == Variant::hpi_vae) head_.emplace(config.latent, config.hnn_hidden, rng);
}

InnerModel::Encoded InnerModel::encode(const Var& x) const {
  if (x.shape().size() != 2 || x.shape()[1] != config_.input_dim) {
    throw DimensionError("inner model expects [B x " + std::to_string(config_.input_dim) + "] input");
  }
  const Var out = encoder_.forward(x);
  if (!is_variational(config_.variant)) return {out, Var()};
  const Var raw = slice_cols(out, config_.latent, config_.latent);
  return {slice_cols(out, 0, config_.latent), clamp(raw, kLogvarMin, kLogvarMax), logvar_clamped(raw.value())};
}

Var InnerModel::decode(const Var& z) const { return decoder_.forward(z); }

std::vector<Var> InnerModel::parameters() const {
  std::vector<Var> out;
  for (const auto& [name, v] : named_parameters()) out.push_back(v);
  return out;
}

std::vector<std::pair<std::string, Var>> InnerModel::named_parameters() const {
  auto out = encoder_.named_parameters("encoder");
  for (auto& p : decoder_.named_parameters("decoder")) out.push_back(std::move(p));
  if (head_) {
    for (auto& p : head_->net().named_parameters("hnn")) out.push_back(std::move(p));
  }
  return out;
}

}  // namespace svlab
