#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "svlab/numcore/mlp.hpp"

namespace svlab {

enum class Variant { baseline, pi_ae, pi_vae, hpi_vae };

std::string to_string(Variant v);
Variant parse_variant(std::string_view name);
bool is_variational(Variant v);
/// Variants whose latent is split into (q, p) pairs.
bool is_second_order(Variant v);

inline constexpr std::size_t kVariationalLatent = 10;

struct InnerConfig {
  Variant variant = Variant::pi_vae;
  std::size_t input_dim = 64;
  std::size_t hidden = 32;
  /// Baseline / PI-AE: dof_round(ID). Variational variants: 10.
  std::size_t latent = kVariationalLatent;
  std::size_t hnn_hidden = 64;

  void validate() const;
  bool operator==(const InnerConfig&) const = default;
};

/// Scalar Hamiltonian network latent -> hidden -> hidden -> 1, tanh.
class HnnHead {
 public:
  HnnHead() = default;
  HnnHead(std::size_t latent, std::size_t hidden, Rng& rng);

  Var energy(const Var& z) const { return net_.forward(z); }
  /// dH/dz rows, differentiable with respect to the head parameters.
  Var gradient(const Var& z) const { return input_gradient(net_, z); }

  const Mlp& net() const { return net_; }
  Mlp& net() { return net_; }

 private:
  Mlp net_;
};

/// Encoder 64 -> 32 -> out, decoder latent -> 32 -> 64, tanh hidden units.
/// Variational encoders emit [mu | logvar]. Second-order latents pair
/// q_i = z[i] with p_i = z[latent/2 + i].
class InnerModel {
 public:
  InnerModel() = default;
  InnerModel(const InnerConfig& config, Rng& rng);

  struct Encoded {
    Var mu;
    Var logvar;  // invalid for deterministic variants
    /// Some raw logvar entry fell outside [-10, 10] before clamping.
    bool clamped = false;
  };

  Encoded encode(const Var& x) const;
  Var decode(const Var& z) const;

  const InnerConfig& config() const { return config_; }
  const Mlp& encoder() const { return encoder_; }
  const Mlp& decoder() const { return decoder_; }
  const std::optional<HnnHead>& head() const { return head_; }
  Mlp& encoder() { return encoder_; }
  Mlp& decoder() { return decoder_; }
  std::optional<HnnHead>& head() { return head_; }

  std::vector<Var> parameters() const;
  std::vector<std::pair<std::string, Var>> named_parameters() const;

 private:
  InnerConfig config_;
  Mlp encoder_;
  Mlp decoder_;
  std::optional<HnnHead> head_;
};

}  // namespace svlab
