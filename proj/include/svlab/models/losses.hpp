#pragma once

#include "svlab/models/inner.hpp"
#include "svlab/numcore/rng.hpp"

namespace svlab {

inline constexpr double kLogvarMin = -10.0;
inline constexpr double kLogvarMax = 10.0;

/// Mean squared error over all elements.
Var reconstruction_loss(const Var& pred, const Var& target);

/// KL(q(z|x) || N(0, I)) for diagonal Gaussians, summed over latent
/// dimensions and averaged over the batch. logvar is clamped to [-10, 10].
Var kl_divergence(const Var& mu, const Var& logvar);

/// True if any logvar entry lies outside the clamp range.
bool logvar_clamped(const Tensor& logvar);

/// mu + exp(logvar / 2) * eps with eps ~ N(0, I) drawn row-major from rng.
Var reparameterize(const Var& mu, const Var& logvar, Rng& rng);
/// Same with an explicit noise tensor.
Var reparameterize(const Var& mu, const Var& logvar, const Tensor& eps);

/// Mean over batch and pairs of (p_i(t) - (q_i(t+1) - q_i(t)) / dt)^2.
Var second_order_penalty(const Var& z_t, const Var& z_next, double dt = 1.0);

/// Batch mean of |dq/dt - dH/dp|^2 + |dp/dt + dH/dq|^2, with the time
/// derivatives taken as forward differences and dH/dz given per row.
Var hamilton_residual_from_gradient(const Var& grad, const Var& z_t, const Var& z_next, double dt = 1.0);

/// Residual with dH/dz from the head at z_t, or at the midpoint
/// (z_t + z_next) / 2 when `midpoint` is set.
Var hamilton_residual(const HnnHead& head, const Var& z_t, const Var& z_next, double dt = 1.0,
                      bool midpoint = false);

struct LossWeights {
  /// Reconstruction weight for the variational variants.
  double beta = 1.0;
  double dt = 1.0;
  bool hamilton_midpoint = false;
};

struct LossTerms {
  Var recon;
  Var kl;
  Var second_order;
  Var hamilton;
};

/// baseline: recon; pi-ae: recon + so; pi-vae: beta recon + kl + so;
/// hpi-vae: beta recon + kl + so + hamilton.
Var weighted_total(Variant variant, const LossTerms& terms, const LossWeights& weights);

struct LossBreakdown {
  Var total;
  double recon = 0.0;
  double kl = 0.0;
  double second_order = 0.0;
  double hamilton = 0.0;
  bool logvar_clamped = false;
};

/// x_t [B x 64] and, for second-order variants, the successor rows
/// x_next. Physics terms act on posterior means (the code itself for
/// deterministic variants). With rng == nullptr the decoder sees mu instead
/// of a sample.
LossBreakdown total_loss(const InnerModel& model, const Var& x_t, const Var* x_next, const LossWeights& weights,
                         Rng* rng);

}  // namespace svlab
