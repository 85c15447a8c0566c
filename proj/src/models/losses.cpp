#include "svlab/models/losses.hpp"

#include "svlab/error.hpp"

namespace svlab {

namespace {

void require_same_shape(const Var& a, const Var& b, const char* what) {
  if (a.shape() != b.shape()) throw DimensionError(std::string(what) + ": operand shapes differ");
}

std::size_t even_half(const Var& z, const char* what) {
  if (z.shape().size() != 2) throw DimensionError(std::string(what) + " expects [B x latent] codes");
  const std::size_t width = z.shape()[1];
  if (width % 2 != 0) throw ContractError(std::string(what) + " needs an even latent width, got " + std::to_string(width));
  return width / 2;
}

double batch_size(const Var& v) { return static_cast<double>(v.shape().empty() ? 1 : v.shape()[0]); }

}  // namespace

Var reconstruction_loss(const Var& pred, const Var& target) {
  require_same_shape(pred, target, "reconstruction_loss");
  return mean(square(sub(pred, target)));
}

Var kl_divergence(const Var& mu, const Var& logvar) {
  require_same_shape(mu, logvar, "kl_divergence");
  const Var lv = clamp(logvar, kLogvarMin, kLogvarMax);
  const Var terms = affine(sub(add(square(mu), exp(lv)), lv), 0.5, -0.5);
  return scale(sum(terms), 1.0 / batch_size(mu));
}

bool logvar_clamped(const Tensor& logvar) {
  for (double v : logvar.data()) {
    if (v < kLogvarMin || v > kLogvarMax) return true;
  }
  return false;
}

Var reparameterize(const Var& mu, const Var& logvar, const Tensor& eps) {
  require_same_shape(mu, logvar, "reparameterize");
  if (eps.shape() != mu.shape()) throw DimensionError("reparameterize: noise shape differs");
  const Var sigma = exp(scale(clamp(logvar, kLogvarMin, kLogvarMax), 0.5));
  return add(mu, mul(sigma, Var::constant(eps)));
}

Var reparameterize(const Var& mu, const Var& logvar, Rng& rng) {
  Tensor eps(mu.shape());
  for (auto& e : eps.data()) e = rng.normal();
  return reparameterize(mu, logvar, eps);
}

Var second_order_penalty(const Var& z_t, const Var& z_next, double dt) {
  require_same_shape(z_t, z_next, "second_order_penalty");
  const std::size_t h = even_half(z_t, "second_order_penalty");
  const Var velocity = scale(sub(slice_cols(z_next, 0, h), slice_cols(z_t, 0, h)), 1.0 / dt);
  return mean(square(sub(slice_cols(z_t, h, h), velocity)));
}

Var hamilton_residual_from_gradient(const Var& grad, const Var& z_t, const Var& z_next, double dt) {
  require_same_shape(z_t, z_next, "hamilton_residual");
  require_same_shape(grad, z_t, "hamilton_residual");
  const std::size_t h = even_half(z_t, "hamilton_residual");
  const Var dz = scale(sub(z_next, z_t), 1.0 / dt);
  const Var rq = sub(slice_cols(dz, 0, h), slice_cols(grad, h, h));
  const Var rp = add(slice_cols(dz, h, h), slice_cols(grad, 0, h));
  return scale(add(sum(square(rq)), sum(square(rp))), 1.0 / batch_size(z_t));
}

Var hamilton_residual(const HnnHead& head, const Var& z_t, const Var& z_next, double dt, bool midpoint) {
  if (z_t.shape().size() != 2 || z_t.shape()[1] != head.net().in_features()) {
    throw DimensionError("hamilton_residual: latent width does not match the head");
  }
  const Var at = midpoint ? scale(add(z_t, z_next), 0.5) : z_t;
  return hamilton_residual_from_gradient(head.gradient(at), z_t, z_next, dt);
}

Var weighted_total(Variant variant, const LossTerms& t, const LossWeights& w) {
  switch (variant) {
    case Variant::baseline: return t.recon;
    case Variant::pi_ae: return add(t.recon, t.second_order);
    case Variant::pi_vae: return add(add(scale(t.recon, w.beta), t.kl), t.second_order);
    case Variant::hpi_vae: return add(add(add(scale(t.recon, w.beta), t.kl), t.second_order), t.hamilton);
  }
  throw ContractError("unknown variant");
}

LossBreakdown total_loss(const InnerModel& model, const Var& x_t, const Var* x_next, const LossWeights& weights,
                         Rng* rng) {
  const Variant variant = model.config().variant;
  if (is_second_order(variant) && (x_next == nullptr || !x_next->valid())) {
    throw ContractError(to_string(variant) + " needs consecutive-sample pairs");
  }
  LossBreakdown out;
  LossTerms terms;
  const auto enc = model.encode(x_t);
  Var z = enc.mu;
  if (is_variational(variant)) {
    out.logvar_clamped = enc.clamped;
    if (rng != nullptr) z = reparameterize(enc.mu, enc.logvar, *rng);
    terms.kl = kl_divergence(enc.mu, enc.logvar);
  }
  terms.recon = reconstruction_loss(model.decode(z), x_t);
  if (is_second_order(variant)) {
    const Var mu_next = model.encode(*x_next).mu;
    terms.second_order = second_order_penalty(enc.mu, mu_next, weights.dt);
    if (variant == Variant::hpi_vae) {
      terms.hamilton = hamilton_residual(*model.head(), enc.mu, mu_next, weights.dt, weights.hamilton_midpoint);
    }
  }
  out.total = weighted_total(variant, terms, weights);
  out.recon = terms.recon.value().item();
  if (terms.kl.valid()) out.kl = terms.kl.value().item();
  if (terms.second_order.valid()) out.second_order = terms.second_order.value().item();
  if (terms.hamilton.valid()) out.hamilton = terms.hamilton.value().item();
  return out;
}

}  // namespace svlab
