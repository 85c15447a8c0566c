#include "svlab/train/train.hpp"

#include <chrono>
#include <cmath>
#include <numeric>

#include "svlab/error.hpp"
#include "svlab/models/losses.hpp"
#include "svlab/numcore/adam.hpp"
#include "svlab/train/metrics.hpp"

namespace svlab {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

void shuffle(std::vector<std::size_t>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[rng.below(i)]);
}

Tensor gather_rows(const LatentSet& set, const std::size_t* idx, std::size_t count, std::size_t offset) {
  Tensor out({count, set.dim});
  for (std::size_t b = 0; b < count; ++b) {
    const double* src = set.row(idx[b] + offset);
    std::copy(src, src + set.dim, out.data().begin() + b * set.dim);
  }
  return out;
}

constexpr std::size_t kEvalBatch = 512;

double mean_reconstruction(const InnerModel& model, const LatentSet& set) {
  double total = 0.0;
  std::vector<std::size_t> idx(set.size());
  std::iota(idx.begin(), idx.end(), 0);
  for (std::size_t start = 0; start < set.size(); start += kEvalBatch) {
    const std::size_t count = std::min(kEvalBatch, set.size() - start);
    const Var x(gather_rows(set, idx.data() + start, count, 0));
    total += reconstruction_loss(model.decode(model.encode(x).mu), x).value().item() * count;
  }
  return total / static_cast<double>(set.size());
}

// Window starts of every trajectory in a split, as (traj, t).
std::vector<std::pair<std::size_t, std::size_t>> windows(const DatasetSplit& split, int shift) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  const std::size_t per = split.samples_per_trajectory(shift);
  for (std::size_t k = 0; k < split.n_trajectories(); ++k)
    for (std::size_t t = 0; t < per; ++t) out.emplace_back(k, t);
  return out;
}

Tensor stack_batch(const DatasetSplit& split, const std::vector<std::pair<std::size_t, std::size_t>>& w,
                   const std::size_t* idx, std::size_t count, const FrameGeometry& g, int shift, bool target) {
  const std::size_t per = 2 * g.numel();
  Tensor out({count, 2 * g.channels, g.height, g.width});
  for (std::size_t b = 0; b < count; ++b) {
    const auto [k, t] = w[idx[b]];
    const auto s = target ? split.target_stack(k, t, shift) : split.input_stack(k, t);
    std::copy(s.begin(), s.end(), out.data().begin() + b * per);
  }
  return out;
}

double outer_validation(const OuterAE& model, const Dataset& ds) {
  const auto w = windows(ds.validation, ds.shift);
  std::vector<std::size_t> idx(w.size());
  std::iota(idx.begin(), idx.end(), 0);
  double total = 0.0;
  constexpr std::size_t batch = 128;
  for (std::size_t start = 0; start < w.size(); start += batch) {
    const std::size_t count = std::min(batch, w.size() - start);
    const Var x(stack_batch(ds.validation, w, idx.data() + start, count, ds.geometry, ds.shift, false));
    const Var y(stack_batch(ds.validation, w, idx.data() + start, count, ds.geometry, ds.shift, true));
    total += reconstruction_loss(model.forward(x).prediction, y).value().item() * count;
  }
  return total / static_cast<double>(w.size());
}

}  // namespace

std::vector<std::size_t> LatentSet::pair_starts() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i + 1 < size(); ++i) {
    if (traj[i + 1] == traj[i] && t[i + 1] == t[i] + 1) out.push_back(i);
  }
  return out;
}

Dataset prepare_dataset(const TrainConfig& config) {
  config.validate();
  const auto trajectories = simulate_many(config.system, config.data.trajectories, config.data.frames,
                                          config.effective_dt_frame(), config.data.substeps, config.data.seed,
                                          config.jobs);
  DatasetConfig dc;
  dc.geometry = config.data.geometry;
  dc.shift = config.data.shift;
  dc.mode = config.data.mode;
  dc.seed = config.data.seed;
  dc.embed_seed = config.data.embed_seed;
  dc.jobs = config.jobs;
  return make_dataset(trajectories, dc);
}

OuterResult train_outer(const TrainConfig& config, const Dataset& ds) {
  if (ds.mode != DatasetMode::frames) throw ContractError("train_outer needs a frames-mode dataset");
  check_outer_geometry(ds.geometry);
  const auto start = Clock::now();
  const Rng root(config.seed);
  Rng init = root.split(0), order = root.split(1);

  OuterResult out{OuterAE(ds.geometry, init), {}};
  const auto& feats = ds.train.features;
  out.model.set_output_bias(std::accumulate(feats.begin(), feats.end(), 0.0) / static_cast<double>(feats.size()));
  out.report.seed = config.seed;
  out.report.config_hash = config_hash(config);

  const auto w = windows(ds.train, ds.shift);
  std::vector<std::size_t> idx(w.size());
  std::iota(idx.begin(), idx.end(), 0);
  Adam opt(out.model.parameters(), {.lr = config.outer_lr});
  std::size_t below = 0;
  try {
    for (std::size_t epoch = 0; epoch < config.outer_epochs; ++epoch) {
      shuffle(idx, order);
      EpochLoss e;
      for (std::size_t b0 = 0; b0 < idx.size(); b0 += config.outer_batch_size) {
        const std::size_t count = std::min(config.outer_batch_size, idx.size() - b0);
        const Var x(stack_batch(ds.train, w, idx.data() + b0, count, ds.geometry, ds.shift, false));
        const Var y(stack_batch(ds.train, w, idx.data() + b0, count, ds.geometry, ds.shift, true));
        const Var loss = reconstruction_loss(out.model.forward(x).prediction, y);
        opt.zero_grad();
        backward(loss);
        opt.step();
        e.recon += loss.value().item() * count;
      }
      e.recon /= static_cast<double>(idx.size());
      e.total = e.recon;
      e.val_recon = outer_validation(out.model, ds);
      out.report.history.push_back(e);
      below = e.val_recon < config.outer_early_stop ? below + 1 : 0;
      if (below >= config.outer_patience) {
        out.report.early_stopped = true;
        break;
      }
    }
  } catch (const NumericalError& err) {
    out.report.diverged = true;
    out.report.error = err.what();
  }
  out.report.final_val_recon = out.report.history.empty() ? NAN : out.report.history.back().val_recon;
  out.report.wall_seconds = seconds_since(start);
  return out;
}

LatentSet compute_outer_latents(const OuterAE* outer, const Dataset& ds, SplitName name) {
  const DatasetSplit& split = ds.split(name);
  const auto w = windows(split, ds.shift);
  LatentSet out;
  out.traj.reserve(w.size());
  out.t.reserve(w.size());
  for (const auto& [k, t] : w) {
    out.traj.push_back(k);
    out.t.push_back(t);
  }
  if (ds.mode == DatasetMode::vectors) {
    out.dim = split.feature_dim;
    out.rows.reserve(w.size() * out.dim);
    for (const auto& [k, t] : w) {
      const auto f = split.frame(k, t);
      out.rows.insert(out.rows.end(), f.begin(), f.end());
    }
    return out;
  }
  if (outer == nullptr) throw ContractError("frames-mode latents need a trained outer model");
  if (!(outer->geometry() == ds.geometry)) throw ContractError("outer model geometry does not match the dataset");
  out.dim = kOuterLatent;
  out.rows.reserve(w.size() * out.dim);
  std::vector<std::size_t> idx(w.size());
  std::iota(idx.begin(), idx.end(), 0);
  constexpr std::size_t batch = 128;
  for (std::size_t start = 0; start < w.size(); start += batch) {
    const std::size_t count = std::min(batch, w.size() - start);
    const Var x(stack_batch(split, w, idx.data() + start, count, ds.geometry, ds.shift, false));
    const Tensor z = outer->encode(x).value();
    out.rows.insert(out.rows.end(), z.values().begin(), z.values().end());
  }
  return out;
}

IdEstimate estimate_latent_id(const TrainConfig& config, const LatentSet& latents) {
  const PointCloud cloud = subsample(latents.cloud(), config.id_max_points, config.seed);
  return mle_id(cloud, config.id_k1, config.id_k2, config.jobs);
}

std::vector<double> posterior_means(const InnerModel& model, const std::vector<double>& rows, std::size_t dim) {
  if (dim == 0 || rows.size() % dim != 0) throw DimensionError("posterior_means: ragged input");
  const std::size_t n = rows.size() / dim;
  std::vector<double> out;
  out.reserve(n * model.config().latent);
  for (std::size_t start = 0; start < n; start += kEvalBatch) {
    const std::size_t count = std::min(kEvalBatch, n - start);
    Tensor x({count, dim}, std::vector<double>(rows.begin() + start * dim, rows.begin() + (start + count) * dim));
    const Tensor mu = model.encode(Var(std::move(x))).mu.value();
    out.insert(out.end(), mu.values().begin(), mu.values().end());
  }
  return out;
}

InnerResult train_inner(const TrainConfig& config, const InnerConfig& inner, const LatentSet& train,
                        const LatentSet& validation) {
  if (train.dim != inner.input_dim || validation.dim != inner.input_dim) {
    throw DimensionError("inner model input width does not match the latents");
  }
  const auto start = Clock::now();
  const Rng root(config.seed);
  Rng init = root.split(0), order = root.split(1), noise = root.split(2);

  InnerResult out{InnerModel(inner, init), {}, {}};
  out.report.seed = config.seed;
  out.report.config_hash = config_hash(config);
  const Variant variant = inner.variant;
  const bool paired = is_second_order(variant);

  std::vector<std::size_t> idx;
  if (paired) {
    idx = train.pair_starts();
  } else {
    idx.resize(train.size());
    std::iota(idx.begin(), idx.end(), 0);
  }
  if (idx.empty()) throw ContractError("no training samples");

  LossWeights weights;
  weights.beta = config.effective_beta();
  weights.hamilton_midpoint = config.hamilton_midpoint;
  Adam opt(out.model.parameters(), {.lr = config.lr});
  Rng* sampler = is_variational(variant) ? &noise : nullptr;

  try {
    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
      shuffle(idx, order);
      EpochLoss e;
      for (std::size_t b0 = 0; b0 < idx.size(); b0 += config.batch_size) {
        const std::size_t count = std::min(config.batch_size, idx.size() - b0);
        const Var x(gather_rows(train, idx.data() + b0, count, 0));
        Var next;
        if (paired) next = Var(gather_rows(train, idx.data() + b0, count, 1));
        const LossBreakdown loss = total_loss(out.model, x, paired ? &next : nullptr, weights, sampler);
        opt.zero_grad();
        backward(loss.total);
        opt.step();
        const double w = static_cast<double>(count);
        e.total += loss.total.value().item() * w;
        e.recon += loss.recon * w;
        e.kl += loss.kl * w;
        e.second_order += loss.second_order * w;
        e.hamilton += loss.hamilton * w;
      }
      const double n = static_cast<double>(idx.size());
      e.total /= n;
      e.recon /= n;
      e.kl /= n;
      e.second_order /= n;
      e.hamilton /= n;
      e.val_recon = mean_reconstruction(out.model, validation);
      if (!std::isfinite(e.total) || !std::isfinite(e.val_recon)) throw TrainingError("non-finite loss");
      out.report.history.push_back(e);
    }
  } catch (const NumericalError& err) {
    out.report.diverged = true;
    out.report.error = err.what();
  }
  out.report.final_val_recon = out.report.history.empty() ? NAN : out.report.history.back().val_recon;
  out.report.wall_seconds = seconds_since(start);

  DofReport& d = out.dof;
  d.system = to_string(config.system.kind);
  d.variant = variant;
  d.latent_width = inner.latent;
  d.ground_truth = config.system.dof();
  d.val_recon = out.report.final_val_recon;
  d.recon_pass = !out.report.diverged && d.val_recon < 0.01;
  if (!out.report.diverged) {
    d.variances = column_variances(posterior_means(out.model, validation.rows, validation.dim), inner.latent);
    const ActiveDims active = count_active_dims(d.variances, config.threshold);
    d.mask = active.mask;
    d.active_count = active.count;
  }
  switch (variant) {
    case Variant::pi_vae:
    case Variant::hpi_vae: d.dof_pass = !out.report.diverged && static_cast<int>(d.active_count) == d.ground_truth; break;
    case Variant::pi_ae: d.dof_pass = static_cast<int>(inner.latent) == d.ground_truth; break;
    case Variant::baseline: break;
  }
  return out;
}

InnerResult run_baseline(const TrainConfig& config, const LatentSet& train, const LatentSet& validation) {
  const IdEstimate id = estimate_latent_id(config, train);
  const int width = dof_round(id.value);
  InnerConfig inner{Variant::baseline, train.dim, config.hidden, static_cast<std::size_t>(width), config.hnn_hidden};
  TrainConfig c = config;
  c.variant = Variant::baseline;
  InnerResult out = train_inner(c, inner, train, validation);
  out.dof.raw_id = id.value;
  out.dof.rounded_id = width;
  out.dof.dof_pass = width == out.dof.ground_truth;
  return out;
}

InnerResult run_variant(const TrainConfig& config, Variant variant, const LatentSet& train,
                        const LatentSet& validation, std::optional<IdEstimate> id) {
  if (variant == Variant::baseline) return run_baseline(config, train, validation);
  TrainConfig c = config;
  c.variant = variant;
  InnerConfig inner{variant, train.dim, config.hidden, config.latent, config.hnn_hidden};
  if (variant == Variant::pi_ae) {
    if (!id) id = estimate_latent_id(config, train);
    inner.latent = static_cast<std::size_t>(dof_round(id->value));
  }
  InnerResult out = train_inner(c, inner, train, validation);
  if (id) {
    out.dof.raw_id = id->value;
    out.dof.rounded_id = dof_round(id->value);
  }
  return out;
}

nlohmann::json to_json(const TrainReport& r) {
  nlohmann::json history = nlohmann::json::array();
  for (const auto& e : r.history) {
    history.push_back({{"total", e.total},
                       {"recon", e.recon},
                       {"kl", e.kl},
                       {"second_order", e.second_order},
                       {"hamilton", e.hamilton},
                       {"val_recon", e.val_recon}});
  }
  return {{"history", history},
          {"epochs_run", r.history.size()},
          {"final_val_recon", std::isfinite(r.final_val_recon) ? nlohmann::json(r.final_val_recon) : nlohmann::json()},
          {"wall_seconds", r.wall_seconds},
          {"seed", r.seed},
          {"config_hash", r.config_hash},
          {"early_stopped", r.early_stopped},
          {"diverged", r.diverged},
          {"error", r.error}};
}

nlohmann::json to_json(const DofReport& d) {
  nlohmann::json j{{"system", d.system},
                   {"variant", to_string(d.variant)},
                   {"latent_width", d.latent_width},
                   {"variances", d.variances},
                   {"mask", d.mask},
                   {"active_count", d.active_count},
                   {"ground_truth", d.ground_truth},
                   {"dof_pass", d.dof_pass},
                   {"val_recon", std::isfinite(d.val_recon) ? nlohmann::json(d.val_recon) : nlohmann::json()},
                   {"recon_pass", d.recon_pass}};
  j["raw_id"] = d.raw_id ? nlohmann::json(*d.raw_id) : nlohmann::json();
  j["rounded_id"] = d.rounded_id ? nlohmann::json(*d.rounded_id) : nlohmann::json();
  return j;
}

nlohmann::json to_json(const IdEstimate& e) {
  return {{"value", e.value}, {"k1", e.k1},   {"k2", e.k2},
          {"per_k", e.per_k}, {"n", e.n},     {"dof_round", dof_round(e.value)},
          {"jittered", e.jittered}};
}

}  // namespace svlab
