#pragma once

#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "svlab/idest/mle.hpp"
#include "svlab/models/inner.hpp"
#include "svlab/models/outer.hpp"
#include "svlab/render/dataset.hpp"
#include "svlab/train/config.hpp"

namespace svlab {

struct EpochLoss {
  double total = 0.0;
  double recon = 0.0;
  double kl = 0.0;
  double second_order = 0.0;
  double hamilton = 0.0;
  double val_recon = 0.0;
};

struct TrainReport {
  std::vector<EpochLoss> history;
  double final_val_recon = 0.0;
  double wall_seconds = 0.0;
  std::uint64_t seed = 0;
  std::string config_hash;
  bool early_stopped = false;
  /// Set when a loss or gradient became non-finite; history stops there.
  bool diverged = false;
  std::string error;
};

struct DofReport {
  std::string system;
  Variant variant = Variant::pi_vae;
  std::size_t latent_width = 0;
  /// Variance of each posterior-mean coordinate over the validation split.
  std::vector<double> variances;
  std::vector<bool> mask;
  std::size_t active_count = 0;
  std::optional<double> raw_id;
  std::optional<int> rounded_id;
  int ground_truth = 0;
  /// Active count (variational), latent width (pi-ae) or rounded ID
  /// (baseline) equals the ground truth.
  bool dof_pass = false;
  double val_recon = 0.0;
  bool recon_pass = false;
};

/// Outer latents (or embeddings in vectors mode) of one split, ordered by
/// (trajectory, window start).
struct LatentSet {
  std::size_t dim = 0;
  std::vector<double> rows;
  std::vector<std::size_t> traj;  // position within the split
  std::vector<std::size_t> t;

  std::size_t size() const { return traj.size(); }
  const double* row(std::size_t i) const { return rows.data() + i * dim; }
  PointCloud cloud() const { return PointCloud(size(), dim, rows); }
  /// Samples whose successor (same trajectory, t + 1) is the next row.
  std::vector<std::size_t> pair_starts() const;
};

/// Simulates config.data.trajectories trajectories and renders or embeds them.
Dataset prepare_dataset(const TrainConfig& config);

struct OuterResult {
  OuterAE model;
  TrainReport report;
};

/// Adam on the reconstruction of target stacks from input stacks.
OuterResult train_outer(const TrainConfig& config, const Dataset& dataset);

/// 64-d code for every window of the split. `outer` may be null in vectors
/// mode, where the stored embedding of frame t is passed through.
LatentSet compute_outer_latents(const OuterAE* outer, const Dataset& dataset, SplitName split);

/// mle_id on at most config.id_max_points training latents.
IdEstimate estimate_latent_id(const TrainConfig& config, const LatentSet& latents);

struct InnerResult {
  InnerModel model;
  TrainReport report;
  DofReport dof;
};

/// Trains one inner model of the given configuration. Second-order variants
/// draw batches of consecutive-sample pairs.
InnerResult train_inner(const TrainConfig& config, const InnerConfig& inner, const LatentSet& train,
                        const LatentSet& validation);

/// ID on the training latents, then a baseline inner AE of width dof_round(ID).
InnerResult run_baseline(const TrainConfig& config, const LatentSet& train, const LatentSet& validation);

/// pi-ae (width dof_round(ID), estimated here when `id` is empty), pi-vae or hpi-vae.
InnerResult run_variant(const TrainConfig& config, Variant variant, const LatentSet& train,
                        const LatentSet& validation, std::optional<IdEstimate> id = std::nullopt);

/// Posterior means (codes for deterministic variants), row-major [n x latent].
std::vector<double> posterior_means(const InnerModel& model, const std::vector<double>& rows, std::size_t dim);

nlohmann::json to_json(const TrainReport& report);
nlohmann::json to_json(const DofReport& report);
nlohmann::json to_json(const IdEstimate& estimate);

}  // namespace svlab
