#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "json.hpp"
#include "svlab/dynsys/system.hpp"
#include "svlab/models/inner.hpp"
#include "svlab/render/dataset.hpp"

namespace svlab {

struct DataConfig {
  DatasetMode mode = DatasetMode::vectors;
  std::size_t trajectories = 1000;
  int frames = 100;
  /// Seconds between frames; 0 selects the system default.
  double dt_frame = 0.0;
  int substeps = 10;
  int shift = 2;
  std::uint64_t seed = 0;
  std::uint64_t embed_seed = 1;
  FrameGeometry geometry;
};

struct TrainConfig {
  SystemSpec system;
  DataConfig data;

  Variant variant = Variant::pi_vae;
  /// Reconstruction weight; unset means the per-system table value.
  std::optional<double> beta;
  std::size_t epochs = 1000;
  std::size_t batch_size = 256;
  double lr = 1e-3;
  std::uint64_t seed = 0;
  double threshold = 0.01;
  std::size_t latent = kVariationalLatent;
  std::size_t hidden = 32;
  std::size_t hnn_hidden = 64;
  bool hamilton_midpoint = false;

  std::size_t id_k1 = 10;
  std::size_t id_k2 = 20;
  std::size_t id_max_points = 10000;

  std::size_t outer_epochs = 200;
  std::size_t outer_batch_size = 64;
  double outer_lr = 1e-3;
  /// Early stop once validation recon stays below this for `outer_patience` epochs.
  double outer_early_stop = 1e-3;
  std::size_t outer_patience = 10;

  /// Number of trajectories exported as traces.
  std::size_t trace_trajectories = 3;

  unsigned jobs = 1;

  /// Throws ContractError naming the offending key.
  void validate() const;
  double effective_beta() const;
  double effective_dt_frame() const;
};

/// Reconstruction weight table for the variational variants. Throws
/// ContractError for deterministic variants.
double default_beta(SystemKind kind, Variant variant);

/// Sections "system", "data" (with "geometry"), "train" and "outer".
nlohmann::json config_to_json(const TrainConfig& config);
/// Missing keys keep defaults (system keys default per kind); unknown keys
/// throw ParseError naming the dotted key.
TrainConfig config_from_json(const nlohmann::json& j);

/// Sets one dotted key ("train.beta", "system.kind", "data.geometry.height")
/// from its textual value, re-validating the whole config.
void set_config_value(TrainConfig& config, const std::string& key, const std::string& value);

/// Every addressable dotted key with a one-line description.
std::vector<std::pair<std::string, std::string>> config_keys();

/// FNV-1a 64 of the canonical JSON dump, as 16 hex digits.
std::string config_hash(const TrainConfig& config);

/// Smaller data and epoch counts that keep vectors-mode discovery runs to a
/// few seconds each.
TrainConfig desk_config(SystemKind kind, Variant variant, std::uint64_t seed);

}  // namespace svlab
