#pragma once

#include <filesystem>
#include <optional>
#include <vector>

#include "json.hpp"
#include "svlab/train/traces.hpp"
#include "svlab/train/train.hpp"

namespace svlab {

struct Evaluation {
  /// One trace per validation trajectory.
  std::vector<LatentTrace> traces;
  std::vector<CorrelationReport> correlations;
  /// Median over validation trajectories of the largest |r| between an
  /// exported latent and cos2theta; unset for systems without that overlay.
  std::optional<double> cos2theta_r;
  /// Hamiltonian-head models only: per validation trajectory.
  std::vector<double> conservation;
};

/// Traces, correlations and (for hpi-vae) the conservation metric over the
/// validation split.
Evaluation evaluate_inner(const InnerModel& model, const std::vector<bool>& mask, const Dataset& dataset,
                          const OuterAE* outer);

/// Writes traces/<id>.csv and plots/<id>.svg for the first `count` traces.
void export_traces(const Evaluation& evaluation, std::size_t count, const std::filesystem::path& run_dir);

struct PipelineResult {
  InnerResult inner;
  Evaluation evaluation;
  nlohmann::json report;
};

/// Trains config.variant on the dataset's outer latents and fills the run
/// directory: config.json, report.json, traces/, plots/, checkpoints/.
/// An empty run_dir skips all output.
PipelineResult run_inner_pipeline(const TrainConfig& config, const Dataset& dataset, const OuterAE* outer,
                                  const std::filesystem::path& run_dir);

nlohmann::json to_json(const CorrelationReport& report);
nlohmann::json to_json(const Evaluation& evaluation);

/// Writes through a temporary file and a rename.
void write_json_file(const std::filesystem::path& path, const nlohmann::json& j);
nlohmann::json read_json_file(const std::filesystem::path& path);

}  // namespace svlab
