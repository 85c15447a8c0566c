#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "svlab/models/inner.hpp"
#include "svlab/models/outer.hpp"
#include "svlab/render/dataset.hpp"
#include "svlab/train/metrics.hpp"

namespace svlab {

/// Posterior-mean traces of one trajectory with ground-truth overlays.
/// Vectors mode has one row per frame, frames mode one per window.
struct LatentTrace {
  std::size_t trajectory_id = 0;
  std::vector<double> time;
  /// Exported latent indices (the active mask, or all when none is active).
  std::vector<std::size_t> dims;
  std::vector<std::vector<double>> raw;
  /// raw mapped affinely onto [-1, 1]; constant series map to 0.
  std::vector<std::vector<double>> scaled;
  /// (min, max) of each raw series: raw = min + (scaled + 1) / 2 * (max - min).
  std::vector<std::pair<double, double>> range;
  std::vector<std::string> overlay_names;
  std::vector<std::vector<double>> overlays;
  /// Full posterior means, row-major [rows x latent].
  std::vector<double> codes;

  std::size_t rows() const { return time.size(); }
};

/// Aux observables used as overlays: everything except raw angles.
std::vector<std::string> overlay_names(const std::vector<std::string>& aux_names);

/// Throws ContractError if the trajectory id is in no split.
LatentTrace make_trace(const InnerModel& model, const OuterAE* outer, const Dataset& dataset,
                       std::size_t trajectory_id, const std::vector<bool>& mask);

/// Columns t, z<i> (scaled) for each exported dim, then raw overlays.
void write_trace_csv(const std::filesystem::path& path, const LatentTrace& trace);
/// Inverse of write_trace_csv as far as the file allows: raw holds the
/// scaled columns and range is (-1, 1). Codes stay empty.
LatentTrace read_trace_csv(const std::filesystem::path& path);
/// Line plot of the scaled latents with min-max scaled overlays dashed.
void write_trace_svg(const std::filesystem::path& path, const LatentTrace& trace);

CorrelationReport trace_correlations(const LatentTrace& trace);

}  // namespace svlab
