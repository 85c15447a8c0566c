#pragma once

#include <optional>
#include <string>
#include <vector>

#include "svlab/models/inner.hpp"

namespace svlab {

struct ActiveDims {
  std::size_t count = 0;
  std::vector<bool> mask;
};

/// Dimensions with variance >= threshold are active.
ActiveDims count_active_dims(const std::vector<double>& variances, double threshold);

/// Unbiased per-column variance of a row-major [n x d] matrix.
std::vector<double> column_variances(const std::vector<double>& rows, std::size_t d);

/// Pearson correlation; nullopt when either series has zero variance.
/// Throws ContractError for fewer than 3 samples or unequal lengths.
std::optional<double> pearson(const std::vector<double>& a, const std::vector<double>& b);

struct LatentSeries {
  std::string name;
  std::vector<double> values;
};

struct CorrelationEntry {
  std::string latent;
  std::string overlay;
  std::optional<double> r;
};

struct CorrelationReport {
  /// Every latent x overlay pair, latent-major.
  std::vector<CorrelationEntry> table;
  /// Greedy matching: repeatedly take the largest |r| among unmatched latents
  /// and overlays.
  std::vector<CorrelationEntry> matches;

  /// Largest |r| involving the named overlay, or nullopt if none defined.
  std::optional<double> max_abs_r(const std::string& overlay) const;
};

CorrelationReport correlation_report(const std::vector<LatentSeries>& latents, const std::vector<LatentSeries>& overlays);

/// Per trajectory std(H(z_t)) / (std of H over all trajectories + 1e-12).
/// Each trajectory is a row-major [T x latent] block of latent codes.
std::vector<double> hamiltonian_conservation_metric(const HnnHead& head,
                                                    const std::vector<std::vector<double>>& trajectories);

}  // namespace svlab
