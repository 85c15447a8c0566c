#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

namespace svlab {

/// n points of dimension d, row-major.
struct PointCloud {
  std::size_t n = 0;
  std::size_t d = 0;
  std::vector<double> data;

  PointCloud() = default;
  PointCloud(std::size_t n_points, std::size_t dims, std::vector<double> values);

  const double* row(std::size_t i) const { return data.data() + i * d; }
};

/// Distances to the k nearest other points, ascending; equal distances are
/// ordered by point index.
std::vector<double> knn(const PointCloud& points, std::size_t query, std::size_t k);

/// knn for every point: result row i holds T_1..T_k of point i.
std::vector<std::vector<double>> knn_all(const PointCloud& points, std::size_t k, unsigned jobs = 1);

struct IdEstimate {
  double value = 0.0;
  std::size_t k1 = 0;
  std::size_t k2 = 0;
  std::vector<double> per_k;
  std::size_t n = 0;
  /// Points nudged apart because they coincided with a neighbour.
  std::size_t jittered = 0;
};

/// Levina-Bickel maximum-likelihood estimate: per point
/// m_k(x) = [ (1/(k-1)) sum_{j<k} ln(T_k / T_j) ]^-1, averaged over points,
/// then over k in [k1, k2]. Points whose nearest neighbour lies within
/// 1e-12 are displaced by 1e-9 times the bounding-box diagonal first.
IdEstimate mle_id(const PointCloud& points, std::size_t k1 = 10, std::size_t k2 = 20, unsigned jobs = 1);

/// 2 * round(id / 2), halves rounded away from zero; never below 2.
int dof_round(double id);

/// Uniform subsample of at most `max_points` rows without replacement.
PointCloud subsample(const PointCloud& points, std::size_t max_points, std::uint64_t seed);

/// Diagnostic table with header "k,id_k".
void write_id_csv(const std::filesystem::path& path, const IdEstimate& estimate);

}  // namespace svlab
