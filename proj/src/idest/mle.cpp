#include "svlab/idest/mle.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>

#include "svlab/error.hpp"
#include "svlab/numcore/rng.hpp"
#include "svlab/parallel.hpp"

namespace svlab {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

constexpr std::size_t kBlock = 256;

double exact_distance(const PointCloud& p, std::size_t a, std::size_t b) {
  const double* x = p.row(a);
  const double* y = p.row(b);
  double s = 0.0;
  for (std::size_t i = 0; i < p.d; ++i) s += (x[i] - y[i]) * (x[i] - y[i]);
  return std::sqrt(s);
}

// Candidates come from the Gram-matrix expansion; their distances are then
// recomputed exactly. A few spare candidates absorb rounding in the ranking.
void knn_block(const PointCloud& p, const Eigen::Map<const RowMatrix>& x, const Eigen::VectorXd& sq, std::size_t begin,
               std::size_t end, std::size_t k, std::vector<std::vector<double>>& out) {
  const std::size_t rows = end - begin;
  const RowMatrix gram = x.middleRows(static_cast<Eigen::Index>(begin), static_cast<Eigen::Index>(rows)) * x.transpose();
  const std::size_t spare = std::min(p.n - 1, k + 8);
  std::vector<std::size_t> idx(p.n);
  std::vector<double> approx(p.n);
  for (std::size_t r = 0; r < rows; ++r) {
    const std::size_t q = begin + r;
    for (std::size_t j = 0; j < p.n; ++j) approx[j] = sq[q] + sq[j] - 2.0 * gram(r, j);
    approx[q] = -std::numeric_limits<double>::infinity();
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    auto by_approx = [&](std::size_t a, std::size_t b) { return approx[a] < approx[b] || (approx[a] == approx[b] && a < b); };
    std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(spare + 1), idx.end(), by_approx);
    std::vector<std::pair<double, std::size_t>> cand;
    for (std::size_t c = 1; c <= spare; ++c) cand.emplace_back(exact_distance(p, q, idx[c]), idx[c]);
    std::sort(cand.begin(), cand.end());
    out[q].resize(k);
    for (std::size_t c = 0; c < k; ++c) out[q][c] = cand[c].first;
  }
}

double bbox_diagonal(const PointCloud& p) {
  double s = 0.0;
  for (std::size_t c = 0; c < p.d; ++c) {
    double lo = p.data[c], hi = p.data[c];
    for (std::size_t i = 1; i < p.n; ++i) {
      lo = std::min(lo, p.data[i * p.d + c]);
      hi = std::max(hi, p.data[i * p.d + c]);
    }
    s += (hi - lo) * (hi - lo);
  }
  return std::sqrt(s);
}

}  // namespace

PointCloud::PointCloud(std::size_t n_points, std::size_t dims, std::vector<double> values)
    : n(n_points), d(dims), data(std::move(values)) {
  if (n * d != data.size()) throw ContractError("point cloud data does not match n x d");
  if (d == 0) throw ContractError("point cloud needs d >= 1");
}

std::vector<double> knn(const PointCloud& points, std::size_t query, std::size_t k) {
  if (k >= points.n) throw ContractError("knn needs k < n (k=" + std::to_string(k) + ", n=" + std::to_string(points.n) + ")");
  if (query >= points.n) throw ContractError("knn query index out of range");
  std::vector<std::pair<double, std::size_t>> all;
  all.reserve(points.n - 1);
  for (std::size_t j = 0; j < points.n; ++j) {
    if (j != query) all.emplace_back(exact_distance(points, query, j), j);
  }
  std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(k), all.end());
  std::vector<double> out(k);
  for (std::size_t c = 0; c < k; ++c) out[c] = all[c].first;
  return out;
}

std::vector<std::vector<double>> knn_all(const PointCloud& points, std::size_t k, unsigned jobs) {
  if (k >= points.n) throw ContractError("knn needs k < n (k=" + std::to_string(k) + ", n=" + std::to_string(points.n) + ")");
  // Centring keeps the Gram expansion well conditioned for offset clouds.
  RowMatrix centred = Eigen::Map<const RowMatrix>(points.data.data(), static_cast<Eigen::Index>(points.n),
                                                  static_cast<Eigen::Index>(points.d));
  centred.rowwise() -= centred.colwise().mean();
  const Eigen::Map<const RowMatrix> x(centred.data(), centred.rows(), centred.cols());
  const Eigen::VectorXd sq = x.rowwise().squaredNorm();
  std::vector<std::vector<double>> out(points.n);
  const std::size_t blocks = (points.n + kBlock - 1) / kBlock;
  parallel_for(blocks, jobs, [&](std::size_t b) {
    knn_block(points, x, sq, b * kBlock, std::min(points.n, (b + 1) * kBlock), k, out);
  });
  return out;
}

IdEstimate mle_id(const PointCloud& points, std::size_t k1, std::size_t k2, unsigned jobs) {
  if (k1 < 2 || k1 > k2) throw ContractError("mle_id needs 2 <= k1 <= k2");
  if (k2 >= points.n) {
    throw ContractError("mle_id needs n > k2 (n=" + std::to_string(points.n) + ", k2=" + std::to_string(k2) + ")");
  }
  IdEstimate est;
  est.k1 = k1;
  est.k2 = k2;
  est.n = points.n;

  PointCloud cloud = points;
  auto dist = knn_all(cloud, k2, jobs);
  std::vector<std::size_t> coincident;
  for (std::size_t i = 0; i < cloud.n; ++i) {
    if (dist[i][0] <= 1e-12) coincident.push_back(i);
  }
  if (!coincident.empty()) {
    const double scale = 1e-9 * std::max(bbox_diagonal(cloud), 1e-300);
    const Rng root(0x5eed);
    for (std::size_t i : coincident) {
      Rng rng = root.split(i);
      for (std::size_t c = 0; c < cloud.d; ++c) cloud.data[i * cloud.d + c] += scale * rng.uniform(-1.0, 1.0);
    }
    est.jittered = coincident.size();
    dist = knn_all(cloud, k2, jobs);
  }

  std::vector<std::vector<double>> logs(cloud.n, std::vector<double>(k2));
  for (std::size_t i = 0; i < cloud.n; ++i) {
    for (std::size_t j = 0; j < k2; ++j) {
      if (!(dist[i][j] > 0.0)) throw NumericalError("zero neighbour distance at point " + std::to_string(i) + " after jitter");
      logs[i][j] = std::log(dist[i][j]);
    }
  }
  for (std::size_t k = k1; k <= k2; ++k) {
    double total = 0.0;
    for (std::size_t i = 0; i < cloud.n; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j + 1 < k; ++j) s += logs[i][k - 1] - logs[i][j];
      if (!(s > 0.0)) {
        throw NumericalError("degenerate neighbourhood at point " + std::to_string(i) + " (T_1..T_" + std::to_string(k) +
                             " all equal)");
      }
      total += static_cast<double>(k - 1) / s;
    }
    est.per_k.push_back(total / static_cast<double>(cloud.n));
  }
  est.value = std::accumulate(est.per_k.begin(), est.per_k.end(), 0.0) / static_cast<double>(est.per_k.size());
  return est;
}

int dof_round(double id) {
  if (!(id > 0.0)) throw ContractError("dof_round needs id > 0");
  return std::max(2, 2 * static_cast<int>(std::round(id / 2.0)));
}

PointCloud subsample(const PointCloud& points, std::size_t max_points, std::uint64_t seed) {
  if (points.n <= max_points) return points;
  std::vector<std::size_t> perm(points.n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  Rng rng(seed);
  for (std::size_t i = 0; i < max_points; ++i) std::swap(perm[i], perm[i + rng.below(points.n - i)]);
  perm.resize(max_points);
  std::sort(perm.begin(), perm.end());
  std::vector<double> data;
  data.reserve(max_points * points.d);
  for (std::size_t i : perm) data.insert(data.end(), points.row(i), points.row(i) + points.d);
  return PointCloud(max_points, points.d, std::move(data));
}

void write_id_csv(const std::filesystem::path& path, const IdEstimate& est) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream f(path);
  if (!f) throw IoError("cannot open " + path.string() + " for writing");
  f << "k,id_k\n" << std::setprecision(17);
  for (std::size_t i = 0; i < est.per_k.size(); ++i) f << est.k1 + i << ',' << est.per_k[i] << '\n';
  if (!f) throw IoError("write failed for " + path.string());
}

}  // namespace svlab
