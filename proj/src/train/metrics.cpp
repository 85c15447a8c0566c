#include "svlab/train/metrics.hpp"

#include <cmath>
#include <numeric>

#include "svlab/error.hpp"

namespace svlab {

namespace {

double mean_of(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / v.size(); }

double population_std(const std::vector<double>& v) {
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / v.size());
}

}  // namespace

ActiveDims count_active_dims(const std::vector<double>& variances, double threshold) {
  if (!(threshold > 0.0)) throw ContractError("variance threshold must be positive");
  ActiveDims out;
  out.mask.reserve(variances.size());
  for (double v : variances) {
    out.mask.push_back(v >= threshold);
    out.count += v >= threshold;
  }
  return out;
}

std::vector<double> column_variances(const std::vector<double>& rows, std::size_t d) {
  if (d == 0 || rows.size() % d != 0) throw DimensionError("column_variances: ragged matrix");
  const std::size_t n = rows.size() / d;
  if (n < 2) throw ContractError("column_variances needs at least 2 rows");
  std::vector<double> mean(d, 0.0), var(d, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) mean[j] += rows[i * d + j];
  for (auto& m : mean) m /= static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) {
      const double e = rows[i * d + j] - mean[j];
      var[j] += e * e;
    }
  for (auto& v : var) v /= static_cast<double>(n - 1);
  return var;
}

std::optional<double> pearson(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw ContractError("pearson: series lengths differ");
  if (a.size() < 3) throw ContractError("pearson needs at least 3 samples");
  const double ma = mean_of(a), mb = mean_of(b);
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  if (saa <= 0.0 || sbb <= 0.0) return std::nullopt;
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

std::optional<double> CorrelationReport::max_abs_r(const std::string& overlay) const {
  std::optional<double> best;
  for (const auto& e : table) {
    if (e.overlay == overlay && e.r && (!best || std::abs(*e.r) > *best)) best = std::abs(*e.r);
  }
  return best;
}

CorrelationReport correlation_report(const std::vector<LatentSeries>& latents, const std::vector<LatentSeries>& overlays) {
  CorrelationReport out;
  for (const auto& l : latents)
    for (const auto& o : overlays) out.table.push_back({l.name, o.name, pearson(l.values, o.values)});

  if (overlays.empty()) return out;
  std::vector<bool> used_l(latents.size(), false), used_o(overlays.size(), false);
  while (true) {
    std::size_t best = out.table.size();
    for (std::size_t i = 0; i < out.table.size(); ++i) {
      const auto& e = out.table[i];
      if (!e.r || used_l[i / overlays.size()] || used_o[i % overlays.size()]) continue;
      if (best == out.table.size() || std::abs(*e.r) > std::abs(*out.table[best].r)) best = i;
    }
    if (best == out.table.size()) break;
    used_l[best / overlays.size()] = true;
    used_o[best % overlays.size()] = true;
    out.matches.push_back(out.table[best]);
  }
  return out;
}

std::vector<double> hamiltonian_conservation_metric(const HnnHead& head,
                                                    const std::vector<std::vector<double>>& trajectories) {
  const std::size_t d = head.net().in_features();
  std::vector<std::vector<double>> energies;
  std::vector<double> all;
  for (const auto& traj : trajectories) {
    if (traj.empty() || traj.size() % d != 0) throw DimensionError("conservation metric: ragged latent block");
    const Tensor h = head.energy(Var(Tensor({traj.size() / d, d}, traj))).value();
    energies.emplace_back(h.values());
    all.insert(all.end(), h.values().begin(), h.values().end());
  }
  if (all.empty()) return {};
  const double spread = population_std(all) + 1e-12;
  std::vector<double> out;
  for (const auto& e : energies) out.push_back(population_std(e) / spread);
  return out;
}

}  // namespace svlab
