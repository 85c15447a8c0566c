#include "svlab/train/pipeline.hpp"

#include <algorithm>
#include <fstream>

#include "svlab/error.hpp"
#include "svlab/models/model_io.hpp"

namespace svlab {

namespace {

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

nlohmann::json entry_json(const CorrelationEntry& e) {
  return {{"latent", e.latent}, {"overlay", e.overlay}, {"r", e.r ? nlohmann::json(*e.r) : nlohmann::json()}};
}

}  // namespace

void write_json_file(const std::filesystem::path& path, const nlohmann::json& j) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out << j.dump(2) << '\n';
    if (!out) throw IoError("write failed: " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

nlohmann::json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

nlohmann::json to_json(const CorrelationReport& r) {
  nlohmann::json table = nlohmann::json::array(), matches = nlohmann::json::array();
  for (const auto& e : r.table) table.push_back(entry_json(e));
  for (const auto& e : r.matches) matches.push_back(entry_json(e));
  return {{"table", table}, {"matches", matches}};
}

nlohmann::json to_json(const Evaluation& ev) {
  nlohmann::json per = nlohmann::json::array();
  for (std::size_t i = 0; i < ev.traces.size(); ++i) {
    nlohmann::json j = to_json(ev.correlations[i]);
    j["trajectory"] = ev.traces[i].trajectory_id;
    if (!ev.conservation.empty()) j["conservation"] = ev.conservation[i];
    per.push_back(j);
  }
  nlohmann::json j{{"trajectories", per}};
  j["cos2theta_max_abs_r"] = ev.cos2theta_r ? nlohmann::json(*ev.cos2theta_r) : nlohmann::json();
  if (!ev.conservation.empty()) {
    j["conservation_median"] = median(ev.conservation);
    j["conservation_max"] = *std::max_element(ev.conservation.begin(), ev.conservation.end());
  }
  return j;
}

Evaluation evaluate_inner(const InnerModel& model, const std::vector<bool>& mask, const Dataset& ds,
                          const OuterAE* outer) {
  Evaluation ev;
  std::vector<double> rs;
  std::vector<std::vector<double>> codes;
  for (std::size_t id : ds.validation.trajectory_ids) {
    ev.traces.push_back(make_trace(model, outer, ds, id, mask));
    ev.correlations.push_back(trace_correlations(ev.traces.back()));
    if (const auto r = ev.correlations.back().max_abs_r("cos2theta")) rs.push_back(*r);
    codes.push_back(ev.traces.back().codes);
  }
  if (!rs.empty()) ev.cos2theta_r = median(rs);
  if (model.head()) ev.conservation = hamiltonian_conservation_metric(*model.head(), codes);
  return ev;
}

void export_traces(const Evaluation& ev, std::size_t count, const std::filesystem::path& run_dir) {
  std::filesystem::create_directories(run_dir / "traces");
  std::filesystem::create_directories(run_dir / "plots");
  for (std::size_t i = 0; i < std::min(count, ev.traces.size()); ++i) {
    const std::string stem = std::to_string(ev.traces[i].trajectory_id);
    write_trace_csv(run_dir / "traces" / (stem + ".csv"), ev.traces[i]);
    write_trace_svg(run_dir / "plots" / (stem + ".svg"), ev.traces[i]);
  }
}

PipelineResult run_inner_pipeline(const TrainConfig& config, const Dataset& ds, const OuterAE* outer,
                                  const std::filesystem::path& run_dir) {
  config.validate();
  const LatentSet train = compute_outer_latents(outer, ds, SplitName::train);
  const LatentSet validation = compute_outer_latents(outer, ds, SplitName::validation);

  PipelineResult out{run_variant(config, config.variant, train, validation), {}, {}};
  const auto& inner = out.inner;
  if (!inner.report.diverged) out.evaluation = evaluate_inner(inner.model, inner.dof.mask, ds, outer);

  out.report = {{"train", to_json(inner.report)}, {"dof", to_json(inner.dof)}};
  if (!inner.report.diverged) out.report["evaluation"] = to_json(out.evaluation);
  out.report["beta"] = is_variational(config.variant) ? nlohmann::json(config.effective_beta()) : nlohmann::json();

  if (!run_dir.empty()) {
    std::filesystem::create_directories(run_dir / "checkpoints");
    write_json_file(run_dir / "config.json", config_to_json(config));
    save_inner(run_dir / "checkpoints" / "inner.bin", inner.model);
    if (!inner.report.diverged) export_traces(out.evaluation, config.trace_trajectories, run_dir);
    write_json_file(run_dir / "report.json", out.report);
  }
  return out;
}

}  // namespace svlab
