#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "svlab/error.hpp"
#include "svlab/models/model_io.hpp"
#include "svlab/parallel.hpp"
#include "svlab/train/pipeline.hpp"

namespace fs = std::filesystem;
using namespace svlab;

namespace {

constexpr int kExitDiverged = 2;
constexpr int kExitContract = 3;

// Flag values as typed; applied after the config file, system.kind first.
struct Overrides {
  std::map<std::string, std::string> by_key;
  std::vector<std::string> sets;
};

struct Common {
  std::string config_file;
  std::string run;
  std::string dataset;
  std::string outer;
  Overrides overrides;
};

struct Alias {
  const char* flag;
  const char* key;
};

void add_config_flags(CLI::App* cmd, Common& c, std::initializer_list<Alias> aliases) {
  cmd->add_option("--config", c.config_file, "JSON config file (sections system, data, train, outer)")
      ->check(CLI::ExistingFile);
  cmd->add_option("--set", c.overrides.sets, "KEY=VALUE override of any config key; repeatable");
  for (const auto& a : aliases) {
    cmd->add_option_function<std::string>(
           std::string("--") + a.flag,
           [&c, key = std::string(a.key)](const std::string& v) { c.overrides.by_key[key] = v; },
           std::string("same as --") + a.key)
        ->group("Shortcuts");
  }
  for (const auto& [key, help] : config_keys()) {
    cmd->add_option_function<std::string>(
           "--" + key, [&c, key](const std::string& v) { c.overrides.by_key[key] = v; }, help)
        ->group("Config keys");
  }
  cmd->add_option("--jobs", c.overrides.by_key["train.jobs"], "worker threads across trajectories or seeds")
      ->default_str("1");
}

TrainConfig resolve_config(const Common& c, const fs::path& base = {}) {
  TrainConfig config;
  if (!base.empty()) config = config_from_json(read_json_file(base));
  if (!c.config_file.empty()) config = config_from_json(read_json_file(c.config_file));
  std::vector<std::pair<std::string, std::string>> pending;
  for (const auto& [k, v] : c.overrides.by_key) {
    if (k != "train.jobs") pending.emplace_back(k, v);
  }
  for (const auto& s : c.overrides.sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ParseError("--set expects KEY=VALUE, got '" + s + "'");
    pending.emplace_back(s.substr(0, eq), s.substr(eq + 1));
  }
  std::stable_partition(pending.begin(), pending.end(), [](const auto& kv) { return kv.first == "system.kind"; });
  for (const auto& [k, v] : pending) set_config_value(config, k, v);
  const auto jobs = c.overrides.by_key.find("train.jobs");
  if (jobs != c.overrides.by_key.end() && !jobs->second.empty()) {
    try {
      const int n = std::stoi(jobs->second);
      if (n < 1) throw ContractError("");
      config.jobs = static_cast<unsigned>(n);
    } catch (const std::exception&) {
      throw ParseError("--jobs must be a positive integer, got '" + jobs->second + "'");
    }
  }
  config.validate();
  return config;
}

fs::path run_root() {
  const char* env = std::getenv("SVLAB_RUN_DIR");
  return env != nullptr && *env != '\0' ? fs::path(env) : fs::path("runs");
}

fs::path run_dir(const Common& c, const std::string& fallback) {
  return run_root() / (c.run.empty() ? fallback : c.run);
}

std::string seed_tag(std::uint64_t seed) { return "s" + std::to_string(seed); }

// A loaded dataset overrides the data-describing config fields, so the run's
// config.json matches what was actually trained on.
Dataset obtain_dataset(const Common& c, TrainConfig& config) {
  if (c.dataset.empty()) return prepare_dataset(config);
  if (!fs::exists(fs::path(c.dataset) / "manifest.json")) {
    throw ContractError("--dataset " + c.dataset + " has no manifest.json");
  }
  Dataset ds = load_dataset(c.dataset);
  if (ds.spec) config.system = *ds.spec;
  config.data.mode = ds.mode;
  config.data.geometry = ds.geometry;
  config.data.shift = ds.shift;
  config.data.seed = ds.seed;
  config.data.embed_seed = ds.embed_seed;
  config.data.dt_frame = ds.dt_frame;
  config.data.trajectories = ds.train.n_trajectories() + ds.validation.n_trajectories() + ds.test.n_trajectories();
  config.data.frames = static_cast<int>(ds.train.n_frames);
  return ds;
}

std::optional<OuterAE> obtain_outer(const std::string& path, const Dataset& ds) {
  if (ds.mode == DatasetMode::vectors) return std::nullopt;
  if (path.empty()) throw ContractError("frames-mode data needs --outer <checkpoint> from train-outer");
  if (!fs::exists(path)) throw ContractError("outer checkpoint " + path + " does not exist");
  return load_outer(path);
}

void print_json(const nlohmann::json& j) { std::cout << j.dump(2) << '\n'; }

int cmd_simulate(const Common& c) {
  const TrainConfig config = resolve_config(c);
  const fs::path dir = run_dir(c, to_string(config.system.kind) + "-sim-" + seed_tag(config.data.seed));
  const auto trajs = simulate_many(config.system, config.data.trajectories, config.data.frames,
                                   config.effective_dt_frame(), config.data.substeps, config.data.seed, config.jobs);
  fs::create_directories(dir / "trajectories");
  for (const auto& e : fs::directory_iterator(dir / "trajectories")) {
    if (e.path().extension() == ".csv") fs::remove(e.path());
  }
  parallel_for(trajs.size(), config.jobs, [&](std::size_t i) {
    write_trajectory_csv(dir / "trajectories" / (std::to_string(i) + ".csv"), trajs[i]);
  });
  write_json_file(dir / "config.json", config_to_json(config));
  std::cout << "wrote " << trajs.size() << " trajectories to " << (dir / "trajectories").string() << '\n';
  return 0;
}

int cmd_dataset(const Common& c) {
  const TrainConfig config = resolve_config(c);
  const fs::path dir = run_dir(c, to_string(config.system.kind) + "-" + to_string(config.data.mode) + "-data-" +
                                      seed_tag(config.data.seed));
  const Dataset ds = prepare_dataset(config);
  fs::create_directories(dir);
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.path().extension() == ".bin") fs::remove(e.path());
  }
  write_dataset(dir, ds);
  write_json_file(dir / "config.json", config_to_json(config));
  std::cout << "dataset: " << ds.train.n_trajectories() << " train, " << ds.validation.n_trajectories()
            << " validation, " << ds.test.n_trajectories() << " test trajectories in " << dir.string() << '\n';
  return 0;
}

int cmd_train_outer(const Common& c) {
  TrainConfig config = resolve_config(c);
  const Dataset ds = obtain_dataset(c, config);
  const fs::path dir = run_dir(c, to_string(config.system.kind) + "-outer-" + seed_tag(config.seed));
  if (ds.mode != DatasetMode::frames) throw ContractError("train-outer needs frames-mode data (data.mode=frames)");
  const OuterResult res = train_outer(config, ds);
  fs::create_directories(dir / "checkpoints");
  write_json_file(dir / "config.json", config_to_json(config));
  save_outer(dir / "checkpoints" / "outer.bin", res.model);
  write_json_file(dir / "report.json", {{"train", to_json(res.report)}});
  std::cout << "outer validation recon " << res.report.final_val_recon << " -> "
            << (dir / "checkpoints" / "outer.bin").string() << '\n';
  if (res.report.diverged) {
    std::cerr << "error: training diverged: " << res.report.error << '\n';
    return kExitDiverged;
  }
  return 0;
}

PointCloud read_points_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ContractError("cannot read points file " + path.string());
  std::vector<double> values;
  std::size_t d = 0, n = 0;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    bool numeric = true;
    for (std::string cell; std::getline(ss, cell, ',');) {
      try {
        std::size_t used = 0;
        row.push_back(std::stod(cell, &used));
      } catch (const std::exception&) {
        numeric = false;
      }
    }
    if (!numeric) {
      if (n == 0 && values.empty()) continue;  // header
      throw ParseError(path.string() + ": non-numeric row " + std::to_string(n + 1));
    }
    if (d == 0) d = row.size();
    if (row.size() != d) throw ParseError(path.string() + ": ragged row " + std::to_string(n + 1));
    values.insert(values.end(), row.begin(), row.end());
    ++n;
  }
  return PointCloud(n, d, std::move(values));
}

int cmd_estimate_id(const Common& c, const std::string& points) {
  TrainConfig config = resolve_config(c);
  IdEstimate id;
  if (!points.empty()) {
    id = mle_id(read_points_csv(points), config.id_k1, config.id_k2, config.jobs);
  } else {
    const Dataset ds = obtain_dataset(c, config);
    const auto outer = obtain_outer(c.outer, ds);
    id = estimate_latent_id(config, compute_outer_latents(outer ? &*outer : nullptr, ds, SplitName::train));
  }
  const fs::path dir = run_dir(c, (points.empty() ? to_string(config.system.kind) : fs::path(points).stem().string()) +
                                      "-id-" + seed_tag(config.seed));
  fs::create_directories(dir);
  auto j = to_json(id);
  write_json_file(dir / "id.json", j);
  write_id_csv(dir / "id.csv", id);
  write_json_file(dir / "config.json", config_to_json(config));
  print_json(j);
  return 0;
}

int cmd_train_inner(const Common& c, std::size_t seeds) {
  TrainConfig config = resolve_config(c);
  const Dataset ds = obtain_dataset(c, config);
  const fs::path dir =
      run_dir(c, to_string(config.system.kind) + "-" + to_string(config.variant) + "-" + seed_tag(config.seed));
  const auto outer = obtain_outer(c.outer, ds);
  const OuterAE* outer_ptr = outer ? &*outer : nullptr;
  if (outer) {
    fs::create_directories(dir / "checkpoints");
    save_outer(dir / "checkpoints" / "outer.bin", *outer);
  }

  if (seeds <= 1) {
    const auto res = run_inner_pipeline(config, ds, outer_ptr, dir);
    print_json(res.report.at("dof"));
    if (res.inner.report.diverged) {
      std::cerr << "error: training diverged: " << res.inner.report.error << '\n';
      return kExitDiverged;
    }
    return 0;
  }

  // Seed sweep: one job per seed, each single-threaded, then a serial merge.
  std::vector<nlohmann::json> reports(seeds);
  TrainConfig job_config = config;
  job_config.jobs = 1;
  parallel_for(seeds, config.jobs, [&](std::size_t i) {
    TrainConfig cfg = job_config;
    cfg.seed = config.seed + i;
    reports[i] = run_inner_pipeline(cfg, ds, outer_ptr, dir / ("seed-" + std::to_string(cfg.seed))).report;
  });
  nlohmann::json runs = nlohmann::json::array();
  std::size_t passed = 0;
  bool diverged = false;
  for (std::size_t i = 0; i < seeds; ++i) {
    const auto& dof = reports[i].at("dof");
    passed += dof.at("dof_pass").get<bool>();
    diverged = diverged || reports[i].at("train").at("diverged").get<bool>();
    runs.push_back({{"seed", config.seed + i},
                    {"active_count", dof.at("active_count")},
                    {"latent_width", dof.at("latent_width")},
                    {"dof_pass", dof.at("dof_pass")},
                    {"val_recon", dof.at("val_recon")}});
  }
  const nlohmann::json summary = {{"system", to_string(config.system.kind)},
                                  {"variant", to_string(config.variant)},
                                  {"runs", runs},
                                  {"dof_pass_count", passed}};
  write_json_file(dir / "summary.json", summary);
  print_json(summary);
  if (diverged) {
    std::cerr << "error: at least one seed diverged\n";
    return kExitDiverged;
  }
  return 0;
}

fs::path existing_run(const Common& c) {
  if (c.run.empty()) throw ContractError("--run <name> is required");
  const fs::path dir = run_root() / c.run;
  if (!fs::exists(dir / "config.json")) throw ContractError("run directory " + dir.string() + " has no config.json");
  return dir;
}

int cmd_eval(const Common& c) {
  const fs::path dir = existing_run(c);
  TrainConfig config = resolve_config(c, dir / "config.json");
  const fs::path ckpt = dir / "checkpoints" / "inner.bin";
  if (!fs::exists(ckpt)) throw ContractError("run has no checkpoints/inner.bin; run train-inner first");
  const InnerModel model = load_inner(ckpt);
  const Dataset ds = obtain_dataset(c, config);
  const fs::path run_outer = dir / "checkpoints" / "outer.bin";
  const auto outer = obtain_outer(!c.outer.empty() ? c.outer : (fs::exists(run_outer) ? run_outer.string() : ""), ds);

  std::vector<bool> mask;
  if (fs::exists(dir / "report.json")) {
    const auto report = read_json_file(dir / "report.json");
    if (report.contains("dof")) mask = report.at("dof").at("mask").get<std::vector<bool>>();
  }
  if (mask.size() != model.config().latent) {
    const LatentSet val = compute_outer_latents(outer ? &*outer : nullptr, ds, SplitName::validation);
    mask = count_active_dims(column_variances(posterior_means(model, val.rows, val.dim), model.config().latent),
                             config.threshold)
               .mask;
  }
  const Evaluation ev = evaluate_inner(model, mask, ds, outer ? &*outer : nullptr);
  export_traces(ev, config.trace_trajectories, dir);
  const auto j = to_json(ev);
  write_json_file(dir / "evaluation.json", j);
  nlohmann::json brief = {{"cos2theta_max_abs_r", j.at("cos2theta_max_abs_r")}};
  if (j.contains("conservation_median")) brief["conservation_median"] = j.at("conservation_median");
  print_json(brief);
  return 0;
}

int cmd_plot(const Common& c) {
  const fs::path dir = existing_run(c);
  if (!fs::exists(dir / "traces")) throw ContractError("run has no traces/; run train-inner or eval first");
  fs::create_directories(dir / "plots");
  std::size_t n = 0;
  for (const auto& e : fs::directory_iterator(dir / "traces")) {
    if (e.path().extension() != ".csv") continue;
    write_trace_svg(dir / "plots" / (e.path().stem().string() + ".svg"), read_trace_csv(e.path()));
    ++n;
  }
  std::cout << "wrote " << n << " plots to " << (dir / "plots").string() << '\n';
  return 0;
}

std::string keys_footer() {
  std::ostringstream out;
  out << "\nOutput goes to $SVLAB_RUN_DIR/<run> (default root ./runs).\n"
      << "Exit codes: 0 success, 2 training diverged, 3 invalid config or inputs.\n";
  return out.str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Discover degrees of freedom and state variables of simulated dynamical systems"};
  app.require_subcommand(1);
  app.footer(keys_footer());

  Common simulate, dataset, outer, idest, inner, eval, plot;
  std::string points;
  std::size_t seeds = 1;

  auto* c_sim = app.add_subcommand("simulate", "simulate trajectories and write one CSV each");
  add_config_flags(c_sim, simulate,
                   {{"system", "system.kind"}, {"trajectories", "data.trajectories"}, {"frames", "data.frames"},
                    {"seed", "data.seed"}});
  c_sim->add_option("--run", simulate.run, "run name under the output root");

  auto* c_data = app.add_subcommand("dataset", "render or embed trajectories into a sharded dataset");
  add_config_flags(c_data, dataset,
                   {{"system", "system.kind"}, {"mode", "data.mode"}, {"trajectories", "data.trajectories"},
                    {"frames", "data.frames"}, {"seed", "data.seed"}});
  c_data->add_option("--run", dataset.run, "run name under the output root");

  auto* c_outer = app.add_subcommand("train-outer", "train the convolutional outer autoencoder");
  add_config_flags(c_outer, outer,
                   {{"system", "system.kind"}, {"trajectories", "data.trajectories"}, {"epochs", "outer.epochs"},
                    {"seed", "train.seed"}});
  c_outer->add_option("--run", outer.run, "run name under the output root");
  c_outer->add_option("--dataset", outer.dataset, "dataset directory (default: generate from config)");

  auto* c_id = app.add_subcommand("estimate-id", "intrinsic dimension of outer latents or of a point CSV");
  add_config_flags(c_id, idest, {{"system", "system.kind"}, {"mode", "data.mode"}, {"seed", "train.seed"}});
  c_id->add_option("--run", idest.run, "run name under the output root");
  c_id->add_option("--dataset", idest.dataset, "dataset directory (default: generate from config)");
  c_id->add_option("--outer", idest.outer, "outer checkpoint (frames mode)");
  c_id->add_option("--points", points, "CSV of points, one per row, instead of a dataset")->check(CLI::ExistingFile);

  auto* c_inner = app.add_subcommand("train-inner", "train an inner model and count active dimensions");
  add_config_flags(c_inner, inner,
                   {{"system", "system.kind"}, {"variant", "train.variant"}, {"mode", "data.mode"},
                    {"beta", "train.beta"}, {"epochs", "train.epochs"}, {"trajectories", "data.trajectories"},
                    {"seed", "train.seed"}});
  c_inner->add_option("--run", inner.run, "run name under the output root");
  c_inner->add_option("--dataset", inner.dataset, "dataset directory (default: generate from config)");
  c_inner->add_option("--outer", inner.outer, "outer checkpoint (frames mode)");
  c_inner->add_option("--seeds", seeds, "train seeds train.seed .. train.seed+N-1 into seed-<s>/ subdirectories")
      ->check(CLI::PositiveNumber);

  auto* c_eval = app.add_subcommand("eval", "correlation and conservation metrics of a trained run");
  add_config_flags(c_eval, eval, {});
  c_eval->add_option("--run", eval.run, "existing run name")->required();
  c_eval->add_option("--dataset", eval.dataset, "dataset directory (default: regenerate from the run config)");
  c_eval->add_option("--outer", eval.outer, "outer checkpoint (default: the run's own)");

  auto* c_plot = app.add_subcommand("plot", "redraw SVG plots from a run's trace CSVs");
  c_plot->add_option("--run", plot.run, "existing run name")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitContract;
  }

  try {
    if (*c_sim) return cmd_simulate(simulate);
    if (*c_data) return cmd_dataset(dataset);
    if (*c_outer) return cmd_train_outer(outer);
    if (*c_id) return cmd_estimate_id(idest, points);
    if (*c_inner) return cmd_train_inner(inner, seeds);
    if (*c_eval) return cmd_eval(eval);
    if (*c_plot) return cmd_plot(plot);
  } catch (const NumericalError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitDiverged;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitContract;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitContract;
  }
  return 0;
}
