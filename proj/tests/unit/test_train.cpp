#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>

#include "doctest.h"
#include "support/oscillator.hpp"
#include "svlab/error.hpp"
#include "svlab/train/config.hpp"
#include "svlab/train/metrics.hpp"
#include "svlab/train/pipeline.hpp"

using namespace svlab;
using svlab::testing::fit_oscillator_head;
using svlab::testing::oscillator_state;

namespace {

std::filesystem::path temp_dir(const char* name) {
  auto dir = std::filesystem::temp_directory_path() / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

TrainConfig tiny_config(Variant variant) {
  TrainConfig c = desk_config(SystemKind::single_pendulum, variant, 3);
  c.data.trajectories = 20;
  c.data.frames = 30;
  c.epochs = 3;
  c.batch_size = 64;
  return c;
}

std::size_t count_lines(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::size_t n = 0;
  for (std::string line; std::getline(in, line);) ++n;
  return n;
}

}  // namespace

TEST_CASE("count_active_dims") {
  CHECK(count_active_dims({0.8, 0.5, 0.009, 1e-4}, 0.01).count == 2);
  CHECK(count_active_dims({0.0, 0.0, 0.0}, 0.01).count == 0);
  CHECK(count_active_dims({0.01}, 0.01).count == 1);
  const auto a = count_active_dims({0.8, 0.5, 0.009, 1e-4}, 0.01);
  CHECK(a.mask == std::vector<bool>{true, true, false, false});
  CHECK(count_active_dims({1e-4, 0.009, 0.8, 0.5}, 0.01).count == a.count);
  CHECK_THROWS_AS(count_active_dims({1.0}, 0.0), ContractError);
}

TEST_CASE("column variances") {
  const auto v = column_variances({1, 5, 2, 5, 3, 5}, 2);
  CHECK(v[0] == doctest::Approx(1.0));
  CHECK(v[1] == 0.0);
  CHECK_THROWS_AS(column_variances({1, 2, 3}, 2), DimensionError);
}

TEST_CASE("pearson") {
  Rng rng(1);
  std::vector<double> a(50), neg(50);
  for (std::size_t i = 0; i < a.size(); ++i) {
    a[i] = rng.normal();
    neg[i] = -a[i];
  }
  CHECK(*pearson(a, a) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(*pearson(a, neg) == doctest::Approx(-1.0).epsilon(1e-12));
  CHECK_FALSE(pearson(a, std::vector<double>(50, 2.0)).has_value());
  CHECK_THROWS_AS(pearson({1, 2}, {1, 2}), ContractError);
  CHECK_THROWS_AS(pearson({1, 2, 3}, {1, 2}), ContractError);

  int small = 0;
  const int trials = 1000;
  for (int t = 0; t < trials; ++t) {
    std::vector<double> x(1000), y(1000);
    for (auto& v : x) v = rng.normal();
    for (auto& v : y) v = rng.normal();
    small += std::abs(*pearson(x, y)) < 0.1;
  }
  CHECK(small >= 0.99 * trials);
}

TEST_CASE("correlation report matches greedily") {
  const std::vector<double> t = {0, 1, 2, 3, 4, 5};
  std::vector<double> sq, lin, flat(6, 1.0);
  for (double v : t) {
    sq.push_back(v * v);
    lin.push_back(-2.0 * v);
  }
  const auto rep = correlation_report({{"z0", sq}, {"z1", lin}, {"z2", flat}}, {{"x1", t}, {"x2", sq}});
  CHECK(rep.table.size() == 6);
  CHECK_FALSE(rep.table[4].r.has_value());
  REQUIRE(rep.matches.size() == 2);
  // z0 = x2 and z1 = -2 x1 exactly; both perfect, first in table order wins ties.
  CHECK(rep.matches[0].latent == "z0");
  CHECK(rep.matches[0].overlay == "x2");
  CHECK(rep.matches[1].latent == "z1");
  CHECK(*rep.matches[1].r == doctest::Approx(-1.0));
  CHECK(*rep.max_abs_r("x1") == doctest::Approx(1.0));
  CHECK_FALSE(rep.max_abs_r("missing").has_value());
}

TEST_CASE("hamiltonian conservation metric") {
  Rng rng(2);
  HnnHead head(2, 8, rng);
  CHECK(hamiltonian_conservation_metric(head, {{0.3, 0.1, 0.3, 0.1}, {0.5, 0.5, 0.5, 0.5}})[0] == 0.0);

  // Fitted oscillator head on exact orbits of different energy.
  const HnnHead fitted = fit_oscillator_head(rng);
  std::vector<std::vector<double>> trajs;
  const std::vector<double> amps = {0.3, 0.55, 0.8, 1.0};
  for (double a : amps) {
    std::vector<double> z;
    for (int k = 0; k < 100; ++k) {
      double q, p;
      oscillator_state(a, 0.4, 0.1 * k, q, p);
      z.push_back(q);
      z.push_back(p);
    }
    trajs.push_back(z);
  }
  const auto metric = hamiltonian_conservation_metric(fitted, trajs);
  for (double m : metric) CHECK(m < 0.2);

  // Mean H separates neighbouring orbits by more than their spread.
  std::vector<double> means, stds;
  for (const auto& z : trajs) {
    const Tensor h = fitted.energy(Var(Tensor({z.size() / 2, 2}, z))).value();
    double m = 0.0, s = 0.0;
    for (double v : h.values()) m += v;
    m /= h.numel();
    for (double v : h.values()) s += (v - m) * (v - m);
    means.push_back(m);
    stds.push_back(std::sqrt(s / h.numel()));
  }
  for (std::size_t i = 0; i + 1 < means.size(); ++i) {
    CHECK(means[i + 1] - means[i] > std::max(stds[i], stds[i + 1]));
  }
}

TEST_CASE("train config") {
  TrainConfig c;
  c.system = SystemSpec::double_pendulum();
  c.variant = Variant::pi_vae;
  CHECK(c.effective_beta() == 30.0);
  CHECK(default_beta(SystemKind::single_pendulum, Variant::pi_vae) == 17.0);
  CHECK(default_beta(SystemKind::single_pendulum, Variant::hpi_vae) == 20.0);
  CHECK(default_beta(SystemKind::elastic_pendulum, Variant::hpi_vae) == 80.0);
  CHECK(default_beta(SystemKind::reaction_diffusion, Variant::pi_vae) == 7.0);
  CHECK_THROWS_AS(default_beta(SystemKind::single_pendulum, Variant::pi_ae), ContractError);

  const auto j = config_to_json(c);
  const TrainConfig back = config_from_json(j);
  CHECK(config_to_json(back) == j);
  CHECK(config_hash(back) == config_hash(c));

  nlohmann::json bad = j;
  bad["train"]["betta"] = 3;
  try {
    config_from_json(bad);
    FAIL("accepted an unknown key");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find("train.betta") != std::string::npos);
  }
  bad = j;
  bad["train"]["epochs"] = "many";
  CHECK_THROWS_AS(config_from_json(bad), ParseError);

  TrainConfig s;
  set_config_value(s, "train.beta", "12.5");
  CHECK(s.effective_beta() == 12.5);
  set_config_value(s, "train.beta", "null");
  CHECK_FALSE(s.beta.has_value());
  set_config_value(s, "data.geometry.height", "64");
  CHECK(s.data.geometry.height == 64);
  set_config_value(s, "system.m1", "2");
  set_config_value(s, "system.kind", "elastic-pendulum");
  CHECK(s.system.m1 == SystemSpec::elastic_pendulum().m1);
  CHECK_THROWS_AS(set_config_value(s, "train.nope", "1"), ParseError);
  CHECK_THROWS_AS(set_config_value(s, "train.epochs", "-3"), ParseError);
  CHECK_THROWS_AS(set_config_value(s, "train.epochs", "0"), ContractError);
  CHECK_THROWS_AS(set_config_value(s, "train", "1"), ParseError);

  // Every documented key round-trips through set_config_value.
  for (const auto& [key, help] : config_keys()) {
    TrainConfig t;
    nlohmann::json cur = config_to_json(t);
    std::size_t start = 0;
    nlohmann::json* slot = &cur;
    while (true) {
      const auto dot = key.find('.', start);
      slot = &(*slot)[key.substr(start, dot == std::string::npos ? std::string::npos : dot - start)];
      if (dot == std::string::npos) break;
      start = dot + 1;
    }
    CHECK_MESSAGE(!slot->is_object(), key);
  }
  CHECK(config_keys().size() == 47);
}

TEST_CASE("latent sets in vectors mode pass embeddings through") {
  const TrainConfig c = tiny_config(Variant::pi_vae);
  const Dataset ds = prepare_dataset(c);
  const LatentSet train = compute_outer_latents(nullptr, ds, SplitName::train);
  CHECK(train.size() == ds.train.n_samples(ds.shift));
  CHECK(train.dim == 64);
  for (std::size_t i = 0; i < train.size(); i += 17) {
    const auto f = ds.train.frame(train.traj[i], train.t[i]);
    CHECK(std::equal(f.begin(), f.end(), train.row(i)));
  }
  const auto pairs = train.pair_starts();
  CHECK(pairs.size() == ds.train.n_trajectories() * (ds.train.samples_per_trajectory(ds.shift) - 1));
  for (std::size_t i : pairs) {
    CHECK(train.traj[i + 1] == train.traj[i]);
    CHECK(train.t[i + 1] == train.t[i] + 1);
  }
}

TEST_CASE("inner training is deterministic and reports every epoch") {
  const TrainConfig c = tiny_config(Variant::hpi_vae);
  const Dataset ds = prepare_dataset(c);
  const LatentSet tr = compute_outer_latents(nullptr, ds, SplitName::train);
  const LatentSet va = compute_outer_latents(nullptr, ds, SplitName::validation);
  const auto a = run_variant(c, Variant::hpi_vae, tr, va);
  const auto b = run_variant(c, Variant::hpi_vae, tr, va);
  CHECK(a.report.history.size() == c.epochs);
  CHECK(to_json(a.dof) == to_json(b.dof));
  CHECK(a.report.final_val_recon == b.report.final_val_recon);
  for (const auto& e : a.report.history) {
    CHECK(std::isfinite(e.total));
    CHECK(std::abs(e.total - (c.effective_beta() * e.recon + e.kl + e.second_order + e.hamilton)) < 1e-9);
  }
  CHECK(a.report.history.back().total < a.report.history.front().total);
  CHECK(a.dof.variances.size() == 10);
  CHECK(a.dof.active_count <= 10);

  const auto base = run_baseline(c, tr, va);
  REQUIRE(base.dof.raw_id.has_value());
  CHECK(base.dof.latent_width == static_cast<std::size_t>(dof_round(*base.dof.raw_id)));
  CHECK(base.model.config().variant == Variant::baseline);

  const auto piae = run_variant(c, Variant::pi_ae, tr, va);
  CHECK(piae.model.config().latent % 2 == 0);
  CHECK(piae.dof.rounded_id == base.dof.rounded_id);
}

TEST_CASE("outer training smoke") {
  TrainConfig c = tiny_config(Variant::pi_vae);
  c.data.mode = DatasetMode::frames;
  c.data.trajectories = 10;
  c.data.frames = 8;
  c.outer_epochs = 3;
  c.outer_batch_size = 16;
  const Dataset ds = prepare_dataset(c);
  CHECK_THROWS_AS(train_outer(c, prepare_dataset(tiny_config(Variant::pi_vae))), ContractError);

  const auto a = train_outer(c, ds);
  const auto b = train_outer(c, ds);
  REQUIRE(a.report.history.size() == 3);
  for (const auto& e : a.report.history) CHECK(std::isfinite(e.recon));
  CHECK(a.report.history.back().recon <= a.report.history.front().recon);
  CHECK(a.report.final_val_recon == b.report.final_val_recon);

  const LatentSet z = compute_outer_latents(&a.model, ds, SplitName::validation);
  CHECK(z.size() == ds.validation.n_samples(ds.shift));
  CHECK(z.dim == 64);
  CHECK_THROWS_AS(compute_outer_latents(nullptr, ds, SplitName::validation), ContractError);
}

TEST_CASE("traces and run directory") {
  const TrainConfig c = tiny_config(Variant::hpi_vae);
  const Dataset ds = prepare_dataset(c);
  const auto dir = temp_dir("svlab_test_run");
  const auto result = run_inner_pipeline(c, ds, nullptr, dir);

  CHECK(std::filesystem::exists(dir / "config.json"));
  CHECK(std::filesystem::exists(dir / "checkpoints" / "inner.bin"));
  CHECK(std::filesystem::exists(dir / "checkpoints" / "inner.json"));
  const auto report = read_json_file(dir / "report.json");
  CHECK(report.at("dof").at("variant") == "hpi-vae");
  CHECK(report.at("train").at("history").size() == c.epochs);
  CHECK(report.at("evaluation").contains("conservation_median"));
  CHECK(config_from_json(read_json_file(dir / "config.json")).variant == Variant::hpi_vae);

  const auto& ev = result.evaluation;
  REQUIRE(ev.traces.size() == ds.validation.n_trajectories());
  CHECK(ev.conservation.size() == ev.traces.size());
  const LatentTrace& tr = ev.traces.front();
  CHECK(tr.rows() == static_cast<std::size_t>(c.data.frames));
  CHECK(tr.overlay_names == std::vector<std::string>{"cos2theta", "x1"});
  for (std::size_t i = 0; i < tr.scaled.size(); ++i) {
    for (std::size_t t = 0; t < tr.rows(); ++t) {
      CHECK(tr.scaled[i][t] >= -1.0);
      CHECK(tr.scaled[i][t] <= 1.0);
      const auto [lo, hi] = tr.range[i];
      CHECK(lo + (tr.scaled[i][t] + 1.0) / 2.0 * (hi - lo) == doctest::Approx(tr.raw[i][t]).epsilon(1e-9));
    }
  }
  const std::string stem = std::to_string(tr.trajectory_id);
  CHECK(count_lines(dir / "traces" / (stem + ".csv")) == tr.rows() + 1);
  CHECK(std::filesystem::exists(dir / "plots" / (stem + ".svg")));
  std::size_t csvs = 0;
  for (const auto& e : std::filesystem::directory_iterator(dir / "traces")) csvs += e.path().extension() == ".csv";
  CHECK(csvs == std::min(c.trace_trajectories, ds.validation.n_trajectories()));

  CHECK_THROWS_AS(make_trace(result.inner.model, nullptr, ds, 100000, {}), ContractError);
  const double q = std::numbers::pi / 4;
  CHECK(std::abs(aux_observables(SystemSpec::single_pendulum(), {q, 0.0})[1]) < 1e-15);

  // Rerunning overwrites with identical content.
  const auto first = read_json_file(dir / "report.json");
  run_inner_pipeline(c, ds, nullptr, dir);
  auto second = read_json_file(dir / "report.json");
  auto strip = [](nlohmann::json j) {
    j["train"].erase("wall_seconds");
    return j;
  };
  CHECK(strip(first) == strip(second));
}
