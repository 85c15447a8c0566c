// Acceptance suite: one PASS/FAIL line per criterion, details indented below.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <numbers>
#include <optional>
#include <set>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "json.hpp"
#include "support/gradcheck.hpp"
#include "svlab/error.hpp"
#include "svlab/models/losses.hpp"
#include "svlab/models/model_io.hpp"
#include "svlab/parallel.hpp"
#include "svlab/render/netpbm.hpp"
#include "svlab/train/pipeline.hpp"

namespace fs = std::filesystem;
using namespace svlab;
using svlab::testing::gradcheck;
using svlab::testing::numeric_gradient;
using svlab::testing::random_tensor;
using svlab::testing::relative_error;

namespace {

struct Outcome {
  int id = 0;
  std::string title;
  bool pass = false;
  bool soft = false;
  std::string summary;
  std::vector<std::string> details;
  double seconds = 0.0;
  nlohmann::json data = nlohmann::json::object();
};

std::string fmt(double v, int precision = 3) {
  std::ostringstream out;
  out << std::setprecision(precision) << v;
  return out.str();
}

std::size_t pick(Rng& rng, std::size_t lo, std::size_t hi) {
  return lo + static_cast<std::size_t>(rng.uniform() * static_cast<double>(hi - lo + 1)) % (hi - lo + 1);
}

// ---------------------------------------------------------------- 1: autodiff

struct PrimitiveCheck {
  std::string name;
  double tolerance;
  std::function<double(Rng&, int)> trial;
};

double check_affine(Rng& rng) {
  const std::size_t b = pick(rng, 1, 5), n = pick(rng, 1, 6), m = pick(rng, 1, 6);
  Var x = Var::parameter(random_tensor(Shape{b, n}, rng));
  Var w = Var::parameter(random_tensor(Shape{n, m}, rng));
  Var bias = Var::parameter(random_tensor(Shape{m}, rng));
  const Var r(random_tensor(Shape{b, m}, rng));
  return gradcheck({x, w, bias}, [&] { return sum(mul(add_bias(matmul(x, w), bias), r)); });
}

double check_conv(Rng& rng, bool transposed) {
  const std::size_t c_in = pick(rng, 1, 3), c_out = pick(rng, 1, 3), k = pick(rng, 1, 3);
  const std::size_t stride = pick(rng, 1, 2), pad = pick(rng, 0, 1);
  const std::size_t h = pick(rng, std::max<std::size_t>(k, 3), 6), w = pick(rng, std::max<std::size_t>(k, 3), 6);
  const bool batched = rng.uniform() < 0.5;
  const Shape in_shape = batched ? Shape{2, c_in, h, w} : Shape{c_in, h, w};
  Var x = Var::parameter(random_tensor(in_shape, rng));
  Var kern = Var::parameter(transposed ? random_tensor(Shape{c_in, c_out, k, k}, rng)
                                       : random_tensor(Shape{c_out, c_in, k, k}, rng));
  auto op = [&] { return transposed ? conv_transpose2d(x, kern, stride, pad) : conv2d(x, kern, stride, pad); };
  const Var r(random_tensor(op().shape(), rng));
  return gradcheck({x, kern}, [&] { return sum(mul(op(), r)); });
}

double check_tanh(Rng& rng) {
  Var x = Var::parameter(random_tensor(Shape{pick(rng, 1, 4), pick(rng, 1, 6)}, rng, -2.5, 2.5));
  const Var r(random_tensor(x.shape(), rng));
  return gradcheck({x}, [&] { return sum(mul(tanh(x), r)); });
}

double check_losses(Rng& rng, int which) {
  const std::size_t b = pick(rng, 1, 5), half = pick(rng, 1, 3), w = 2 * half;
  Var a = Var::parameter(random_tensor(Shape{b, w}, rng));
  Var c = Var::parameter(random_tensor(Shape{b, w}, rng, -2.0, 2.0));
  const double dt = rng.uniform(0.2, 1.5);
  switch (which % 4) {
    case 0: return gradcheck({a, c}, [&] { return reconstruction_loss(a, c); });
    case 1: return gradcheck({a, c}, [&] { return kl_divergence(a, c); });
    case 2: return gradcheck({a, c}, [&] { return second_order_penalty(a, c, dt); });
    default: {
      Var g = Var::parameter(random_tensor(Shape{b, w}, rng));
      return gradcheck({g, a, c}, [&] { return hamilton_residual_from_gradient(g, a, c, dt); });
    }
  }
}

Mlp random_energy_net(Rng& rng, std::size_t in) {
  const std::size_t h = pick(rng, 2, 8);
  return Mlp({in, h, h, 1}, {Activation::tanh, Activation::tanh, Activation::identity}, rng);
}

double check_input_gradient(Rng& rng) {
  const Mlp net = random_energy_net(rng, pick(rng, 1, 5));
  Var x = Var::parameter(random_tensor(Shape{pick(rng, 1, 4), net.in_features()}, rng, -1.5, 1.5));
  const Tensor analytic = input_gradient(net, x).value();
  const Tensor numeric = numeric_gradient(x, [&] { return sum(net.forward(x)).value().item(); });
  return relative_error(analytic, numeric);
}

double check_double_backprop(Rng& rng) {
  const std::size_t latent = 2 * pick(rng, 1, 3);
  const HnnHead head(latent, pick(rng, 2, 8), rng);
  const std::size_t b = pick(rng, 1, 4);
  Var z0 = Var::parameter(random_tensor(Shape{b, latent}, rng));
  Var z1 = Var::parameter(random_tensor(Shape{b, latent}, rng));
  const bool midpoint = rng.uniform() < 0.5;
  const double dt = rng.uniform(0.3, 1.2);
  std::vector<Var> leaves = head.net().parameters();
  leaves.push_back(z0);
  leaves.push_back(z1);
  return gradcheck(leaves, [&] { return hamilton_residual(head, z0, z1, dt, midpoint); });
}

Outcome criterion_autodiff() {
  Outcome out{1, "autodiff matches central differences"};
  const int trials = 100;
  std::vector<PrimitiveCheck> checks = {
      {"affine", 1e-6, [](Rng& r, int) { return check_affine(r); }},
      {"conv2d", 1e-6, [](Rng& r, int) { return check_conv(r, false); }},
      {"conv_transpose2d", 1e-6, [](Rng& r, int) { return check_conv(r, true); }},
      {"tanh", 1e-6, [](Rng& r, int) { return check_tanh(r); }},
      // recon, KL, second-order, Hamilton residual in turn
      {"losses", 1e-6, [](Rng& r, int t) { return check_losses(r, t); }},
      {"input_gradient", 1e-6, [](Rng& r, int) { return check_input_gradient(r); }},
      {"double backprop (hamilton_residual)", 1e-5, [](Rng& r, int) { return check_double_backprop(r); }},
  };
  out.pass = true;
  std::size_t idx = 0;
  for (const auto& c : checks) {
    double worst = 0.0;
    for (int t = 0; t < trials; ++t) {
      Rng rng = Rng(1000 + idx).split(static_cast<std::uint64_t>(t));
      worst = std::max(worst, c.trial(rng, t));
    }
    const bool ok = worst < c.tolerance;
    out.pass = out.pass && ok;
    out.details.push_back(c.name + ": worst rel err " + fmt(worst) + " over " + std::to_string(trials) +
                          " configs (< " + fmt(c.tolerance) + ")" + (ok ? "" : "  FAIL"));
    out.data[c.name] = worst;
    ++idx;
  }
  out.summary = std::to_string(checks.size()) + " primitives x " + std::to_string(trials) + " seeded configs";
  return out;
}

// ---------------------------------------------------------------- 2: physics

Outcome criterion_physics() {
  Outcome out{2, "integrators conserve energy, small-angle period"};
  // leapfrog, single pendulum, 100 s at dt = 1e-3
  const auto single = SystemSpec::single_pendulum();
  double leap = 0.0;
  Rng rng(21);
  for (int trial = 0; trial < 3; ++trial) {
    StateVector x = sample_initial_conditions(single, rng);
    const double h0 = hamiltonian(single, x);
    double worst = 0.0;
    for (int i = 0; i < 100000; ++i) {
      x = leapfrog_step(single, x, 1e-3);
      worst = std::max(worst, std::abs(hamiltonian(single, x) - h0));
    }
    leap = std::max(leap, worst / std::abs(h0));
  }
  // RK4 double pendulum at dt = 1e-4: relative drift per simulated second
  const auto dbl = SystemSpec::double_pendulum();
  double rk = 0.0;
  const double horizon = 10.0;
  for (int trial = 0; trial < 3; ++trial) {
    StateVector x = sample_initial_conditions(dbl, rng);
    const double h0 = hamiltonian(dbl, x);
    double worst = 0.0;
    const int steps = static_cast<int>(horizon / 1e-4);
    for (int i = 0; i < steps; ++i) {
      x = rk4_step(dbl, x, i * 1e-4, 1e-4);
      worst = std::max(worst, std::abs(hamiltonian(dbl, x) - h0));
    }
    rk = std::max(rk, worst / std::abs(h0) / horizon);
  }
  // small-angle period from downward zero crossings
  StateVector x{0.05, 0.0};
  std::vector<double> crossings;
  double t = 0.0;
  const double dt = 1e-3;
  while (crossings.size() < 7 && t < 30.0) {
    const auto next = leapfrog_step(single, x, dt);
    if (x[0] > 0.0 && next[0] <= 0.0) crossings.push_back(t + dt * x[0] / (x[0] - next[0]));
    x = next;
    t += dt;
  }
  const double expected = 2.0 * std::numbers::pi * std::sqrt(single.l1 / single.g);
  const double period = crossings.size() == 7 ? (crossings.back() - crossings.front()) / 6.0 : 0.0;
  const double period_err = std::abs(period - expected) / expected;

  const bool a = leap < 1e-3, b = rk < 1e-6, c = period_err < 0.005;
  out.pass = a && b && c;
  out.details = {"leapfrog single pendulum |dH|/|H| over 100 s: " + fmt(leap) + " (< 1e-3)",
                 "RK4 double pendulum |dH|/|H| per second: " + fmt(rk) + " (< 1e-6)",
                 "small-angle period " + fmt(period, 6) + " s vs " + fmt(expected, 6) + " s, rel err " +
                     fmt(period_err) + " (< 0.005)"};
  out.summary = "drift " + fmt(leap) + ", " + fmt(rk) + "/s; period err " + fmt(period_err);
  out.data = {{"leapfrog_drift", leap}, {"rk4_drift_per_s", rk}, {"period_rel_err", period_err}};
  return out;
}

// ---------------------------------------------------------------- 3: ID estimator

PointCloud cloud_from(std::size_t n, std::size_t d, Rng& rng, const std::function<void(Rng&, double*)>& draw) {
  std::vector<double> v(n * d);
  for (std::size_t i = 0; i < n; ++i) draw(rng, v.data() + i * d);
  return PointCloud(n, d, std::move(v));
}

Outcome criterion_idest(unsigned jobs) {
  Outcome out{3, "intrinsic-dimension estimator"};
  const std::size_t n = 2000;
  Rng rng(31);
  const PointCloud line = cloud_from(n, 3, rng, [](Rng& r, double* p) {
    const double s = r.uniform();
    p[0] = 0.5 + s;
    p[1] = -1.0 + 2.0 * s;
    p[2] = 0.25 - 0.5 * s;
  });
  const PointCloud sphere = cloud_from(n, 3, rng, [](Rng& r, double* p) {
    double norm = 0.0;
    for (int i = 0; i < 3; ++i) {
      p[i] = r.normal();
      norm += p[i] * p[i];
    }
    for (int i = 0; i < 3; ++i) p[i] /= std::sqrt(norm);
  });
  const PointCloud cube = cloud_from(n, 3, rng, [](Rng& r, double* p) {
    for (int i = 0; i < 3; ++i) p[i] = r.uniform();
  });
  const double id_line = mle_id(line, 10, 20, jobs).value;
  const double id_sphere = mle_id(sphere, 10, 20, jobs).value;
  const double id_cube = mle_id(cube, 10, 20, jobs).value;

  PointCloud moved = sphere;
  const double c = std::cos(0.9), s = std::sin(0.9);
  for (std::size_t i = 0; i < n; ++i) {
    const double* p = sphere.row(i);
    moved.data[i * 3 + 0] = 4.25 * (c * p[0] - s * p[2]);
    moved.data[i * 3 + 1] = 4.25 * p[1];
    moved.data[i * 3 + 2] = 4.25 * (s * p[0] + c * p[2]);
  }
  const double invariance = std::abs(mle_id(moved, 10, 20, jobs).value - id_sphere) / id_sphere;

  const bool a = id_line >= 0.9 && id_line <= 1.1, b = id_sphere >= 1.8 && id_sphere <= 2.2,
             d = id_cube >= 2.6 && id_cube <= 3.4, e = invariance < 1e-9;
  out.pass = a && b && d && e;
  out.details = {"line segment: " + fmt(id_line, 4) + " in [0.9, 1.1]",
                 "2-sphere surface: " + fmt(id_sphere, 4) + " in [1.8, 2.2]",
                 "3-cube: " + fmt(id_cube, 4) + " in [2.6, 3.4]",
                 "rotation + scaling rel change: " + fmt(invariance) + " (< 1e-9)"};
  out.summary = fmt(id_line, 3) + " / " + fmt(id_sphere, 3) + " / " + fmt(id_cube, 3) + ", invariance " +
                fmt(invariance);
  out.data = {{"line", id_line}, {"sphere", id_sphere}, {"cube", id_cube}, {"invariance", invariance}};
  return out;
}

// ---------------------------------------------------------------- 4 and 6: DOF discovery

struct DofRun {
  SystemKind system;
  Variant variant;
  std::uint64_t seed;
  DofReport dof;
  bool diverged = false;
  std::size_t trajectories = 0;
  std::optional<double> cos2theta_r;
  std::vector<double> conservation;
  double seconds = 0.0;
};

struct DofSweep {
  std::vector<DofRun> runs;
  double seconds = 0.0;
};

DofSweep run_dof_sweep(const std::vector<SystemKind>& systems, std::size_t seeds, unsigned jobs,
                       std::size_t epochs_override, std::size_t trajectories_override) {
  const auto start = std::chrono::steady_clock::now();
  struct Prepared {
    Dataset ds;
    LatentSet train, val;
  };
  // The baseline path estimates ID at the default data scale: with only 100
  // trajectories the nearest neighbours are mostly consecutive frames of one
  // trajectory, and the estimate drifts toward 2.
  const std::size_t baseline_trajectories = trajectories_override ? trajectories_override : TrainConfig{}.data.trajectories;
  auto prepare = [&](SystemKind kind, std::size_t trajectories) {
    TrainConfig c = desk_config(kind, Variant::pi_vae, 0);
    if (trajectories) c.data.trajectories = trajectories;
    Prepared p;
    p.ds = prepare_dataset(c);
    p.train = compute_outer_latents(nullptr, p.ds, SplitName::train);
    p.val = compute_outer_latents(nullptr, p.ds, SplitName::validation);
    return p;
  };
  std::vector<Prepared> prepared(systems.size()), prepared_baseline(systems.size());
  parallel_for(2 * systems.size(), jobs, [&](std::size_t i) {
    const std::size_t s = i % systems.size();
    if (i < systems.size()) {
      prepared[s] = prepare(systems[s], trajectories_override);
    } else {
      prepared_baseline[s] = prepare(systems[s], baseline_trajectories);
    }
  });

  struct Job {
    std::size_t sys;
    Variant variant;
    std::uint64_t seed;
  };
  std::vector<Job> jobs_list;
  for (std::size_t s = 0; s < systems.size(); ++s) {
    jobs_list.push_back({s, Variant::baseline, 0});
    for (std::uint64_t seed = 0; seed < seeds; ++seed) {
      jobs_list.push_back({s, Variant::hpi_vae, seed});
      jobs_list.push_back({s, Variant::pi_vae, seed});
    }
  }
  // longest jobs first so parallel workers finish together
  std::stable_sort(jobs_list.begin(), jobs_list.end(),
                   [](const Job& a, const Job& b) { return (a.variant != Variant::pi_vae) > (b.variant != Variant::pi_vae); });

  DofSweep sweep;
  sweep.runs.resize(jobs_list.size());
  parallel_for(jobs_list.size(), jobs, [&](std::size_t i) {
    const Job& job = jobs_list[i];
    const auto t0 = std::chrono::steady_clock::now();
    TrainConfig c = desk_config(systems[job.sys], job.variant == Variant::baseline ? Variant::pi_vae : job.variant,
                                job.seed);
    if (epochs_override) c.epochs = epochs_override;
    const bool baseline = job.variant == Variant::baseline;
    c.data.trajectories = baseline ? baseline_trajectories : (trajectories_override ? trajectories_override : c.data.trajectories);
    c.jobs = 1;
    const Prepared& p = baseline ? prepared_baseline[job.sys] : prepared[job.sys];
    InnerResult res = job.variant == Variant::baseline ? run_baseline(c, p.train, p.val)
                                                       : run_variant(c, job.variant, p.train, p.val);
    DofRun run{systems[job.sys], job.variant, job.seed, res.dof, res.report.diverged, c.data.trajectories};
    if (job.variant != Variant::baseline && systems[job.sys] == SystemKind::single_pendulum && !run.diverged) {
      const Evaluation ev = evaluate_inner(res.model, res.dof.mask, p.ds, nullptr);
      run.cos2theta_r = ev.cos2theta_r;
      run.conservation = ev.conservation;
    }
    run.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    sweep.runs[i] = std::move(run);
  });
  std::sort(sweep.runs.begin(), sweep.runs.end(), [](const DofRun& a, const DofRun& b) {
    return std::tie(a.system, a.variant, a.seed) < std::tie(b.system, b.variant, b.seed);
  });
  sweep.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return sweep;
}

Outcome criterion_dof(const DofSweep& sweep, std::size_t seeds) {
  Outcome out{4, "degrees of freedom from active latent dimensions (vectors mode)"};
  const std::size_t need = seeds >= 5 ? 4 : (seeds * 4 + 4) / 5;
  bool counts_ok = true, baseline_ok = true, recon_ok = true;
  std::size_t models = 0, recon_passed = 0;
  double worst_recon = 0.0;
  std::map<std::string, std::vector<int>> tallies;
  for (const auto& r : sweep.runs) {
    ++models;
    recon_passed += r.dof.recon_pass;
    worst_recon = std::max(worst_recon, r.dof.val_recon);
    nlohmann::json j = to_json(r.dof);
    j["seed"] = r.seed;
    j["trajectories"] = r.trajectories;
    j["seconds"] = r.seconds;
    out.data["runs"].push_back(j);
    if (r.variant == Variant::baseline) {
      const bool ok = r.dof.dof_pass;
      baseline_ok = baseline_ok && ok;
      out.details.push_back(to_string(r.system) + " baseline (" + std::to_string(r.trajectories) + " trajectories): ID " + fmt(r.dof.raw_id.value_or(0.0), 4) +
                            " -> dof_round " + std::to_string(r.dof.rounded_id.value_or(0)) + " (truth " +
                            std::to_string(r.dof.ground_truth) + ")" + (ok ? "" : "  FAIL") + ", val recon " +
                            fmt(r.dof.val_recon));
    } else {
      tallies[to_string(r.system) + " " + to_string(r.variant)].push_back(static_cast<int>(r.dof.active_count));
    }
  }
  for (const auto& r : sweep.runs) {
    if (r.variant == Variant::baseline || r.seed != 0) continue;
    const std::string key = to_string(r.system) + " " + to_string(r.variant);
    const auto& counts = tallies[key];
    const auto hits = static_cast<std::size_t>(std::count(counts.begin(), counts.end(), r.dof.ground_truth));
    const bool ok = hits >= need;
    counts_ok = counts_ok && ok;
    std::string list;
    double recon_max = 0.0;
    for (const auto& q : sweep.runs) {
      if (q.system == r.system && q.variant == r.variant) recon_max = std::max(recon_max, q.dof.val_recon);
    }
    for (int c : counts) list += (list.empty() ? "" : ",") + std::to_string(c);
    out.details.push_back(key + ": active [" + list + "] truth " + std::to_string(r.dof.ground_truth) + ", " +
                          std::to_string(hits) + "/" + std::to_string(counts.size()) + " (need " +
                          std::to_string(need) + ")" + (ok ? "" : "  FAIL") + ", max val recon " + fmt(recon_max));
  }
  recon_ok = recon_passed == models;
  out.details.push_back("reconstruction < 0.01: " + std::to_string(recon_passed) + "/" + std::to_string(models) +
                        " models, worst " + fmt(worst_recon) + (recon_ok ? "" : "  FAIL"));
  out.pass = counts_ok && baseline_ok && recon_ok;
  out.summary = std::string("counts ") + (counts_ok ? "ok" : "FAIL") + ", baseline " + (baseline_ok ? "ok" : "FAIL") +
                ", recon bar " + (recon_ok ? "ok" : "FAIL") + "; " + fmt(sweep.seconds / 60.0, 3) + " min";
  out.seconds = sweep.seconds;
  return out;
}

Outcome criterion_interpretability(const DofSweep& sweep) {
  Outcome out{6, "interpretability metrics on the single pendulum"};
  out.soft = true;
  bool corr_ok = true, cons_ok = true;
  for (Variant v : {Variant::pi_vae, Variant::hpi_vae}) {
    std::size_t good = 0, total = 0;
    std::string list;
    for (const auto& r : sweep.runs) {
      if (r.system != SystemKind::single_pendulum || r.variant != v) continue;
      ++total;
      const double rr = r.cos2theta_r.value_or(0.0);
      good += rr >= 0.6;
      list += (list.empty() ? "" : ", ") + fmt(rr, 3);
    }
    const bool ok = 2 * good > total;
    corr_ok = corr_ok && ok;
    out.details.push_back(to_string(v) + " max |r| with cos2theta per seed: [" + list + "], " + std::to_string(good) +
                          "/" + std::to_string(total) + " >= 0.6" + (ok ? "" : "  FAIL"));
    out.data[to_string(v)] = {{"good", good}, {"total", total}};
  }
  double worst = 0.0;
  std::size_t above = 0, count = 0;
  for (const auto& r : sweep.runs) {
    if (r.system != SystemKind::single_pendulum || r.variant != Variant::hpi_vae) continue;
    for (double m : r.conservation) {
      worst = std::max(worst, m);
      above += m >= 0.5;
      ++count;
    }
  }
  cons_ok = count > 0 && above == 0;
  out.details.push_back("hpi-vae conservation metric: worst " + fmt(worst) + " over " + std::to_string(count) +
                        " validation trajectories, " + std::to_string(above) + " >= 0.5" + (cons_ok ? "" : "  FAIL"));
  out.data["conservation_worst"] = worst;
  out.pass = corr_ok && cons_ok;
  out.summary = std::string("correlation ") + (corr_ok ? "ok" : "FAIL") + ", conservation worst " + fmt(worst);
  return out;
}

// ---------------------------------------------------------------- 5: frames pipeline

Outcome criterion_frames(std::size_t seeds, unsigned jobs, std::size_t outer_epochs_override) {
  Outcome out{5, "full pipeline from rendered frames (slow tier)"};
  const auto start = std::chrono::steady_clock::now();
  TrainConfig c = desk_config(SystemKind::single_pendulum, Variant::pi_vae, 0);
  c.data.mode = DatasetMode::frames;
  c.data.trajectories = 200;
  c.data.geometry = {32, 32, 1};
  c.jobs = jobs;
  if (outer_epochs_override) c.outer_epochs = outer_epochs_override;
  const Dataset ds = prepare_dataset(c);
  const OuterResult outer = train_outer(c, ds);
  const bool outer_ok = !outer.report.diverged && outer.report.final_val_recon < 0.01;
  out.details.push_back("outer validation recon " + fmt(outer.report.final_val_recon) + " after " +
                        std::to_string(outer.report.history.size()) + " epochs (< 0.01)" + (outer_ok ? "" : "  FAIL"));
  const LatentSet tr = compute_outer_latents(&outer.model, ds, SplitName::train);
  const LatentSet va = compute_outer_latents(&outer.model, ds, SplitName::validation);
  std::vector<std::size_t> counts(seeds);
  std::vector<double> recons(seeds);
  parallel_for(seeds, jobs, [&](std::size_t s) {
    TrainConfig cs = c;
    cs.seed = s;
    cs.jobs = 1;
    const auto res = run_variant(cs, Variant::pi_vae, tr, va);
    counts[s] = res.dof.active_count;
    recons[s] = res.dof.val_recon;
  });
  const auto hits = static_cast<std::size_t>(std::count(counts.begin(), counts.end(), 2));
  const std::size_t need = seeds >= 5 ? 3 : (seeds * 3 + 4) / 5;
  std::string list;
  for (auto k : counts) list += (list.empty() ? "" : ",") + std::to_string(k);
  const bool counts_ok = hits >= need;
  out.details.push_back("pi-vae active [" + list + "], " + std::to_string(hits) + "/" + std::to_string(seeds) +
                        " equal 2 (need " + std::to_string(need) + ")" + (counts_ok ? "" : "  FAIL"));
  out.pass = outer_ok && counts_ok;
  out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  out.summary = "outer recon " + fmt(outer.report.final_val_recon) + ", active [" + list + "]; " +
                fmt(out.seconds / 60.0, 3) + " min";
  out.data = {{"outer_val_recon", outer.report.final_val_recon}, {"active", counts}, {"val_recon", recons}};
  return out;
}

// ---------------------------------------------------------------- 7: round trips

bool same_tensors(const std::vector<NamedTensor>& a, const std::vector<NamedTensor>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].name != b[i].name || !(a[i].tensor == b[i].tensor)) return false;
  }
  return true;
}

Outcome criterion_formats() {
  Outcome out{7, "format round trips"};
  const fs::path dir = fs::temp_directory_path() / "svlab_acceptance_formats";
  fs::remove_all(dir);
  fs::create_directories(dir);

  Rng rng(71);
  bool ckpt_ok = true;
  for (Variant v : {Variant::baseline, Variant::pi_ae, Variant::pi_vae, Variant::hpi_vae}) {
    InnerConfig ic;
    ic.variant = v;
    ic.latent = v == Variant::baseline ? 3 : (v == Variant::pi_ae ? 4 : kVariationalLatent);
    InnerModel model(ic, rng);
    save_inner(dir / "inner.bin", model);
    const InnerModel back = load_inner(dir / "inner.bin");
    ckpt_ok = ckpt_ok && back.config() == model.config() &&
              same_tensors(snapshot_parameters(model.named_parameters()), snapshot_parameters(back.named_parameters()));
  }
  OuterAE outer(FrameGeometry{32, 32, 1}, rng);
  save_outer(dir / "outer.bin", outer);
  ckpt_ok = ckpt_ok && same_tensors(snapshot_parameters(outer.named_parameters()),
                                    snapshot_parameters(load_outer(dir / "outer.bin").named_parameters()));

  const auto spec = SystemSpec::double_pendulum();
  const auto trajs = simulate_many(spec, 12, 10, 1.0 / 60.0, 5, 72);
  bool data_ok = true;
  for (DatasetMode mode : {DatasetMode::frames, DatasetMode::vectors}) {
    DatasetConfig cfg;
    cfg.mode = mode;
    cfg.trajectories_per_shard = 4;
    const Dataset written = build_dataset(trajs, cfg, dir / "ds");
    const Dataset read = load_dataset(dir / "ds");
    data_ok = data_ok && read.train == written.train && read.validation == written.validation &&
              read.test == written.test && read.aux_names == written.aux_names;
    fs::remove_all(dir / "ds");
  }

  double worst_pixel = 0.0;
  for (const FrameGeometry& g : {FrameGeometry{32, 32, 1}, FrameGeometry{32, 32, 3}}) {
    const fs::path frames = dir / "frames";
    fs::remove_all(frames);
    fs::create_directories(frames);
    for (std::size_t t = 0; t < 4; ++t) {
      for (std::size_t f = 0; f < trajs[t].size(); ++f) {
        write_netpbm(frames / ("clip" + std::to_string(t) + "_" + std::to_string(f) + (g.channels == 1 ? ".pgm" : ".ppm")),
                     rasterize(spec, trajs[t].states[f], g));
      }
    }
    const Dataset ds = import_frames_dir(frames, g, 2, 0);
    for (SplitName s : {SplitName::train, SplitName::validation, SplitName::test}) {
      const auto& split = ds.split(s);
      for (std::size_t j = 0; j < split.n_trajectories(); ++j) {
        for (std::size_t f = 0; f < split.n_frames; ++f) {
          const auto ref = rasterize(spec, trajs[split.trajectory_ids[j]].states[f], g).pixels;
          const auto got = split.frame(j, f);
          for (std::size_t k = 0; k < ref.size(); ++k) worst_pixel = std::max(worst_pixel, std::abs(ref[k] - got[k]));
        }
      }
    }
  }
  fs::remove_all(dir);
  const bool pix_ok = worst_pixel <= 1.0 / 255.0;
  out.pass = ckpt_ok && data_ok && pix_ok;
  out.details = {std::string("inner (4 variants) and outer checkpoints bit-exact: ") + (ckpt_ok ? "yes" : "no  FAIL"),
                 std::string("dataset shards (frames, vectors) bit-exact: ") + (data_ok ? "yes" : "no  FAIL"),
                 "PGM/PPM import max pixel error " + fmt(worst_pixel) + " (<= 1/255)" + (pix_ok ? "" : "  FAIL")};
  out.summary = "checkpoints, shards, netpbm import max err " + fmt(worst_pixel);
  out.data = {{"checkpoints", ckpt_ok}, {"datasets", data_ok}, {"pixel_err", worst_pixel}};
  return out;
}

void print(const Outcome& o) {
  std::cout << (o.pass ? "PASS" : "FAIL") << "  criterion " << o.id << (o.soft ? " (soft)" : "") << ": " << o.title
            << " | " << o.summary << " [" << fmt(o.seconds, 3) << " s]\n";
  for (const auto& d : o.details) std::cout << "        " << d << '\n';
  std::cout.flush();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"svlab acceptance suite"};
  std::string tier = "fast";
  std::vector<int> only;
  bool strict = false;
  unsigned jobs = std::max(1u, std::thread::hardware_concurrency());
  std::size_t seeds = 5, epochs = 0, trajectories = 0, outer_epochs = 0;
  std::string report;
  app.add_option("--tier", tier, "fast (criteria 1-4, 6, 7), slow (5) or all")
      ->check(CLI::IsMember({"fast", "slow", "all"}));
  app.add_option("--only", only, "run just these criteria")->delimiter(',');
  app.add_flag("--strict", strict, "exit 1 if a hard criterion fails");
  app.add_option("--jobs", jobs, "parallel training jobs")->check(CLI::PositiveNumber);
  app.add_option("--seeds", seeds, "seeds per system for criteria 4-6")->check(CLI::PositiveNumber);
  app.add_option("--epochs", epochs, "override inner epochs (diagnostics only)");
  app.add_option("--trajectories", trajectories, "override trajectories for criteria 4 and 6 (diagnostics only)");
  app.add_option("--outer-epochs", outer_epochs, "override outer epochs for criterion 5 (diagnostics only)");
  app.add_option("--report", report, "write a JSON report here");
  CLI11_PARSE(app, argc, argv);

  if (const char* env = std::getenv("SVLAB_SLOW_TESTS"); env != nullptr && std::string(env) == "1" && tier == "fast") {
    tier = "all";
  }
  std::set<int> selected;
  if (!only.empty()) {
    selected.insert(only.begin(), only.end());
  } else {
    if (tier != "slow") selected = {1, 2, 3, 4, 6, 7};
    if (tier != "fast") selected.insert(5);
  }
  if (epochs || trajectories || outer_epochs) {
    std::cout << "note: overrides active; results are diagnostics, not acceptance\n";
  }

  std::vector<Outcome> outcomes;
  auto timed = [&](auto&& fn) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o.pass = false;
      o.summary = std::string("threw: ") + e.what();
    }
    if (o.seconds == 0.0) o.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return o;
  };

  std::optional<DofSweep> sweep;
  auto need_sweep = [&](std::size_t id) -> const DofSweep& {
    if (!sweep) {
      std::vector<SystemKind> systems = {SystemKind::single_pendulum};
      if (selected.count(4)) systems = {SystemKind::single_pendulum, SystemKind::double_pendulum, SystemKind::elastic_pendulum};
      std::cout << "training " << (systems.size() * (2 * seeds + 1)) << " inner models on " << jobs << " thread(s) for criterion "
                << id << "...\n";
      std::cout.flush();
      sweep = run_dof_sweep(systems, seeds, jobs, epochs, trajectories);
    }
    return *sweep;
  };

  for (int id : selected) {
    Outcome o;
    switch (id) {
      case 1: o = timed(criterion_autodiff); break;
      case 2: o = timed(criterion_physics); break;
      case 3: o = timed([&] { return criterion_idest(jobs); }); break;
      case 4: o = timed([&] { return criterion_dof(need_sweep(4), seeds); }); break;
      case 5: o = timed([&] { return criterion_frames(seeds, jobs, outer_epochs); }); break;
      case 6: o = timed([&] { return criterion_interpretability(need_sweep(6)); }); break;
      case 7: o = timed(criterion_formats); break;
      default: std::cerr << "unknown criterion " << id << '\n'; return 3;
    }
    o.id = id;
    if (o.title.empty()) o.title = "criterion " + std::to_string(id);
    if (id == 6) o.soft = true;
    print(o);
    outcomes.push_back(std::move(o));
  }

  std::size_t hard_fail = 0, passed = 0;
  nlohmann::json j = nlohmann::json::array();
  for (const auto& o : outcomes) {
    passed += o.pass;
    hard_fail += !o.pass && !o.soft;
    j.push_back({{"criterion", o.id}, {"title", o.title}, {"pass", o.pass}, {"soft", o.soft}, {"summary", o.summary},
                 {"details", o.details}, {"seconds", o.seconds}, {"data", o.data}});
  }
  std::cout << passed << "/" << outcomes.size() << " criteria passed";
  if (hard_fail) std::cout << ", " << hard_fail << " hard failure(s)";
  std::cout << '\n';
  if (!report.empty()) write_json_file(report, j);
  return strict && hard_fail ? 1 : 0;
}
