#include "svlab/dynsys/system.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <sstream>

#include "svlab/error.hpp"
#include "svlab/parallel.hpp"

namespace svlab {

namespace {

using std::numbers::pi;

void check_layout(const SystemSpec& spec, const StateVector& state) {
  if (state.size() != spec.state_size()) {
    throw ContractError("state has " + std::to_string(state.size()) + " entries, " + to_string(spec.kind) +
                        " expects " + std::to_string(spec.state_size()));
  }
}

void require_mechanical(const SystemSpec& spec, const char* what) {
  if (!spec.mechanical()) throw UnsupportedSystemError(std::string(what) + " is undefined for reaction-diffusion");
}

// Elastic pendulum, coordinates (theta1, r, theta2).
struct ElasticTerms {
  Eigen::Matrix3d mass;
  Eigen::Matrix3d d_theta1;  // dM/dtheta1; dM/dtheta2 = -d_theta1
  Eigen::Matrix3d d_r;
  Eigen::Vector3d grad_v;
  double potential;
};

ElasticTerms elastic_terms(const SystemSpec& s, const StateVector& x) {
  const double t1 = x[0], r = x[1], t2 = x[2];
  const double mt = s.m1 + s.m2;
  const double c = std::cos(t1 - t2), sn = std::sin(t1 - t2);
  ElasticTerms e;
  e.mass << mt * r * r, 0.0, s.m2 * r * s.l2 * c,  //
      0.0, mt, s.m2 * s.l2 * sn,                   //
      s.m2 * r * s.l2 * c, s.m2 * s.l2 * sn, s.m2 * s.l2 * s.l2;
  e.d_theta1.setZero();
  e.d_theta1(0, 2) = e.d_theta1(2, 0) = -s.m2 * r * s.l2 * sn;
  e.d_theta1(1, 2) = e.d_theta1(2, 1) = s.m2 * s.l2 * c;
  e.d_r.setZero();
  e.d_r(0, 0) = 2.0 * mt * r;
  e.d_r(0, 2) = e.d_r(2, 0) = s.m2 * s.l2 * c;
  e.grad_v << mt * s.g * r * std::sin(t1), -mt * s.g * std::cos(t1) + s.k * (r - s.r0), s.m2 * s.g * s.l2 * std::sin(t2);
  e.potential = -mt * s.g * r * std::cos(t1) - s.m2 * s.g * s.l2 * std::cos(t2) + 0.5 * s.k * (r - s.r0) * (r - s.r0);
  return e;
}

Eigen::Vector3d elastic_velocities(const ElasticTerms& e, const StateVector& x) {
  const Eigen::Vector3d p(x[3], x[4], x[5]);
  return e.mass.ldlt().solve(p);
}

void laplacian_rd(const SystemSpec& s, const double* f, double* out) {
  const int n = s.grid;
  const double h = s.extent / n;
  const double inv = 1.0 / (h * h);
  for (int i = 0; i < n; ++i) {
    const int up = (i + n - 1) % n, down = (i + 1) % n;
    for (int j = 0; j < n; ++j) {
      const int left = (j + n - 1) % n, right = (j + 1) % n;
      out[i * n + j] = (f[up * n + j] + f[down * n + j] + f[i * n + left] + f[i * n + right] - 4.0 * f[i * n + j]) * inv;
    }
  }
}

StateVector axpy(const StateVector& x, double a, const StateVector& d) {
  StateVector out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] + a * d[i];
  return out;
}

StateVector rk4_raw(const SystemSpec& spec, const StateVector& x, double t, double dt) {
  const StateVector k1 = derivative(spec, x, t);
  const StateVector k2 = derivative(spec, axpy(x, 0.5 * dt, k1), t + 0.5 * dt);
  const StateVector k3 = derivative(spec, axpy(x, 0.5 * dt, k2), t + 0.5 * dt);
  const StateVector k4 = derivative(spec, axpy(x, dt, k3), t + dt);
  StateVector out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
  return out;
}

void check_finite(const StateVector& x, double t, double dt) {
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!std::isfinite(x[i])) {
      std::ostringstream msg;
      msg << "integration became non-finite at t=" << t << " (dt=" << dt << ", state entry " << i << ")";
      throw InstabilityError(msg.str());
    }
  }
}

}  // namespace

std::string to_string(SystemKind kind) {
  switch (kind) {
    case SystemKind::single_pendulum: return "single-pendulum";
    case SystemKind::double_pendulum: return "double-pendulum";
    case SystemKind::elastic_pendulum: return "elastic-pendulum";
    case SystemKind::reaction_diffusion: return "reaction-diffusion";
  }
  return "unknown";
}

SystemKind parse_system_kind(std::string_view name) {
  for (auto k : {SystemKind::single_pendulum, SystemKind::double_pendulum, SystemKind::elastic_pendulum,
                 SystemKind::reaction_diffusion}) {
    if (name == to_string(k)) return k;
  }
  throw ContractError("unknown system kind '" + std::string(name) +
                      "' (expected single-pendulum, double-pendulum, elastic-pendulum or reaction-diffusion)");
}

SystemSpec SystemSpec::single_pendulum() { return SystemSpec{}; }

SystemSpec SystemSpec::double_pendulum() {
  SystemSpec s;
  s.kind = SystemKind::double_pendulum;
  s.m1 = s.m2 = 0.5;
  s.angle_range = 0.5 * std::numbers::pi;
  s.momentum_range = 1.0;
  return s;
}

SystemSpec SystemSpec::elastic_pendulum() {
  SystemSpec s;
  s.kind = SystemKind::elastic_pendulum;
  s.m1 = s.m2 = 0.2;
  s.angle_range = 0.5 * std::numbers::pi;
  s.momentum_range = 1.0;
  return s;
}

SystemSpec SystemSpec::reaction_diffusion() {
  SystemSpec s;
  s.kind = SystemKind::reaction_diffusion;
  return s;
}

SystemSpec SystemSpec::defaults(SystemKind kind) {
  switch (kind) {
    case SystemKind::single_pendulum: return single_pendulum();
    case SystemKind::double_pendulum: return double_pendulum();
    case SystemKind::elastic_pendulum: return elastic_pendulum();
    case SystemKind::reaction_diffusion: return reaction_diffusion();
  }
  throw ContractError("unknown system kind");
}

int SystemSpec::dof() const {
  switch (kind) {
    case SystemKind::single_pendulum:
    case SystemKind::reaction_diffusion: return 2;
    case SystemKind::double_pendulum: return 4;
    case SystemKind::elastic_pendulum: return 6;
  }
  return 0;
}

int SystemSpec::n_coords() const {
  require_mechanical(*this, "generalized coordinates");
  return dof() / 2;
}

std::size_t SystemSpec::state_size() const {
  if (kind == SystemKind::reaction_diffusion) return 2 * static_cast<std::size_t>(grid) * grid;
  return static_cast<std::size_t>(dof());
}

std::vector<std::size_t> SystemSpec::angle_indices() const {
  switch (kind) {
    case SystemKind::single_pendulum: return {0};
    case SystemKind::double_pendulum: return {0, 1};
    case SystemKind::elastic_pendulum: return {0, 2};
    case SystemKind::reaction_diffusion: return {};
  }
  return {};
}

std::vector<std::string> SystemSpec::aux_names() const {
  switch (kind) {
    case SystemKind::single_pendulum: return {"theta", "cos2theta", "x1"};
    case SystemKind::double_pendulum: return {"theta1", "theta2", "x1", "x2"};
    case SystemKind::elastic_pendulum: return {"theta1", "theta2", "x1", "x2", "z"};
    case SystemKind::reaction_diffusion: return {"u_probe", "v_probe"};
  }
  return {};
}

void SystemSpec::validate() const {
  auto positive = [](double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v)) throw ContractError(std::string(name) + " must be positive, got " + std::to_string(v));
  };
  auto non_negative = [](double v, const char* name) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw ContractError(std::string(name) + " must be non-negative");
  };
  if (mechanical()) {
    positive(m1, "m1");
    positive(m2, "m2");
    positive(l1, "l1");
    positive(l2, "l2");
    positive(g, "g");
    positive(k, "k");
    positive(r0, "r0");
    non_negative(angle_range, "angle_range");
    non_negative(momentum_range, "momentum_range");
    if (!(extension_range >= 0.0 && extension_range < 1.0)) throw ContractError("extension_range must lie in [0, 1)");
  } else {
    positive(d1, "d1");
    positive(d2, "d2");
    positive(beta_rd, "beta_rd");
    positive(extent, "extent");
    if (grid < 3) throw ContractError("grid must be at least 3");
  }
}

std::vector<Point2> mass_positions(const SystemSpec& spec, const StateVector& x) {
  require_mechanical(spec, "mass positions");
  check_layout(spec, x);
  switch (spec.kind) {
    case SystemKind::single_pendulum:
      return {{spec.l1 * std::sin(x[0]), -spec.l1 * std::cos(x[0])}};
    case SystemKind::double_pendulum: {
      const Point2 a{spec.l1 * std::sin(x[0]), -spec.l1 * std::cos(x[0])};
      return {a, {a.x + spec.l2 * std::sin(x[1]), a.y - spec.l2 * std::cos(x[1])}};
    }
    case SystemKind::elastic_pendulum: {
      const Point2 a{x[1] * std::sin(x[0]), -x[1] * std::cos(x[0])};
      return {a, {a.x + spec.l2 * std::sin(x[2]), a.y - spec.l2 * std::cos(x[2])}};
    }
    default: break;
  }
  return {};
}

std::vector<double> aux_observables(const SystemSpec& spec, const StateVector& x) {
  check_layout(spec, x);
  switch (spec.kind) {
    case SystemKind::single_pendulum: {
      const auto p = mass_positions(spec, x);
      return {x[0], std::cos(2.0 * x[0]), p[0].x};
    }
    case SystemKind::double_pendulum: {
      const auto p = mass_positions(spec, x);
      return {x[0], x[1], p[0].x, p[1].x};
    }
    case SystemKind::elastic_pendulum: {
      const auto p = mass_positions(spec, x);
      return {x[0], x[2], p[0].x, p[1].x, x[1]};
    }
    case SystemKind::reaction_diffusion: {
      const std::size_t n = static_cast<std::size_t>(spec.grid);
      const std::size_t probe = (n / 4) * n + n / 4;
      return {x[probe], x[n * n + probe]};
    }
  }
  return {};
}

StateVector derivative(const SystemSpec& s, const StateVector& x, double /*t*/) {
  check_layout(s, x);
  switch (s.kind) {
    case SystemKind::single_pendulum: {
      const double ml2 = s.m1 * s.l1 * s.l1;
      return {x[1] / ml2, -s.m1 * s.g * s.l1 * std::sin(x[0])};
    }
    case SystemKind::double_pendulum: {
      const double t1 = x[0], t2 = x[1], p1 = x[2], p2 = x[3];
      const double d = t1 - t2, c = std::cos(d), sn = std::sin(d);
      const double den = s.m1 + s.m2 * sn * sn;
      const double dt1 = (s.l2 * p1 - s.l1 * p2 * c) / (s.l1 * s.l1 * s.l2 * den);
      const double dt2 = (-s.m2 * s.l2 * p1 * c + (s.m1 + s.m2) * s.l1 * p2) / (s.m2 * s.l1 * s.l2 * s.l2 * den);
      const double c1 = p1 * p2 * sn / (s.l1 * s.l2 * den);
      const double c2 = (s.m2 * s.l2 * s.l2 * p1 * p1 + (s.m1 + s.m2) * s.l1 * s.l1 * p2 * p2 -
                         2.0 * s.m2 * s.l1 * s.l2 * p1 * p2 * c) *
                        std::sin(2.0 * d) / (2.0 * s.l1 * s.l1 * s.l2 * s.l2 * den * den);
      return {dt1, dt2, -(s.m1 + s.m2) * s.g * s.l1 * std::sin(t1) - c1 + c2, -s.m2 * s.g * s.l2 * std::sin(t2) + c1 - c2};
    }
    case SystemKind::elastic_pendulum: {
      const ElasticTerms e = elastic_terms(s, x);
      const Eigen::Vector3d qd = elastic_velocities(e, x);
      const double k1 = 0.5 * qd.dot(e.d_theta1 * qd);
      const double kr = 0.5 * qd.dot(e.d_r * qd);
      return {qd[0], qd[1], qd[2], k1 - e.grad_v[0], kr - e.grad_v[1], -k1 - e.grad_v[2]};
    }
    case SystemKind::reaction_diffusion: {
      const std::size_t n2 = static_cast<std::size_t>(s.grid) * s.grid;
      const double* u = x.data();
      const double* v = x.data() + n2;
      StateVector out(2 * n2);
      std::vector<double> lu(n2), lv(n2);
      laplacian_rd(s, u, lu.data());
      laplacian_rd(s, v, lv.data());
      for (std::size_t i = 0; i < n2; ++i) {
        const double a2 = u[i] * u[i] + v[i] * v[i];
        out[i] = (1.0 - a2) * u[i] + s.beta_rd * a2 * v[i] + s.d1 * lu[i];
        out[n2 + i] = -s.beta_rd * a2 * u[i] + (1.0 - a2) * v[i] + s.d2 * lv[i];
      }
      return out;
    }
  }
  return {};
}

double hamiltonian(const SystemSpec& s, const StateVector& x) {
  require_mechanical(s, "hamiltonian");
  check_layout(s, x);
  switch (s.kind) {
    case SystemKind::single_pendulum:
      return x[1] * x[1] / (2.0 * s.m1 * s.l1 * s.l1) - s.m1 * s.g * s.l1 * std::cos(x[0]);
    case SystemKind::double_pendulum: {
      const double t1 = x[0], t2 = x[1], p1 = x[2], p2 = x[3];
      const double d = t1 - t2, sn = std::sin(d);
      const double kinetic = (s.m2 * s.l2 * s.l2 * p1 * p1 + (s.m1 + s.m2) * s.l1 * s.l1 * p2 * p2 -
                              2.0 * s.m2 * s.l1 * s.l2 * p1 * p2 * std::cos(d)) /
                             (2.0 * s.m2 * s.l1 * s.l1 * s.l2 * s.l2 * (s.m1 + s.m2 * sn * sn));
      return kinetic - (s.m1 + s.m2) * s.g * s.l1 * std::cos(t1) - s.m2 * s.g * s.l2 * std::cos(t2);
    }
    case SystemKind::elastic_pendulum: {
      const ElasticTerms e = elastic_terms(s, x);
      const Eigen::Vector3d p(x[3], x[4], x[5]);
      return 0.5 * p.dot(elastic_velocities(e, x)) + e.potential;
    }
    default: break;
  }
  return 0.0;
}

StateVector rk4_step(const SystemSpec& spec, const StateVector& state, double t, double dt) {
  if (!(dt > 0.0)) throw ContractError("rk4_step requires dt > 0");
  StateVector out = rk4_raw(spec, state, t, dt);
  check_finite(out, t, dt);
  return out;
}

StateVector leapfrog_step(const SystemSpec& spec, const StateVector& state, double dt) {
  if (dt == 0.0) {
    check_layout(spec, state);
    return state;
  }
  if (spec.kind != SystemKind::single_pendulum) {
    StateVector out = rk4_raw(spec, state, 0.0, dt);
    check_finite(out, 0.0, dt);
    return out;
  }
  check_layout(spec, state);
  const double force = spec.m1 * spec.g * spec.l1;
  const double ml2 = spec.m1 * spec.l1 * spec.l1;
  const double p_half = state[1] - 0.5 * dt * force * std::sin(state[0]);
  const double theta = state[0] + dt * p_half / ml2;
  StateVector out{theta, p_half - 0.5 * dt * force * std::sin(theta)};
  check_finite(out, 0.0, dt);
  return out;
}

double default_dt_frame(SystemKind kind) { return kind == SystemKind::reaction_diffusion ? 0.05 : 1.0 / 60.0; }

Trajectory simulate(const SystemSpec& spec, const StateVector& initial, int n_frames, double dt_frame, int substeps,
                    Integrator integrator) {
  spec.validate();
  check_layout(spec, initial);
  if (n_frames < 2) throw ContractError("simulate needs n_frames >= 2");
  if (substeps < 1) throw ContractError("simulate needs substeps >= 1");
  if (!(dt_frame > 0.0)) throw ContractError("simulate needs dt_frame > 0");
  const bool use_leapfrog = integrator == Integrator::leapfrog ||
                            (integrator == Integrator::automatic && spec.kind == SystemKind::single_pendulum);
  const double dt = dt_frame / substeps;

  Trajectory traj;
  traj.spec = spec;
  traj.dt_frame = dt_frame;
  traj.states.reserve(static_cast<std::size_t>(n_frames));
  traj.aux.reserve(static_cast<std::size_t>(n_frames));
  StateVector x = initial;
  for (int f = 0; f < n_frames; ++f) {
    if (f > 0) {
      for (int s = 0; s < substeps; ++s) {
        const double t = (f - 1) * dt_frame + s * dt;
        x = use_leapfrog ? leapfrog_step(spec, x, dt) : rk4_step(spec, x, t, dt);
      }
    }
    traj.aux.push_back(aux_observables(spec, x));
    traj.states.push_back(x);
  }
  return traj;
}

StateVector sample_initial_conditions(const SystemSpec& spec, Rng& rng) {
  spec.validate();
  if (spec.kind == SystemKind::reaction_diffusion) {
    const double phase = rng.uniform(0.0, 2.0 * pi);
    const int n = spec.grid;
    const std::size_t n2 = static_cast<std::size_t>(n) * n;
    StateVector x(2 * n2);
    const double h = spec.extent / n;
    for (int i = 0; i < n; ++i) {
      const double y = -0.5 * spec.extent + (i + 0.5) * h;
      for (int j = 0; j < n; ++j) {
        const double xx = -0.5 * spec.extent + (j + 0.5) * h;
        const double r = std::hypot(xx, y);
        const double angle = std::atan2(y, xx) - r + phase;
        x[static_cast<std::size_t>(i) * n + j] = std::tanh(r) * std::cos(angle);
        x[n2 + static_cast<std::size_t>(i) * n + j] = std::tanh(r) * std::sin(angle);
      }
    }
    return x;
  }
  const int n = spec.n_coords();
  StateVector x(static_cast<std::size_t>(2 * n), 0.0);
  const auto angles = spec.angle_indices();
  for (int i = 0; i < n; ++i) {
    const bool is_angle = std::find(angles.begin(), angles.end(), static_cast<std::size_t>(i)) != angles.end();
    x[i] = is_angle ? rng.uniform(-spec.angle_range, spec.angle_range)
                    : spec.r0 * (1.0 + rng.uniform(-spec.extension_range, spec.extension_range));
  }
  for (int i = 0; i < n; ++i) {
    x[n + i] = spec.momentum_range > 0.0 ? rng.uniform(-spec.momentum_range, spec.momentum_range) : 0.0;
  }
  return x;
}

std::vector<Trajectory> simulate_many(const SystemSpec& spec, std::size_t n, int n_frames, double dt_frame,
                                      int substeps, std::uint64_t seed, unsigned jobs) {
  std::vector<Trajectory> out(n);
  const Rng root(seed);
  parallel_for(n, jobs, [&](std::size_t i) {
    Rng rng = root.split(i);
    try {
      out[i] = simulate(spec, sample_initial_conditions(spec, rng), n_frames, dt_frame, substeps);
    } catch (const InstabilityError& e) {
      throw InstabilityError("trajectory " + std::to_string(i) + ": " + e.what());
    }
  });
  return out;
}

void write_trajectory_csv(const std::filesystem::path& path, const Trajectory& traj) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream f(path);
  if (!f) throw IoError("cannot open " + path.string() + " for writing");
  f << "t";
  const std::size_t width = traj.states.empty() ? 0 : traj.states.front().size();
  for (std::size_t i = 0; i < width; ++i) f << ",state_" << i;
  for (const auto& name : traj.spec.aux_names()) f << ",aux_" << name;
  f << "\n" << std::setprecision(17);
  for (std::size_t r = 0; r < traj.states.size(); ++r) {
    f << static_cast<double>(r) * traj.dt_frame;
    for (double v : traj.states[r]) f << ',' << v;
    for (double v : traj.aux[r]) f << ',' << v;
    f << '\n';
  }
  if (!f) throw IoError("write failed for " + path.string());
}

}  // namespace svlab
