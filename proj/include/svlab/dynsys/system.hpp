#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "svlab/numcore/rng.hpp"

namespace svlab {

enum class SystemKind { single_pendulum, double_pendulum, elastic_pendulum, reaction_diffusion };

std::string to_string(SystemKind kind);
SystemKind parse_system_kind(std::string_view name);

/// Generalized positions first, then conjugate momenta. Reaction-diffusion
/// stores the u grid then the v grid, each G x G row-major.
using StateVector = std::vector<double>;

struct SystemSpec {
  SystemKind kind = SystemKind::single_pendulum;

  // Mechanical parameters (SI units). The elastic pendulum's first arm is the
  // spring: l1 is unused there, r0 is its rest length and k its stiffness.
  double m1 = 1.0;
  double m2 = 1.0;
  double l1 = 1.0;
  double l2 = 1.0;
  double g = 9.81;
  double k = 40.0;
  double r0 = 1.0;

  // Lambda-omega reaction-diffusion on a periodic grid spanning [-extent/2, extent/2]^2.
  double d1 = 0.1;
  double d2 = 0.1;
  double beta_rd = 1.0;
  int grid = 32;
  double extent = 20.0;

  // Initial-condition distribution.
  double angle_range = 0.8 * 3.14159265358979323846;
  double momentum_range = 0.0;
  double extension_range = 0.2;

  static SystemSpec single_pendulum();
  static SystemSpec double_pendulum();
  static SystemSpec elastic_pendulum();
  static SystemSpec reaction_diffusion();
  static SystemSpec defaults(SystemKind kind);

  bool mechanical() const { return kind != SystemKind::reaction_diffusion; }
  /// Ground-truth degrees of freedom.
  int dof() const;
  /// Number of generalized coordinates (mechanical systems only).
  int n_coords() const;
  std::size_t state_size() const;
  /// Indices of state entries that are angles.
  std::vector<std::size_t> angle_indices() const;
  std::vector<std::string> aux_names() const;

  /// Throws ContractError if any parameter is out of range.
  void validate() const;
};

struct Point2 {
  double x = 0.0;
  double y = 0.0;
};

/// Pivot-relative joint and bob positions (y up): one point per mass.
std::vector<Point2> mass_positions(const SystemSpec& spec, const StateVector& state);

/// Ground-truth observables for trace overlays, in aux_names() order.
std::vector<double> aux_observables(const SystemSpec& spec, const StateVector& state);

StateVector derivative(const SystemSpec& spec, const StateVector& state, double t = 0.0);

/// Total energy in joules, potential zero at pivot level.
double hamiltonian(const SystemSpec& spec, const StateVector& state);

StateVector rk4_step(const SystemSpec& spec, const StateVector& state, double t, double dt);

/// Velocity Verlet for the single pendulum (any sign of dt); RK4 otherwise.
StateVector leapfrog_step(const SystemSpec& spec, const StateVector& state, double dt);

enum class Integrator { automatic, rk4, leapfrog };

struct Trajectory {
  SystemSpec spec;
  double dt_frame = 1.0 / 60.0;
  std::vector<StateVector> states;
  std::vector<std::vector<double>> aux;

  std::size_t size() const { return states.size(); }
};

/// Default seconds between stored frames: 1/60 for mechanical systems,
/// 0.05 time units for reaction-diffusion.
double default_dt_frame(SystemKind kind);

Trajectory simulate(const SystemSpec& spec, const StateVector& initial, int n_frames, double dt_frame,
                    int substeps, Integrator integrator = Integrator::automatic);

StateVector sample_initial_conditions(const SystemSpec& spec, Rng& rng);

/// n trajectories; trajectory i starts from rng.split(i), so output does not
/// depend on `jobs`.
std::vector<Trajectory> simulate_many(const SystemSpec& spec, std::size_t n, int n_frames, double dt_frame,
                                      int substeps, std::uint64_t seed, unsigned jobs = 1);

/// Header: t,state_0..state_{2n-1},aux_*
void write_trajectory_csv(const std::filesystem::path& path, const Trajectory& traj);

}  // namespace svlab
