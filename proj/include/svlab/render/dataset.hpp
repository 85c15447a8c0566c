#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "svlab/dynsys/system.hpp"
#include "svlab/render/raster.hpp"

namespace svlab {

enum class DatasetMode { frames, vectors };

std::string to_string(DatasetMode mode);
DatasetMode parse_dataset_mode(std::string_view name);

enum class SplitName { train, validation, test };

std::string to_string(SplitName split);

struct DatasetConfig {
  FrameGeometry geometry;
  /// Target window starts `shift` frames after the input window.
  int shift = 2;
  DatasetMode mode = DatasetMode::frames;
  /// Seeds the split assignment.
  std::uint64_t seed = 0;
  std::uint64_t embed_seed = 1;
  std::size_t trajectories_per_shard = 64;
  unsigned jobs = 1;
};

/// Whole trajectories of one split. Per-frame features are C*H*W pixels
/// (frames mode) or the 64-float embedding (vectors mode).
struct DatasetSplit {
  std::size_t n_frames = 0;
  std::size_t feature_dim = 0;
  std::size_t aux_dim = 0;
  std::size_t state_dim = 0;
  std::vector<std::size_t> trajectory_ids;
  std::vector<double> features;  // [T, F, feature_dim]
  std::vector<double> aux;       // [T, F, aux_dim]
  std::vector<double> states;    // [T, F, state_dim]

  std::size_t n_trajectories() const { return trajectory_ids.size(); }
  /// Valid window starts per trajectory: n_frames - shift - 1.
  std::size_t samples_per_trajectory(int shift) const;
  std::size_t n_samples(int shift) const { return n_trajectories() * samples_per_trajectory(shift); }

  std::span<const double> frame(std::size_t traj, std::size_t index) const;
  std::span<const double> aux_row(std::size_t traj, std::size_t index) const;
  std::span<const double> state(std::size_t traj, std::size_t index) const;

  /// Stacked (x_t, x_{t+1}) and (x_{t+shift}, x_{t+shift+1}).
  std::vector<double> input_stack(std::size_t traj, std::size_t t) const;
  std::vector<double> target_stack(std::size_t traj, std::size_t t, int shift) const;

  bool operator==(const DatasetSplit&) const = default;
};

struct Dataset {
  /// System kind name, or "external" for imported frames.
  std::string system = "external";
  std::optional<SystemSpec> spec;
  DatasetMode mode = DatasetMode::frames;
  FrameGeometry geometry;
  int shift = 2;
  double dt_frame = 1.0 / 60.0;
  std::uint64_t seed = 0;
  std::uint64_t embed_seed = 1;
  std::vector<std::string> aux_names;
  DatasetSplit train;
  DatasetSplit validation;
  DatasetSplit test;

  const DatasetSplit& split(SplitName name) const;
  DatasetSplit& split(SplitName name);
};

/// Split sizes for n trajectories: round(0.8 n), round(0.1 n), remainder.
std::array<std::size_t, 3> split_counts(std::size_t n);

/// Seeded assignment of trajectory indices to splits, each list sorted.
std::array<std::vector<std::size_t>, 3> assign_splits(std::size_t n, std::uint64_t seed);

/// Renders or embeds every frame and assigns trajectories to splits.
Dataset make_dataset(const std::vector<Trajectory>& trajectories, const DatasetConfig& config);

/// Writes data_<split>_<k>.bin shards, then manifest.json.
void write_dataset(const std::filesystem::path& dir, const Dataset& dataset, std::size_t trajectories_per_shard = 64);
Dataset load_dataset(const std::filesystem::path& dir);

/// make_dataset followed by write_dataset.
Dataset build_dataset(const std::vector<Trajectory>& trajectories, const DatasetConfig& config,
                      const std::filesystem::path& dir);

}  // namespace svlab
