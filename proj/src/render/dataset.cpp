#include "svlab/render/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "json.hpp"
#include "svlab/dynsys/spec_json.hpp"
#include "svlab/error.hpp"
#include "svlab/numcore/checkpoint.hpp"
#include "svlab/numcore/rng.hpp"
#include "svlab/parallel.hpp"
#include "svlab/render/embed.hpp"

namespace svlab {

namespace {

constexpr SplitName kSplits[] = {SplitName::train, SplitName::validation, SplitName::test};

std::string shard_name(SplitName split, std::size_t k) {
  return "data_" + to_string(split) + "_" + std::to_string(k) + ".bin";
}

// Copies trajectories [begin, end) of `split` into a shard tensor list.
std::vector<NamedTensor> shard_tensors(const DatasetSplit& s, std::size_t begin, std::size_t end) {
  const std::size_t t = end - begin, f = s.n_frames;
  std::vector<NamedTensor> out;
  std::vector<double> ids;
  for (std::size_t i = begin; i < end; ++i) ids.push_back(static_cast<double>(s.trajectory_ids[i]));
  out.push_back({"trajectory_ids", Tensor(Shape{t}, std::move(ids))});
  auto block = [&](const char* name, const std::vector<double>& data, std::size_t width) {
    if (width == 0) return;
    const auto first = data.begin() + static_cast<std::ptrdiff_t>(begin * f * width);
    const auto last = data.begin() + static_cast<std::ptrdiff_t>(end * f * width);
    out.push_back({name, Tensor(Shape{t, f, width}, std::vector<double>(first, last))});
  };
  block("features", s.features, s.feature_dim);
  block("aux", s.aux, s.aux_dim);
  block("states", s.states, s.state_dim);
  return out;
}

void append_block(const std::vector<NamedTensor>& shard, const char* name, std::size_t width,
                  std::vector<double>& into, const std::string& file) {
  if (width == 0) return;
  const Tensor& t = find_tensor(shard, name);
  if (t.rank() != 3 || t.dim(2) != width) throw ParseError(file + ": tensor '" + name + "' has unexpected shape");
  into.insert(into.end(), t.values().begin(), t.values().end());
}

}  // namespace

std::string to_string(DatasetMode mode) { return mode == DatasetMode::frames ? "frames" : "vectors"; }

DatasetMode parse_dataset_mode(std::string_view name) {
  if (name == "frames") return DatasetMode::frames;
  if (name == "vectors") return DatasetMode::vectors;
  throw ContractError("unknown dataset mode '" + std::string(name) + "' (expected frames or vectors)");
}

std::string to_string(SplitName split) {
  switch (split) {
    case SplitName::train: return "train";
    case SplitName::validation: return "validation";
    case SplitName::test: return "test";
  }
  return "unknown";
}

std::size_t DatasetSplit::samples_per_trajectory(int shift) const {
  const std::size_t need = static_cast<std::size_t>(shift) + 1;
  return n_frames > need ? n_frames - need : 0;
}

std::span<const double> DatasetSplit::frame(std::size_t traj, std::size_t index) const {
  return std::span<const double>(features).subspan((traj * n_frames + index) * feature_dim, feature_dim);
}

std::span<const double> DatasetSplit::aux_row(std::size_t traj, std::size_t index) const {
  return std::span<const double>(aux).subspan((traj * n_frames + index) * aux_dim, aux_dim);
}

std::span<const double> DatasetSplit::state(std::size_t traj, std::size_t index) const {
  return std::span<const double>(states).subspan((traj * n_frames + index) * state_dim, state_dim);
}

std::vector<double> DatasetSplit::input_stack(std::size_t traj, std::size_t t) const {
  std::vector<double> out;
  out.reserve(2 * feature_dim);
  for (std::size_t k = 0; k < 2; ++k) {
    const auto f = frame(traj, t + k);
    out.insert(out.end(), f.begin(), f.end());
  }
  return out;
}

std::vector<double> DatasetSplit::target_stack(std::size_t traj, std::size_t t, int shift) const {
  return input_stack(traj, t + static_cast<std::size_t>(shift));
}

const DatasetSplit& Dataset::split(SplitName name) const {
  switch (name) {
    case SplitName::train: return train;
    case SplitName::validation: return validation;
    case SplitName::test: return test;
  }
  return train;
}

DatasetSplit& Dataset::split(SplitName name) {
  return const_cast<DatasetSplit&>(static_cast<const Dataset&>(*this).split(name));
}

std::array<std::size_t, 3> split_counts(std::size_t n) {
  const auto train = static_cast<std::size_t>(std::llround(0.8 * static_cast<double>(n)));
  const auto validation = std::min(n - train, static_cast<std::size_t>(std::llround(0.1 * static_cast<double>(n))));
  return {train, validation, n - train - validation};
}

std::array<std::vector<std::size_t>, 3> assign_splits(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> perm(n);
  for (std::size_t i = 0; i < n; ++i) perm[i] = i;
  Rng rng(seed);
  for (std::size_t i = n; i > 1; --i) std::swap(perm[i - 1], perm[rng.below(i)]);
  const auto counts = split_counts(n);
  std::array<std::vector<std::size_t>, 3> out;
  std::size_t pos = 0;
  for (std::size_t s = 0; s < 3; ++s) {
    out[s].assign(perm.begin() + static_cast<std::ptrdiff_t>(pos), perm.begin() + static_cast<std::ptrdiff_t>(pos + counts[s]));
    std::sort(out[s].begin(), out[s].end());
    pos += counts[s];
  }
  return out;
}

Dataset make_dataset(const std::vector<Trajectory>& trajectories, const DatasetConfig& config) {
  if (trajectories.empty()) throw ContractError("build_dataset needs at least one trajectory");
  if (config.shift < 1) throw ContractError("shift must be >= 1");
  config.geometry.validate();
  const SystemSpec& spec = trajectories.front().spec;
  const std::size_t n_frames = trajectories.front().size();
  const std::size_t need = static_cast<std::size_t>(config.shift) + 2;

  std::string problems;
  for (std::size_t i = 0; i < trajectories.size(); ++i) {
    const auto& tr = trajectories[i];
    if (tr.spec.kind != spec.kind) problems += "\n  trajectory " + std::to_string(i) + ": system kind differs";
    if (tr.size() < need) {
      problems += "\n  trajectory " + std::to_string(i) + ": " + std::to_string(tr.size()) + " frames, shift " +
                  std::to_string(config.shift) + " needs at least " + std::to_string(need);
    } else if (tr.size() != n_frames) {
      problems += "\n  trajectory " + std::to_string(i) + ": " + std::to_string(tr.size()) + " frames, expected " +
                  std::to_string(n_frames);
    }
  }
  if (!problems.empty()) throw ContractError("trajectories unusable for the dataset:" + problems);
  if (config.mode == DatasetMode::vectors && !spec.mechanical()) {
    throw UnsupportedSystemError("vectors mode needs a mechanical system");
  }

  Dataset ds;
  ds.system = to_string(spec.kind);
  ds.spec = spec;
  ds.mode = config.mode;
  ds.geometry = config.geometry;
  ds.shift = config.shift;
  ds.dt_frame = trajectories.front().dt_frame;
  ds.seed = config.seed;
  ds.embed_seed = config.embed_seed;
  ds.aux_names = spec.aux_names();

  const std::size_t feature_dim = config.mode == DatasetMode::frames ? config.geometry.numel() : kEmbedWidth;
  const std::size_t aux_dim = ds.aux_names.size();
  const std::size_t state_dim = spec.mechanical() ? spec.state_size() : 0;
  std::optional<StateEmbedding> embedding;
  if (config.mode == DatasetMode::vectors) embedding.emplace(spec, config.embed_seed);

  const auto assignment = assign_splits(trajectories.size(), config.seed);
  for (std::size_t s = 0; s < 3; ++s) {
    DatasetSplit& split = ds.split(kSplits[s]);
    split.n_frames = n_frames;
    split.feature_dim = feature_dim;
    split.aux_dim = aux_dim;
    split.state_dim = state_dim;
    split.trajectory_ids = assignment[s];
    const std::size_t t = assignment[s].size();
    split.features.assign(t * n_frames * feature_dim, 0.0);
    split.aux.assign(t * n_frames * aux_dim, 0.0);
    split.states.assign(t * n_frames * state_dim, 0.0);
    parallel_for(t, config.jobs, [&](std::size_t j) {
      const Trajectory& tr = trajectories[assignment[s][j]];
      for (std::size_t f = 0; f < n_frames; ++f) {
        const std::size_t row = j * n_frames + f;
        const std::vector<double> feat = embedding ? (*embedding)(tr.states[f])
                                                   : render_state(spec, tr.states[f], config.geometry).pixels;
        std::copy(feat.begin(), feat.end(), split.features.begin() + static_cast<std::ptrdiff_t>(row * feature_dim));
        std::copy(tr.aux[f].begin(), tr.aux[f].end(), split.aux.begin() + static_cast<std::ptrdiff_t>(row * aux_dim));
        if (state_dim > 0) {
          std::copy(tr.states[f].begin(), tr.states[f].end(),
                    split.states.begin() + static_cast<std::ptrdiff_t>(row * state_dim));
        }
      }
    });
  }
  return ds;
}

void write_dataset(const std::filesystem::path& dir, const Dataset& ds, std::size_t per_shard) {
  if (per_shard == 0) throw ContractError("trajectories_per_shard must be positive");
  std::filesystem::create_directories(dir);
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    const auto name = entry.path().filename().string();
    if (name.rfind("data_", 0) == 0 && entry.path().extension() == ".bin") std::filesystem::remove(entry.path());
  }

  nlohmann::json manifest;
  manifest["format"] = "svlab-dataset";
  manifest["version"] = 1;
  manifest["system"] = ds.system;
  if (ds.spec) manifest["system_spec"] = spec_to_json(*ds.spec);
  manifest["mode"] = to_string(ds.mode);
  manifest["geometry"] = {{"height", ds.geometry.height}, {"width", ds.geometry.width}, {"channels", ds.geometry.channels}};
  manifest["shift"] = ds.shift;
  manifest["dt_frame"] = ds.dt_frame;
  manifest["seed"] = ds.seed;
  manifest["embed_seed"] = ds.embed_seed;
  manifest["aux_names"] = ds.aux_names;
  manifest["frames_per_trajectory"] = ds.train.n_frames;
  manifest["feature_dim"] = ds.train.feature_dim;
  manifest["state_dim"] = ds.train.state_dim;

  for (SplitName name : kSplits) {
    const DatasetSplit& s = ds.split(name);
    nlohmann::json entry;
    entry["trajectories"] = s.n_trajectories();
    entry["samples"] = s.n_samples(ds.shift);
    entry["trajectory_ids"] = s.trajectory_ids;
    std::vector<std::string> shards;
    for (std::size_t begin = 0, k = 0; begin < s.n_trajectories(); begin += per_shard, ++k) {
      const std::size_t end = std::min(begin + per_shard, s.n_trajectories());
      shards.push_back(shard_name(name, k));
      save_tensors(dir / shards.back(), shard_tensors(s, begin, end));
    }
    entry["shards"] = shards;
    manifest["splits"][to_string(name)] = entry;
  }

  const auto tmp = dir / "manifest.json.tmp";
  {
    std::ofstream f(tmp);
    if (!f) throw IoError("cannot write " + tmp.string());
    f << manifest.dump(2) << "\n";
    if (!f) throw IoError("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, dir / "manifest.json");
}

Dataset load_dataset(const std::filesystem::path& dir) {
  const auto path = dir / "manifest.json";
  std::ifstream f(path);
  if (!f) throw IoError("cannot open " + path.string());
  nlohmann::json m;
  try {
    m = nlohmann::json::parse(f);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }

  Dataset ds;
  try {
    if (m.at("format") != "svlab-dataset" || m.at("version") != 1) throw ParseError("unsupported manifest format");
    ds.system = m.at("system").get<std::string>();
    if (m.contains("system_spec")) ds.spec = spec_from_json(m.at("system_spec"));
    ds.mode = parse_dataset_mode(m.at("mode").get<std::string>());
    const auto& g = m.at("geometry");
    ds.geometry = {g.at("height").get<std::size_t>(), g.at("width").get<std::size_t>(), g.at("channels").get<std::size_t>()};
    ds.shift = m.at("shift").get<int>();
    ds.dt_frame = m.at("dt_frame").get<double>();
    ds.seed = m.at("seed").get<std::uint64_t>();
    ds.embed_seed = m.at("embed_seed").get<std::uint64_t>();
    ds.aux_names = m.at("aux_names").get<std::vector<std::string>>();
    const auto n_frames = m.at("frames_per_trajectory").get<std::size_t>();
    const auto feature_dim = m.at("feature_dim").get<std::size_t>();
    const auto state_dim = m.at("state_dim").get<std::size_t>();

    for (SplitName name : kSplits) {
      const auto& entry = m.at("splits").at(to_string(name));
      DatasetSplit& s = ds.split(name);
      s.n_frames = n_frames;
      s.feature_dim = feature_dim;
      s.aux_dim = ds.aux_names.size();
      s.state_dim = state_dim;
      for (const auto& shard : entry.at("shards")) {
        const std::string file = shard.get<std::string>();
        const auto tensors = load_tensors(dir / file);
        for (double id : find_tensor(tensors, "trajectory_ids").values()) {
          s.trajectory_ids.push_back(static_cast<std::size_t>(id));
        }
        append_block(tensors, "features", s.feature_dim, s.features, file);
        append_block(tensors, "aux", s.aux_dim, s.aux, file);
        append_block(tensors, "states", s.state_dim, s.states, file);
      }
      if (s.n_trajectories() != entry.at("trajectories").get<std::size_t>() ||
          s.features.size() != s.n_trajectories() * n_frames * feature_dim) {
        throw ParseError("split '" + to_string(name) + "' does not match its shards");
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  return ds;
}

Dataset build_dataset(const std::vector<Trajectory>& trajectories, const DatasetConfig& config,
                      const std::filesystem::path& dir) {
  Dataset ds = make_dataset(trajectories, config);
  write_dataset(dir, ds, config.trajectories_per_shard);
  return ds;
}

}  // namespace svlab
