#include "svlab/train/config.hpp"

#include <cstdio>
#include <functional>

#include "svlab/dynsys/spec_json.hpp"
#include "svlab/error.hpp"

namespace svlab {

namespace {

using nlohmann::json;

void require(bool ok, const std::string& key, const std::string& what) {
  if (!ok) throw ContractError("config key '" + key + "': " + what);
}

template <typename T>
void read(const json& section, const std::string& prefix, const char* name, T& out) {
  if (!section.contains(name)) return;
  try {
    out = section.at(name).get<T>();
  } catch (const json::exception&) {
    throw ParseError("config key '" + prefix + name + "' has the wrong type");
  }
}

void reject_unknown(const json& section, const std::string& prefix, std::initializer_list<const char*> known) {
  if (!section.is_object()) throw ParseError("config section '" + prefix + "' must be an object");
  for (const auto& [key, value] : section.items()) {
    bool found = false;
    for (const char* k : known) found = found || key == k;
    if (!found) throw ParseError("unknown config key '" + prefix + key + "'");
  }
}

const json& section_or_empty(const json& j, const char* name) {
  static const json empty = json::object();
  return j.contains(name) ? j.at(name) : empty;
}

}  // namespace

double default_beta(SystemKind kind, Variant variant) {
  if (!is_variational(variant)) throw ContractError("beta applies only to pi-vae and hpi-vae");
  const bool h = variant == Variant::hpi_vae;
  switch (kind) {
    case SystemKind::reaction_diffusion: return 7.0;
    case SystemKind::single_pendulum: return h ? 20.0 : 17.0;
    case SystemKind::double_pendulum: return h ? 40.0 : 30.0;
    case SystemKind::elastic_pendulum: return h ? 80.0 : 50.0;
  }
  throw ContractError("unknown system kind");
}

double TrainConfig::effective_beta() const {
  if (beta) return *beta;
  return is_variational(variant) ? default_beta(system.kind, variant) : 1.0;
}

double TrainConfig::effective_dt_frame() const {
  return data.dt_frame > 0.0 ? data.dt_frame : default_dt_frame(system.kind);
}

void TrainConfig::validate() const {
  try {
    system.validate();
  } catch (const ContractError& e) {
    throw ContractError(std::string("config section 'system': ") + e.what());
  }
  try {
    data.geometry.validate();
  } catch (const ContractError& e) {
    throw ContractError(std::string("config section 'data.geometry': ") + e.what());
  }
  require(data.trajectories >= 10, "data.trajectories", "need at least 10 trajectories");
  require(data.shift >= 1, "data.shift", "must be at least 1");
  require(data.frames >= data.shift + 3, "data.frames", "need at least shift + 3 frames");
  require(data.dt_frame >= 0.0, "data.dt_frame", "must be non-negative");
  require(data.substeps >= 1, "data.substeps", "must be at least 1");
  require(!beta || *beta > 0.0, "train.beta", "must be positive");
  require(epochs >= 1, "train.epochs", "must be at least 1");
  require(batch_size >= 1, "train.batch_size", "must be at least 1");
  require(lr > 0.0, "train.lr", "must be positive");
  require(threshold > 0.0, "train.threshold", "must be positive");
  require(hidden >= 1, "train.hidden", "must be positive");
  require(hnn_hidden >= 1, "train.hnn_hidden", "must be positive");
  require(!is_variational(variant) || latent == kVariationalLatent, "train.latent",
          "variational variants use a latent width of exactly 10");
  require(latent % 2 == 0 && latent >= 2, "train.latent", "must be even and at least 2");
  require(id_k1 >= 2 && id_k2 >= id_k1, "train.id_k1", "need 2 <= id_k1 <= id_k2");
  require(id_max_points > id_k2, "train.id_max_points", "must exceed id_k2");
  require(outer_epochs >= 1, "outer.epochs", "must be at least 1");
  require(outer_batch_size >= 1, "outer.batch_size", "must be at least 1");
  require(outer_lr > 0.0, "outer.lr", "must be positive");
  require(outer_early_stop >= 0.0, "outer.early_stop", "must be non-negative");
  require(outer_patience >= 1, "outer.patience", "must be at least 1");
}

json config_to_json(const TrainConfig& c) {
  const auto& d = c.data;
  json j;
  j["system"] = spec_to_json(c.system);
  j["data"] = {{"mode", to_string(d.mode)},
               {"trajectories", d.trajectories},
               {"frames", d.frames},
               {"dt_frame", d.dt_frame},
               {"substeps", d.substeps},
               {"shift", d.shift},
               {"seed", d.seed},
               {"embed_seed", d.embed_seed},
               {"geometry",
                {{"height", d.geometry.height}, {"width", d.geometry.width}, {"channels", d.geometry.channels}}}};
  j["train"] = {{"variant", to_string(c.variant)},
                {"beta", c.beta ? json(*c.beta) : json(nullptr)},
                {"epochs", c.epochs},
                {"batch_size", c.batch_size},
                {"lr", c.lr},
                {"seed", c.seed},
                {"threshold", c.threshold},
                {"latent", c.latent},
                {"hidden", c.hidden},
                {"hnn_hidden", c.hnn_hidden},
                {"hamilton_midpoint", c.hamilton_midpoint},
                {"id_k1", c.id_k1},
                {"id_k2", c.id_k2},
                {"id_max_points", c.id_max_points},
                {"trace_trajectories", c.trace_trajectories}};
  j["outer"] = {{"epochs", c.outer_epochs},
                {"batch_size", c.outer_batch_size},
                {"lr", c.outer_lr},
                {"early_stop", c.outer_early_stop},
                {"patience", c.outer_patience}};
  return j;
}

TrainConfig config_from_json(const json& j) {
  reject_unknown(j, "", {"system", "data", "train", "outer"});
  TrainConfig c;
  if (j.contains("system")) {
    json s = j.at("system");
    if (!s.is_object()) throw ParseError("config section 'system' must be an object");
    if (!s.contains("kind")) s["kind"] = to_string(c.system.kind);
    try {
      c.system = spec_from_json(s);
    } catch (const ParseError& e) {
      throw ParseError(std::string("config section 'system': ") + e.what());
    } catch (const json::exception& e) {
      throw ParseError(std::string("config section 'system': ") + e.what());
    }
  }

  const json& d = section_or_empty(j, "data");
  reject_unknown(d, "data.",
                 {"mode", "trajectories", "frames", "dt_frame", "substeps", "shift", "seed", "embed_seed", "geometry"});
  std::string mode = to_string(c.data.mode);
  read(d, "data.", "mode", mode);
  c.data.mode = parse_dataset_mode(mode);
  read(d, "data.", "trajectories", c.data.trajectories);
  read(d, "data.", "frames", c.data.frames);
  read(d, "data.", "dt_frame", c.data.dt_frame);
  read(d, "data.", "substeps", c.data.substeps);
  read(d, "data.", "shift", c.data.shift);
  read(d, "data.", "seed", c.data.seed);
  read(d, "data.", "embed_seed", c.data.embed_seed);
  const json& g = section_or_empty(d, "geometry");
  reject_unknown(g, "data.geometry.", {"height", "width", "channels"});
  read(g, "data.geometry.", "height", c.data.geometry.height);
  read(g, "data.geometry.", "width", c.data.geometry.width);
  read(g, "data.geometry.", "channels", c.data.geometry.channels);

  const json& t = section_or_empty(j, "train");
  reject_unknown(t, "train.",
                 {"variant", "beta", "epochs", "batch_size", "lr", "seed", "threshold", "latent", "hidden",
                  "hnn_hidden", "hamilton_midpoint", "id_k1", "id_k2", "id_max_points", "trace_trajectories"});
  std::string variant = to_string(c.variant);
  read(t, "train.", "variant", variant);
  c.variant = parse_variant(variant);
  if (t.contains("beta") && !t.at("beta").is_null()) {
    double beta = 0.0;
    read(t, "train.", "beta", beta);
    c.beta = beta;
  }
  read(t, "train.", "epochs", c.epochs);
  read(t, "train.", "batch_size", c.batch_size);
  read(t, "train.", "lr", c.lr);
  read(t, "train.", "seed", c.seed);
  read(t, "train.", "threshold", c.threshold);
  read(t, "train.", "latent", c.latent);
  read(t, "train.", "hidden", c.hidden);
  read(t, "train.", "hnn_hidden", c.hnn_hidden);
  read(t, "train.", "hamilton_midpoint", c.hamilton_midpoint);
  read(t, "train.", "id_k1", c.id_k1);
  read(t, "train.", "id_k2", c.id_k2);
  read(t, "train.", "id_max_points", c.id_max_points);
  read(t, "train.", "trace_trajectories", c.trace_trajectories);

  const json& o = section_or_empty(j, "outer");
  reject_unknown(o, "outer.", {"epochs", "batch_size", "lr", "early_stop", "patience"});
  read(o, "outer.", "epochs", c.outer_epochs);
  read(o, "outer.", "batch_size", c.outer_batch_size);
  read(o, "outer.", "lr", c.outer_lr);
  read(o, "outer.", "early_stop", c.outer_early_stop);
  read(o, "outer.", "patience", c.outer_patience);

  c.validate();
  return c;
}

void set_config_value(TrainConfig& config, const std::string& key, const std::string& text) {
  json j = config_to_json(config);
  if (key == "system.kind") {
    j["system"] = json{{"kind", text}};
    config = config_from_json(j);
    return;
  }
  json* slot = &j;
  std::size_t start = 0;
  while (true) {
    const std::size_t dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (!slot->is_object() || !slot->contains(part)) throw ParseError("unknown config key '" + key + "'");
    slot = &(*slot)[part];
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  if (slot->is_object()) throw ParseError("config key '" + key + "' names a section, not a value");
  try {
    if (slot->is_string()) {
      *slot = text;
    } else if (slot->is_boolean()) {
      if (text != "true" && text != "false") throw ParseError("");
      *slot = text == "true";
    } else if (slot->is_number_unsigned() || slot->is_number_integer()) {
      std::size_t used = 0;
      const long long v = std::stoll(text, &used);
      if (used != text.size() || (slot->is_number_unsigned() && v < 0)) throw ParseError("");
      *slot = v;
    } else {
      // floats, and beta which may be unset
      if (key == "train.beta" && (text == "null" || text == "table")) {
        *slot = nullptr;
      } else {
        std::size_t used = 0;
        const double v = std::stod(text, &used);
        if (used != text.size()) throw ParseError("");
        *slot = v;
      }
    }
  } catch (const std::exception&) {
    throw ParseError("config key '" + key + "': cannot parse value '" + text + "'");
  }
  config = config_from_json(j);
}

std::vector<std::pair<std::string, std::string>> config_keys() {
  return {
      {"system.kind", "single-pendulum | double-pendulum | elastic-pendulum | reaction-diffusion"},
      {"system.m1", "first mass (kg)"},
      {"system.m2", "second mass (kg)"},
      {"system.l1", "first arm length (m)"},
      {"system.l2", "second arm length (m)"},
      {"system.g", "gravity (m/s^2)"},
      {"system.k", "spring constant (N/m), elastic pendulum"},
      {"system.r0", "spring rest length (m), elastic pendulum"},
      {"system.d1", "u diffusion coefficient"},
      {"system.d2", "v diffusion coefficient"},
      {"system.beta_rd", "reaction-diffusion coupling"},
      {"system.grid", "reaction-diffusion grid size G"},
      {"system.extent", "reaction-diffusion domain side"},
      {"system.angle_range", "initial angles uniform in +-range (rad)"},
      {"system.momentum_range", "initial momenta uniform in +-range"},
      {"system.extension_range", "initial spring extension, relative"},
      {"data.mode", "frames | vectors"},
      {"data.trajectories", "number of simulated trajectories"},
      {"data.frames", "frames per trajectory"},
      {"data.dt_frame", "seconds between frames, 0 for the system default"},
      {"data.substeps", "integrator steps per frame"},
      {"data.shift", "target window offset in frames"},
      {"data.seed", "simulation and split seed"},
      {"data.embed_seed", "vectors-mode embedding seed"},
      {"data.geometry.height", "frame height (px)"},
      {"data.geometry.width", "frame width (px)"},
      {"data.geometry.channels", "1 or 3"},
      {"train.variant", "baseline | pi-ae | pi-vae | hpi-vae"},
      {"train.beta", "reconstruction weight, null for the per-system table"},
      {"train.epochs", "inner training epochs"},
      {"train.batch_size", "inner batch size"},
      {"train.lr", "inner Adam learning rate"},
      {"train.seed", "model initialization and batching seed"},
      {"train.threshold", "active-dimension variance threshold"},
      {"train.latent", "variational latent width (10)"},
      {"train.hidden", "inner hidden width"},
      {"train.hnn_hidden", "Hamiltonian head hidden width"},
      {"train.hamilton_midpoint", "evaluate dH/dz at the midpoint of each pair"},
      {"train.id_k1", "smallest neighbour count for the ID estimate"},
      {"train.id_k2", "largest neighbour count for the ID estimate"},
      {"train.id_max_points", "ID estimate subsample size"},
      {"train.trace_trajectories", "validation trajectories exported as traces"},
      {"outer.epochs", "outer autoencoder epochs"},
      {"outer.batch_size", "outer batch size"},
      {"outer.lr", "outer Adam learning rate"},
      {"outer.early_stop", "validation recon level for early stopping"},
      {"outer.patience", "epochs below early_stop before stopping"},
  };
}

std::string config_hash(const TrainConfig& config) {
  const std::string text = config_to_json(config).dump();
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

TrainConfig desk_config(SystemKind kind, Variant variant, std::uint64_t seed) {
  TrainConfig c;
  c.system = SystemSpec::defaults(kind);
  c.variant = variant;
  c.seed = seed;
  c.data.mode = DatasetMode::vectors;
  c.data.trajectories = 100;
  c.epochs = 300;
  return c;
}

}  // namespace svlab
