#include "svlab/models/model_io.hpp"

#include <fstream>
#include "json.hpp"

#include "svlab/error.hpp"

namespace svlab {

namespace {

using nlohmann::json;

constexpr const char* kPairing = "q_i = z[i], p_i = z[latent/2 + i]";

void write_json(const std::filesystem::path& path, const json& j) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << j.dump(2) << '\n';
  if (!out) throw IoError("write failed: " + path.string());
}

json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

json expect_kind(const std::filesystem::path& checkpoint, const char* kind) {
  json j = read_json(sidecar_path(checkpoint));
  if (j.value("format", "") != "svlab-model" || j.value("kind", "") != kind) {
    throw ParseError(sidecar_path(checkpoint).string() + ": not a " + std::string(kind) + " model sidecar");
  }
  return j;
}

}  // namespace

std::filesystem::path sidecar_path(const std::filesystem::path& checkpoint) {
  auto p = checkpoint;
  return p.replace_extension(".json");
}

std::vector<NamedTensor> snapshot_parameters(const std::vector<std::pair<std::string, Var>>& params) {
  std::vector<NamedTensor> out;
  out.reserve(params.size());
  for (const auto& [name, v] : params) out.push_back({name, v.value()});
  return out;
}

void assign_parameters(const std::vector<std::pair<std::string, Var>>& params, const std::vector<NamedTensor>& tensors) {
  if (tensors.size() != params.size()) {
    throw ParseError("checkpoint holds " + std::to_string(tensors.size()) + " tensors, model expects " +
                     std::to_string(params.size()));
  }
  for (const auto& [name, v] : params) {
    const Tensor& t = find_tensor(tensors, name);
    if (t.shape() != v.shape()) throw ParseError("checkpoint tensor '" + name + "' has the wrong shape");
    Var param = v;
    param.mutable_value() = t;
  }
}

void save_inner(const std::filesystem::path& path, const InnerModel& model) {
  const auto& c = model.config();
  save_tensors(path, snapshot_parameters(model.named_parameters()));
  json j{{"format", "svlab-model"},
         {"kind", "inner"},
         {"variant", to_string(c.variant)},
         {"input_dim", c.input_dim},
         {"hidden", c.hidden},
         {"latent", c.latent},
         {"hnn_hidden", c.hnn_hidden},
         {"pairing", is_second_order(c.variant) ? json(kPairing) : json(nullptr)}};
  write_json(sidecar_path(path), j);
}

InnerModel load_inner(const std::filesystem::path& path) {
  const json j = expect_kind(path, "inner");
  InnerConfig c;
  try {
    c.variant = parse_variant(j.at("variant").get<std::string>());
    c.input_dim = j.at("input_dim").get<std::size_t>();
    c.hidden = j.at("hidden").get<std::size_t>();
    c.latent = j.at("latent").get<std::size_t>();
    c.hnn_hidden = j.at("hnn_hidden").get<std::size_t>();
  } catch (const json::exception& e) {
    throw ParseError(sidecar_path(path).string() + ": " + e.what());
  }
  if (is_second_order(c.variant) && j.value("pairing", std::string()) != kPairing) {
    throw ParseError(sidecar_path(path).string() + ": unsupported (q, p) pairing convention");
  }
  Rng rng(0);
  InnerModel model(c, rng);
  assign_parameters(model.named_parameters(), load_tensors(path));
  return model;
}

void save_outer(const std::filesystem::path& path, const OuterAE& model) {
  const auto& g = model.geometry();
  save_tensors(path, snapshot_parameters(model.named_parameters()));
  json j{{"format", "svlab-model"},
         {"kind", "outer"},
         {"latent", kOuterLatent},
         {"geometry", {{"height", g.height}, {"width", g.width}, {"channels", g.channels}}}};
  write_json(sidecar_path(path), j);
}

OuterAE load_outer(const std::filesystem::path& path) {
  const json j = expect_kind(path, "outer");
  FrameGeometry g;
  try {
    g.height = j.at("geometry").at("height").get<std::size_t>();
    g.width = j.at("geometry").at("width").get<std::size_t>();
    g.channels = j.at("geometry").at("channels").get<std::size_t>();
  } catch (const json::exception& e) {
    throw ParseError(sidecar_path(path).string() + ": " + e.what());
  }
  Rng rng(0);
  OuterAE model(g, rng);
  assign_parameters(model.named_parameters(), load_tensors(path));
  return model;
}

}  // namespace svlab
