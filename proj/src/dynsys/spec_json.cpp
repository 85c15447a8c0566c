#include "svlab/dynsys/spec_json.hpp"

#include "svlab/error.hpp"

namespace svlab {

namespace {

struct Field {
  const char* name;
  double SystemSpec::*member;
};

constexpr Field kFields[] = {
    {"m1", &SystemSpec::m1},
    {"m2", &SystemSpec::m2},
    {"l1", &SystemSpec::l1},
    {"l2", &SystemSpec::l2},
    {"g", &SystemSpec::g},
    {"k", &SystemSpec::k},
    {"r0", &SystemSpec::r0},
    {"d1", &SystemSpec::d1},
    {"d2", &SystemSpec::d2},
    {"beta_rd", &SystemSpec::beta_rd},
    {"extent", &SystemSpec::extent},
    {"angle_range", &SystemSpec::angle_range},
    {"momentum_range", &SystemSpec::momentum_range},
    {"extension_range", &SystemSpec::extension_range},
};

}  // namespace

nlohmann::json spec_to_json(const SystemSpec& spec) {
  nlohmann::json j;
  j["kind"] = to_string(spec.kind);
  for (const auto& f : kFields) j[f.name] = spec.*f.member;
  j["grid"] = spec.grid;
  return j;
}

SystemSpec spec_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("kind")) throw ParseError("system spec must be an object with a 'kind'");
  SystemSpec spec = SystemSpec::defaults(parse_system_kind(j.at("kind").get<std::string>()));
  for (const auto& [key, value] : j.items()) {
    if (key == "kind") continue;
    if (key == "grid") {
      spec.grid = value.get<int>();
      continue;
    }
    bool known = false;
    for (const auto& f : kFields) {
      if (key == f.name) {
        spec.*f.member = value.get<double>();
        known = true;
      }
    }
    if (!known) throw ParseError("unknown system spec key '" + key + "'");
  }
  spec.validate();
  return spec;
}

}  // namespace svlab
