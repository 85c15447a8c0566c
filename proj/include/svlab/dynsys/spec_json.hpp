#pragma once

#include "json.hpp"
#include "svlab/dynsys/system.hpp"

namespace svlab {

nlohmann::json spec_to_json(const SystemSpec& spec);
/// Missing keys keep the kind's defaults; unknown keys are rejected.
SystemSpec spec_from_json(const nlohmann::json& j);

}  // namespace svlab
