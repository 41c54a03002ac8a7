#pragma once

#include <nlohmann/json.hpp>

namespace atomopt::learned {
struct FeatureConfig;

nlohmann::ordered_json feature_config_to_json(const FeatureConfig& fc);
FeatureConfig feature_config_from_json(const nlohmann::ordered_json& j);

}  // namespace atomopt::learned
