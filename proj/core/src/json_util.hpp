#pragma once

#include <json.hpp>

#include "lap/config.hpp"
#include "lap/model.hpp"

namespace lap {

nlohmann::json model_config_to_json(const ModelConfig& c);
ModelConfig model_config_from_json(const nlohmann::json& j, const std::string& source);

nlohmann::json train_config_to_json(const TrainConfig& c);
TrainConfig train_config_from_json(const nlohmann::json& j, const std::string& source);

}  // namespace lap
