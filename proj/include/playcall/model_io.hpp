#pragma once

#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

#include "playcall/estimation.hpp"

namespace playcall {

// JSON document for one fitted team model. Doubles are written in shortest
// round-trip form, so load(save(m)) reproduces every parameter bit-for-bit.
nlohmann::json model_to_json(const FittedModel& model);
FittedModel model_from_json(const nlohmann::json& doc);

void save_model(const FittedModel& model, const std::filesystem::path& path);
FittedModel load_model(const std::filesystem::path& path);

}  // namespace playcall
