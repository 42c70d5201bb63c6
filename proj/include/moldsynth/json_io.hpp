#pragma once

// JSON mappings for configurations, metrics and trained models. Every
// from_json accepts a partial object and keeps defaults for missing keys;
// unknown keys are rejected so that typos in config files surface.

#include "moldsynth/core_types.hpp"
#include "moldsynth/lstm.hpp"
#include "moldsynth/metrics.hpp"
#include "moldsynth/simulator.hpp"
#include "moldsynth/training.hpp"

#include <json.hpp>

#include <filesystem>

namespace moldsynth {

using nlohmann::json;

json to_json(const ModelConfig& c);
ModelConfig model_config_from_json(const json& j, ModelConfig base = {});

json to_json(const ProcessSetpoints& s);
ProcessSetpoints setpoints_from_json(const json& j, ProcessSetpoints base = {});

json to_json(const SimulatorConfig& c);
SimulatorConfig simulator_config_from_json(const json& j, SimulatorConfig base = SimulatorConfig::defaults());

json to_json(const EvalResult& r);
EvalResult eval_result_from_json(const json& j);

json to_json(const EpochMetrics& m);

/// Non-finite doubles become null so that the document stays valid JSON.
json number_or_null(double v);
double number_or_nan(const json& j);

/// Model artifact: config, schema fingerprint, standardizer, flat params.
json to_json(const Model& m);
Model model_from_json(const json& j);

void save_model(const Model& m, const std::filesystem::path& path);
Model load_model(const std::filesystem::path& path);

/// Throws ConfigError listing any key of `j` not in `allowed`.
void reject_unknown_keys(const json& j, std::initializer_list<std::string_view> allowed, std::string_view where);

}  // namespace moldsynth
