#include "moldsynth/json_io.hpp"

#include "moldsynth/storage.hpp"

#include <cmath>
#include <limits>

namespace moldsynth {

namespace {

template <typename T>
void take(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

template <size_t N>
void take_array(const json& j, const char* key, std::array<double, N>& out) {
  if (!j.contains(key)) return;
  const auto& a = j.at(key);
  if (!a.is_array() || a.size() != N) {
    throw ConfigError(std::string(key) + " must be an array of " + std::to_string(N) + " numbers");
  }
  for (size_t i = 0; i < N; ++i) out[i] = a[i].get<double>();
}

std::vector<double> vec_to_std(const Vec& v) { return {v.data(), v.data() + v.size()}; }

Vec std_to_vec(const std::vector<double>& v) {
  return Eigen::Map<const Vec>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

void reject_unknown_keys(const json& j, std::initializer_list<std::string_view> allowed, std::string_view where) {
  if (!j.is_object()) throw ConfigError(std::string(where) + " must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    bool ok = false;
    for (auto a : allowed) ok = ok || key == a;
    if (!ok) throw ConfigError("unknown key '" + key + "' in " + std::string(where));
  }
}

json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

double number_or_nan(const json& j) {
  return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>();
}

json to_json(const ModelConfig& c) {
  return {{"learning_rate", c.learning_rate},   {"input_dim", c.input_dim},
          {"output_size", c.output_size},       {"units", c.units},
          {"dropout_inner", c.dropout_inner},   {"dropout_final", c.dropout_final},
          {"adam_beta1", c.adam_beta1},         {"adam_beta2", c.adam_beta2},
          {"adam_epsilon", c.adam_epsilon},     {"batch_size", c.batch_size},
          {"epochs", c.epochs},                 {"seed", c.seed},
          {"standardize", c.standardize}};
}

ModelConfig model_config_from_json(const json& j, ModelConfig c) {
  try {
    reject_unknown_keys(j,
                        {"learning_rate", "input_dim", "output_size", "units", "dropout_inner", "dropout_final",
                         "adam_beta1", "adam_beta2", "adam_epsilon", "batch_size", "epochs", "seed", "standardize"},
                        "model config");
    take(j, "learning_rate", c.learning_rate);
    take(j, "input_dim", c.input_dim);
    take(j, "output_size", c.output_size);
    take(j, "units", c.units);
    take(j, "dropout_inner", c.dropout_inner);
    take(j, "dropout_final", c.dropout_final);
    take(j, "adam_beta1", c.adam_beta1);
    take(j, "adam_beta2", c.adam_beta2);
    take(j, "adam_epsilon", c.adam_epsilon);
    take(j, "batch_size", c.batch_size);
    take(j, "epochs", c.epochs);
    take(j, "seed", c.seed);
    take(j, "standardize", c.standardize);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("model config: ") + e.what());
  }
  c.validate();
  return c;
}

json to_json(const ProcessSetpoints& s) {
  json j = json::object();
  const auto values = s.as_array();
  for (size_t i = 0; i < values.size(); ++i) j[std::string(setpoint_names()[i])] = values[i];
  return j;
}

ProcessSetpoints setpoints_from_json(const json& j, ProcessSetpoints base) {
  if (!j.is_object()) throw ConfigError("setpoints must be a JSON object");
  auto values = base.as_array();
  for (const auto& [key, value] : j.items()) {
    size_t i = 0;
    while (i < values.size() && setpoint_names()[i] != key) ++i;
    if (i == values.size()) throw ConfigError("unknown setpoint '" + key + "'");
    try {
      values[i] = value.get<double>();
    } catch (const json::exception& e) {
      throw ConfigError("setpoint " + key + ": " + e.what());
    }
  }
  return ProcessSetpoints::from_array(values);
}

json to_json(const SimulatorConfig& c) {
  const auto& th = c.label_thresholds;
  const auto& m = c.model;
  return {{"sample_period_ms", c.sample_period_ms},
          {"noise_std", c.noise_std},
          {"jitter", c.jitter},
          {"fault_mix", c.fault_mix},
          {"label_thresholds",
           {{"min_fill_fraction", th.min_fill_fraction},
            {"cavity_pressure_low", th.cavity_pressure_low},
            {"cavity_pressure_high", th.cavity_pressure_high},
            {"min_cushion_mm", th.min_cushion_mm}}},
          {"cavity_volume", c.cavity_volume},
          {"screw_area", c.screw_area},
          {"rng_seed", c.rng_seed},
          {"nominal", to_json(c.nominal)},
          {"model",
           {{"velocity_tau_s", m.velocity_tau_s},
            {"pressure_tau_s", m.pressure_tau_s},
            {"cooling_tau_s", m.cooling_tau_s},
            {"viscosity_ref_temp_c", m.viscosity_ref_temp_c},
            {"viscosity_temp_scale_c", m.viscosity_temp_scale_c},
            {"dosing_rate_coeff", m.dosing_rate_coeff},
            {"packing_speed_mm_s", m.packing_speed_mm_s},
            {"pressure_per_velocity", m.pressure_per_velocity},
            {"fill_ramp_bar", m.fill_ramp_bar},
            {"cavity_transmission", m.cavity_transmission},
            {"ejector_stroke_mm", m.ejector_stroke_mm},
            {"ejection_time_s", m.ejection_time_s},
            {"max_injection_time_s", m.max_injection_time_s}}}};
}

SimulatorConfig simulator_config_from_json(const json& j, SimulatorConfig c) {
  try {
    reject_unknown_keys(j,
                        {"sample_period_ms", "noise_std", "jitter", "fault_mix", "label_thresholds", "cavity_volume",
                         "screw_area", "rng_seed", "nominal", "model"},
                        "simulator config");
    take(j, "sample_period_ms", c.sample_period_ms);
    take_array(j, "noise_std", c.noise_std);
    take_array(j, "jitter", c.jitter);
    take_array(j, "fault_mix", c.fault_mix);
    if (j.contains("label_thresholds")) {
      const auto& t = j.at("label_thresholds");
      reject_unknown_keys(t, {"min_fill_fraction", "cavity_pressure_low", "cavity_pressure_high", "min_cushion_mm"},
                          "label_thresholds");
      auto& th = c.label_thresholds;
      take(t, "min_fill_fraction", th.min_fill_fraction);
      take(t, "cavity_pressure_low", th.cavity_pressure_low);
      take(t, "cavity_pressure_high", th.cavity_pressure_high);
      take(t, "min_cushion_mm", th.min_cushion_mm);
    }
    take(j, "cavity_volume", c.cavity_volume);
    take(j, "screw_area", c.screw_area);
    take(j, "rng_seed", c.rng_seed);
    if (j.contains("nominal")) c.nominal = setpoints_from_json(j.at("nominal"), c.nominal);
    if (j.contains("model")) {
      const auto& mj = j.at("model");
      reject_unknown_keys(mj,
                          {"velocity_tau_s", "pressure_tau_s", "cooling_tau_s", "viscosity_ref_temp_c",
                           "viscosity_temp_scale_c", "dosing_rate_coeff", "packing_speed_mm_s",
                           "pressure_per_velocity", "fill_ramp_bar", "cavity_transmission", "ejector_stroke_mm",
                           "ejection_time_s", "max_injection_time_s"},
                          "simulator model");
      auto& m = c.model;
      take(mj, "velocity_tau_s", m.velocity_tau_s);
      take(mj, "pressure_tau_s", m.pressure_tau_s);
      take(mj, "cooling_tau_s", m.cooling_tau_s);
      take(mj, "viscosity_ref_temp_c", m.viscosity_ref_temp_c);
      take(mj, "viscosity_temp_scale_c", m.viscosity_temp_scale_c);
      take(mj, "dosing_rate_coeff", m.dosing_rate_coeff);
      take(mj, "packing_speed_mm_s", m.packing_speed_mm_s);
      take(mj, "pressure_per_velocity", m.pressure_per_velocity);
      take(mj, "fill_ramp_bar", m.fill_ramp_bar);
      take(mj, "cavity_transmission", m.cavity_transmission);
      take(mj, "ejector_stroke_mm", m.ejector_stroke_mm);
      take(mj, "ejection_time_s", m.ejection_time_s);
      take(mj, "max_injection_time_s", m.max_injection_time_s);
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("simulator config: ") + e.what());
  }
  c.validate();
  return c;
}

json to_json(const EvalResult& r) {
  return {{"accuracy", number_or_null(r.accuracy)},
          {"loss", number_or_null(r.loss)},
          {"f1", number_or_null(r.f1)},
          {"auc_roc", number_or_null(r.auc_roc)},
          {"confusion", {{"tp", r.confusion.tp}, {"fp", r.confusion.fp}, {"tn", r.confusion.tn}, {"fn", r.confusion.fn}}}};
}

EvalResult eval_result_from_json(const json& j) {
  EvalResult r;
  r.accuracy = number_or_nan(j.at("accuracy"));
  r.loss = number_or_nan(j.at("loss"));
  r.f1 = number_or_nan(j.at("f1"));
  r.auc_roc = number_or_nan(j.at("auc_roc"));
  const auto& c = j.at("confusion");
  r.confusion = {c.at("tp").get<long long>(), c.at("fp").get<long long>(), c.at("tn").get<long long>(),
                 c.at("fn").get<long long>()};
  return r;
}

json to_json(const EpochMetrics& m) {
  return {{"train_loss", number_or_null(m.train_loss)},
          {"train_accuracy", number_or_null(m.train_accuracy)},
          {"val_loss", number_or_null(m.val_loss)},
          {"val_accuracy", number_or_null(m.val_accuracy)}};
}

json to_json(const Model& m) {
  const auto& flat = m.params.flat();
  return {{"format_version", 1},
          {"config", to_json(m.config)},
          {"schema_fingerprint", m.schema_fingerprint},
          {"standardizer", {{"mean", vec_to_std(m.standardizer.mean)}, {"scale", vec_to_std(m.standardizer.scale)}}},
          {"params", std::vector<float>(flat.data(), flat.data() + flat.size())}};
}

Model model_from_json(const json& j) {
  try {
    if (j.at("format_version").get<int>() != 1) throw DataError("unsupported model format_version");
    Model m;
    m.config = model_config_from_json(j.at("config"));
    m.schema_fingerprint = j.at("schema_fingerprint").get<std::string>();
    m.standardizer.mean = std_to_vec(j.at("standardizer").at("mean").get<std::vector<double>>());
    m.standardizer.scale = std_to_vec(j.at("standardizer").at("scale").get<std::vector<double>>());
    const auto flat = j.at("params").get<std::vector<float>>();
    m.params = LstmParams<TrainScalar>(m.config.input_dim, m.config.units);
    if (static_cast<Eigen::Index>(flat.size()) != m.params.flat().size()) {
      throw DataError("model has " + std::to_string(flat.size()) + " parameters, config implies " +
                      std::to_string(m.params.flat().size()));
    }
    for (size_t i = 0; i < flat.size(); ++i) m.params.flat()[static_cast<Eigen::Index>(i)] = flat[i];
    if (m.standardizer.mean.size() != m.config.input_dim || m.standardizer.scale.size() != m.config.input_dim) {
      throw DataError("standardizer width does not match input_dim");
    }
    return m;
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed model artifact: ") + e.what());
  }
}

void save_model(const Model& m, const std::filesystem::path& path) { write_text_file(path, to_json(m).dump() + "\n"); }

Model load_model(const std::filesystem::path& path) {
  json j;
  try {
    j = json::parse(read_text_file(path));
  } catch (const json::parse_error& e) {
    throw DataError(path.string() + ": " + e.what());
  }
  return model_from_json(j);
}

}  // namespace moldsynth
