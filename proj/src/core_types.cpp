#include "moldsynth/core_types.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <set>

namespace moldsynth {

namespace {

std::vector<FeatureDescriptor> canonical_features() {
  using K = FeatureKind;
  return {
      {"screw_position_mm", "mm", K::Signal},
      {"screw_velocity_mm_s", "mm/s", K::Signal},
      {"injection_pressure_bar", "bar", K::Signal},
      {"cavity_pressure_bar", "bar", K::Signal},
      {"holding_pressure_actual_bar", "bar", K::Signal},
      {"back_pressure_actual_bar", "bar", K::Signal},
      {"melt_temp_C", "degC", K::Signal},
      {"mold_temp_C", "degC", K::Signal},
      {"barrel_zone1_C", "degC", K::Signal},
      {"barrel_zone2_C", "degC", K::Signal},
      {"barrel_zone3_C", "degC", K::Signal},
      {"nozzle_temp_C", "degC", K::Signal},
      {"screw_rpm_actual", "1/min", K::Signal},
      {"fill_volume_cm3", "cm3", K::Signal},
      {"flow_rate_cm3_s", "cm3/s", K::Signal},
      {"clamp_force_kN", "kN", K::Signal},
      {"ejector_position_mm", "mm", K::Signal},
      {"ejector_speed_mm_s", "mm/s", K::Signal},
      {"coolant_temp_C", "degC", K::Signal},
      {"coolant_flow_l_min", "l/min", K::Signal},
      {"cushion_mm", "mm", K::Signal},
      {"phase_id", "-", K::Signal},
      {"elapsed_time_s", "s", K::Signal},
      {"injection_speed", "mm/s", K::Setpoint},
      {"changeover_point", "mm", K::Setpoint},
      {"holding_pressure", "bar", K::Setpoint},
      {"holding_time", "s", K::Setpoint},
      {"back_pressure", "bar", K::Setpoint},
      {"screw_rpm", "1/min", K::Setpoint},
      {"injection_volume", "cm3", K::Setpoint},
      {"piston_stroke", "mm", K::Setpoint},
      {"mold_temp", "degC", K::Setpoint},
      {"melt_temp", "degC", K::Setpoint},
      {"cooling_time", "s", K::Setpoint},
  };
}

}  // namespace

std::string_view phase_name(Phase p) {
  switch (p) {
    case Phase::Dosing: return "dosing";
    case Phase::Injection: return "injection";
    case Phase::Holding: return "holding";
    case Phase::Cooling: return "cooling";
    case Phase::Ejection: return "ejection";
  }
  return "unknown";
}

const FeatureSchema& FeatureSchema::canonical() {
  static const FeatureSchema schema(canonical_features());
  return schema;
}

FeatureSchema::FeatureSchema(std::vector<FeatureDescriptor> features) : features_(std::move(features)) {
  std::set<std::string_view> seen;
  for (const auto& f : features_) {
    if (!seen.insert(f.name).second) throw ConfigError("duplicate feature name: " + std::string(f.name));
  }
}

std::vector<std::string> FeatureSchema::names() const {
  std::vector<std::string> out;
  out.reserve(features_.size());
  for (const auto& f : features_) out.emplace_back(f.name);
  return out;
}

int FeatureSchema::index_of(std::string_view name) const {
  for (size_t i = 0; i < features_.size(); ++i) {
    if (features_[i].name == name) return static_cast<int>(i);
  }
  return -1;
}

std::string FeatureSchema::fingerprint() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto feed = [&h](std::string_view s) {
    for (unsigned char ch : s) {
      h ^= ch;
      h *= 0x100000001b3ULL;
    }
  };
  for (const auto& f : features_) {
    feed(f.name);
    feed("|");
    feed(f.unit);
    feed("|");
    feed(f.kind == FeatureKind::Signal ? "signal" : "setpoint");
    feed("\n");
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

bool FeatureSchema::operator==(const FeatureSchema& other) const {
  if (features_.size() != other.features_.size()) return false;
  for (size_t i = 0; i < features_.size(); ++i) {
    const auto& a = features_[i];
    const auto& b = other.features_[i];
    if (a.name != b.name || a.unit != b.unit || a.kind != b.kind) return false;
  }
  return true;
}

std::string_view to_string(LabelValue v) { return v == LabelValue::Good ? "good" : "not_good"; }

LabelValue parse_label(std::string_view s) {
  if (s == "good") return LabelValue::Good;
  if (s == "not_good") return LabelValue::NotGood;
  throw DataError("unknown label '" + std::string(s) + "'");
}

std::string_view to_string(Source s) { return s == Source::Real ? "real" : "synthetic"; }

Source parse_source(std::string_view s) {
  if (s == "real") return Source::Real;
  if (s == "synthetic") return Source::Synthetic;
  throw DataError("unknown source '" + std::string(s) + "'");
}

const std::array<std::string_view, kNumSetpoints>& setpoint_names() {
  static const std::array<std::string_view, kNumSetpoints> names = {
      "injection_speed", "changeover_point", "holding_pressure", "holding_time",
      "back_pressure",   "screw_rpm",        "injection_volume", "piston_stroke",
      "mold_temp",       "melt_temp",        "cooling_time"};
  return names;
}

std::array<double, kNumSetpoints> ProcessSetpoints::as_array() const {
  return {injection_speed, changeover_point, holding_pressure, holding_time,
          back_pressure,   screw_rpm,        injection_volume, piston_stroke,
          mold_temp,       melt_temp,        cooling_time};
}

ProcessSetpoints ProcessSetpoints::from_array(const std::array<double, kNumSetpoints>& a) {
  ProcessSetpoints s;
  s.injection_speed = a[0];
  s.changeover_point = a[1];
  s.holding_pressure = a[2];
  s.holding_time = a[3];
  s.back_pressure = a[4];
  s.screw_rpm = a[5];
  s.injection_volume = a[6];
  s.piston_stroke = a[7];
  s.mold_temp = a[8];
  s.melt_temp = a[9];
  s.cooling_time = a[10];
  return s;
}

std::vector<std::string> ProcessSetpoints::violations() const {
  std::vector<std::string> out;
  const auto values = as_array();
  for (int i = 0; i < kNumSetpoints; ++i) {
    const double v = values[static_cast<size_t>(i)];
    if (!std::isfinite(v) || v <= 0.0) {
      out.push_back("setpoint " + std::string(setpoint_names()[static_cast<size_t>(i)]) + " must be positive");
    }
  }
  if (!(changeover_point < piston_stroke)) out.emplace_back("changeover_point must be below piston_stroke");
  return out;
}

bool operator==(const CycleRecord& a, const CycleRecord& b) {
  if (a.cycle_id != b.cycle_id || a.source != b.source || !(a.label == b.label) ||
      a.sample_period_ms != b.sample_period_ms || !(a.setpoints == b.setpoints) || a.quality != b.quality) {
    return false;
  }
  if (a.samples.rows() != b.samples.rows() || a.samples.cols() != b.samples.cols()) return false;
  // Bitwise comparison so that -0.0 != 0.0 and NaN payloads are caught.
  return std::memcmp(a.samples.data(), b.samples.data(),
                     sizeof(double) * static_cast<size_t>(a.samples.size())) == 0;
}

void stamp_setpoints(Mat& samples, const ProcessSetpoints& sp) {
  const auto values = sp.as_array();
  for (int i = 0; i < kNumSetpoints; ++i) {
    samples.col(kNumSignals + i).setConstant(values[static_cast<size_t>(i)]);
  }
}

size_t Dataset::count(LabelValue v) const {
  size_t n = 0;
  for (const auto& r : records) n += r.label.value == v ? 1 : 0;
  return n;
}

size_t Dataset::count(Source s) const {
  size_t n = 0;
  for (const auto& r : records) n += r.source == s ? 1 : 0;
  return n;
}

bool operator==(const Dataset& a, const Dataset& b) {
  return a.name == b.name && a.records == b.records;
}

ClassBalance class_balance(const Dataset& dataset) {
  if (dataset.empty()) throw DataError("class_balance: dataset '" + dataset.name + "' is empty");
  const auto n = static_cast<double>(dataset.size());
  const auto good = static_cast<double>(dataset.count(LabelValue::Good));
  const auto bad = static_cast<double>(dataset.count(LabelValue::NotGood));
  return {good / n, bad / n};
}

std::vector<Violation> validate_cycle(const CycleRecord& record, const FeatureSchema& schema) {
  std::vector<Violation> out;
  const Mat& x = record.samples;
  if (x.cols() != schema.size()) {
    out.push_back({"column count: expected " + std::to_string(schema.size()) + ", got " +
                   std::to_string(x.cols())});
  }
  if (x.rows() < 2) out.push_back({"length: T must be >= 2, got " + std::to_string(x.rows())});
  if (record.sample_period_ms <= 0) out.push_back({"sample_period_ms must be positive"});

  for (Eigen::Index c = 0; c < x.cols(); ++c) {
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
      if (!std::isfinite(x(r, c))) {
        out.push_back({"non-finite value at row " + std::to_string(r) + ", col " + std::to_string(c)});
      }
    }
  }

  const Eigen::Index ncheck = std::min<Eigen::Index>(x.cols(), schema.size());
  for (Eigen::Index c = 0; c < ncheck; ++c) {
    if (schema[static_cast<int>(c)].kind != FeatureKind::Setpoint || x.rows() == 0) continue;
    const double first = x(0, c);
    for (Eigen::Index r = 1; r < x.rows(); ++r) {
      if (!(x(r, c) == first) && std::isfinite(x(r, c))) {
        out.push_back({"setpoint column '" + std::string(schema[static_cast<int>(c)].name) +
                       "' not constant (row " + std::to_string(r) + ")"});
        break;
      }
    }
  }
  return out;
}

long long round_half_away(double x) { return static_cast<long long>(std::llround(x)); }

}  // namespace moldsynth
