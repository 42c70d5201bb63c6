#pragma once

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace moldsynth {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

// Error hierarchy. The CLI maps these onto distinct exit codes.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ConfigError : Error {
  using Error::Error;
};
struct DataError : Error {
  using Error::Error;
};
struct SimulationError : Error {
  using Error::Error;
};
struct CancelledError : Error {
  using Error::Error;
};

enum class FeatureKind { Signal, Setpoint };

struct FeatureDescriptor {
  std::string_view name;
  std::string_view unit;
  FeatureKind kind;
};

inline constexpr int kNumFeatures = 34;
inline constexpr int kNumSignals = 23;
inline constexpr int kNumSetpoints = 11;

/// Column indices of the canonical schema. Signals first, then the eleven
/// machine setpoints repeated as constant columns.
namespace col {
enum : int {
  screw_position = 0,
  screw_velocity,
  injection_pressure,
  cavity_pressure,
  holding_pressure_actual,
  back_pressure_actual,
  melt_temp,
  mold_temp,
  barrel_zone1,
  barrel_zone2,
  barrel_zone3,
  nozzle_temp,
  screw_rpm_actual,
  fill_volume,
  flow_rate,
  clamp_force,
  ejector_position,
  ejector_speed,
  coolant_temp,
  coolant_flow,
  cushion,
  phase_id,
  elapsed_time,
  // setpoints
  sp_injection_speed,
  sp_changeover_point,
  sp_holding_pressure,
  sp_holding_time,
  sp_back_pressure,
  sp_screw_rpm,
  sp_injection_volume,
  sp_piston_stroke,
  sp_mold_temp,
  sp_melt_temp,
  sp_cooling_time,
};
}  // namespace col

/// Cycle phases, encoded in the phase_id column as 0..4.
enum class Phase : int { Dosing = 0, Injection = 1, Holding = 2, Cooling = 3, Ejection = 4 };

std::string_view phase_name(Phase p);

class FeatureSchema {
 public:
  /// The canonical 34-column schema.
  static const FeatureSchema& canonical();

  explicit FeatureSchema(std::vector<FeatureDescriptor> features);

  int size() const { return static_cast<int>(features_.size()); }
  const FeatureDescriptor& operator[](int i) const { return features_[static_cast<size_t>(i)]; }
  const std::vector<FeatureDescriptor>& features() const { return features_; }
  std::vector<std::string> names() const;
  /// -1 when absent.
  int index_of(std::string_view name) const;

  /// Hex FNV-1a 64 over "name|unit|kind\n" for every feature in order.
  std::string fingerprint() const;

  bool operator==(const FeatureSchema& other) const;

 private:
  std::vector<FeatureDescriptor> features_;
};

enum class LabelValue { Good, NotGood };

/// Binary quality label. Good is the positive class and maps to target 1.0.
struct Label {
  LabelValue value = LabelValue::Good;

  static Label good() { return {LabelValue::Good}; }
  static Label not_good() { return {LabelValue::NotGood}; }

  double target() const { return value == LabelValue::Good ? 1.0 : 0.0; }
  bool is_good() const { return value == LabelValue::Good; }
  bool operator==(const Label&) const = default;
};

std::string_view to_string(LabelValue v);
LabelValue parse_label(std::string_view s);

enum class Source { Real, Synthetic };
std::string_view to_string(Source s);
Source parse_source(std::string_view s);

struct ProcessSetpoints {
  double injection_speed = 400.0;   // mm/s
  double changeover_point = 55.0;   // mm
  double holding_pressure = 600.0;  // bar
  double holding_time = 0.5;        // s
  double back_pressure = 80.0;      // bar
  double screw_rpm = 150.0;         // 1/min
  double injection_volume = 53.0;   // cm^3
  double piston_stroke = 300.0;     // mm
  double mold_temp = 60.0;          // degC
  double melt_temp = 230.0;         // degC
  double cooling_time = 0.6;        // s

  std::array<double, kNumSetpoints> as_array() const;
  static ProcessSetpoints from_array(const std::array<double, kNumSetpoints>& a);
  /// Empty when valid.
  std::vector<std::string> violations() const;
  bool operator==(const ProcessSetpoints&) const = default;
};

/// Setpoint names in canonical column order.
const std::array<std::string_view, kNumSetpoints>& setpoint_names();

struct QualityIndicators {
  double fill_fraction = 0.0;
  double peak_cavity_pressure = 0.0;  // bar
  double min_cushion = 0.0;           // mm
  bool operator==(const QualityIndicators&) const = default;
};

struct CycleRecord {
  std::string cycle_id;
  Source source = Source::Synthetic;
  Label label;
  int sample_period_ms = 10;
  Mat samples;  // T x 34
  ProcessSetpoints setpoints;
  std::optional<QualityIndicators> quality;

  Eigen::Index length() const { return samples.rows(); }
};

bool operator==(const CycleRecord& a, const CycleRecord& b);

/// Fill the setpoint columns of `samples` with constant values.
void stamp_setpoints(Mat& samples, const ProcessSetpoints& sp);

struct Dataset {
  std::string name;
  std::vector<CycleRecord> records;

  size_t size() const { return records.size(); }
  bool empty() const { return records.empty(); }
  size_t count(LabelValue v) const;
  size_t count(Source s) const;
};

bool operator==(const Dataset& a, const Dataset& b);

struct ClassBalance {
  double good_fraction;
  double notgood_fraction;
};

/// Throws DataError on an empty dataset.
ClassBalance class_balance(const Dataset& dataset);

struct Violation {
  std::string what;
};

/// Every violated record invariant; empty means the record is valid.
std::vector<Violation> validate_cycle(const CycleRecord& record,
                                      const FeatureSchema& schema = FeatureSchema::canonical());

/// Round half away from zero.
long long round_half_away(double x);

}  // namespace moldsynth
