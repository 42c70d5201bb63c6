#pragma once

#include "moldsynth/core_types.hpp"

#include <array>
#include <cstdint>
#include <string>
#include <string_view>

namespace moldsynth {

enum class FaultMode : int { None = 0, ShortShot = 1, PressureLoss = 2, ColdMelt = 3 };
inline constexpr int kNumFaultModes = 4;

std::string_view to_string(FaultMode f);
FaultMode parse_fault_mode(std::string_view s);

struct LabelThresholds {
  double min_fill_fraction = 0.98;
  double cavity_pressure_low = 465.0;   // bar
  double cavity_pressure_high = 650.0;  // bar
  double min_cushion_mm = 2.0;

  void validate() const;
};

/// Lumped-parameter process constants. Every field is overridable from the
/// config file.
struct ProcessModel {
  double velocity_tau_s = 0.05;          // first-order lag of screw velocity
  double pressure_tau_s = 0.03;          // lag of hydraulic / cavity pressure
  double cooling_tau_s = 4.0;            // temperature decay toward coolant
  double viscosity_ref_temp_c = 230.0;   // eta = exp(-(T_melt - ref) / scale)
  double viscosity_temp_scale_c = 40.0;
  double dosing_rate_coeff = 1.8;        // cm^3/s per rpm at zero back pressure
  double packing_speed_mm_s = 40.0;      // holding-phase creep at 600 bar, eta = 1
  double pressure_per_velocity = 0.6;    // bar per mm/s (injection pressure)
  double fill_ramp_bar = 400.0;          // injection pressure ramp at full fill
  double cavity_transmission = 0.85;     // cavity / hydraulic pressure in holding
  double ejector_stroke_mm = 40.0;
  double ejection_time_s = 0.2;
  double max_injection_time_s = 5.0;
};

struct SimulatorConfig {
  int sample_period_ms = 10;
  std::array<double, kNumSignals> noise_std{};      // per signal column, physical units
  std::array<double, kNumSetpoints> jitter{};       // relative half-range per setpoint
  std::array<double, kNumFaultModes> fault_mix{};   // indexed by FaultMode
  LabelThresholds label_thresholds;
  double cavity_volume = 50.0;  // cm^3
  double screw_area = 2.0;      // cm^2
  std::uint64_t rng_seed = 0;
  ProcessSetpoints nominal;
  ProcessModel model;

  /// Defaults used for synthetic data.
  static SimulatorConfig defaults();
  /// A shifted, noisier process used as the stand-in for real machine data.
  static SimulatorConfig stand_in_real();

  SimulatorConfig without_noise() const;

  /// Throws ConfigError.
  void validate() const;
};

struct SimulationResult {
  CycleRecord record;  // label left at its default; see label_cycle
  QualityIndicators quality;
};

/// One cycle: dosing -> injection -> holding -> cooling -> ejection.
/// Pure in (setpoints, fault, config, seed).
SimulationResult simulate_cycle(const ProcessSetpoints& setpoints, FaultMode fault, const SimulatorConfig& config,
                                std::uint64_t seed);

/// Good iff fill, peak cavity pressure, and cushion are all within
/// thresholds. Boundaries are inclusive.
Label label_cycle(const QualityIndicators& q, const LabelThresholds& thresholds);

struct ClassMix {
  double good_fraction = 0.4;
  double notgood_fraction = 0.6;
};

struct GenerateOptions {
  Source source = Source::Synthetic;
  std::string id_prefix = "syn";
  std::string name = "synthetic";
  int max_attempts = 1000;
};

/// Exactly round(n * good_fraction) Good cycles, reached by rejection
/// sampling over (fault, jittered setpoints) draws. Cycle k uses the seed
/// base_seed ^ k.
Dataset generate_dataset(const SimulatorConfig& config, int n, const ClassMix& mix, std::uint64_t base_seed,
                         const GenerateOptions& options = {});

/// Uniform draw of every setpoint within nominal * (1 +- jitter).
ProcessSetpoints jitter_setpoints(const ProcessSetpoints& nominal, const std::array<double, kNumSetpoints>& jitter,
                                  std::uint64_t seed);

}  // namespace moldsynth
