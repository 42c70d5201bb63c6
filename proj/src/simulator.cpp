#include "moldsynth/simulator.hpp"

#include "moldsynth/random.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace moldsynth {

std::string_view to_string(FaultMode f) {
  switch (f) {
    case FaultMode::None: return "none";
    case FaultMode::ShortShot: return "short_shot";
    case FaultMode::PressureLoss: return "pressure_loss";
    case FaultMode::ColdMelt: return "cold_melt";
  }
  return "unknown";
}

FaultMode parse_fault_mode(std::string_view s) {
  for (int i = 0; i < kNumFaultModes; ++i) {
    if (to_string(static_cast<FaultMode>(i)) == s) return static_cast<FaultMode>(i);
  }
  throw ConfigError("unknown fault mode '" + std::string(s) + "'");
}

void LabelThresholds::validate() const {
  if (!(min_fill_fraction > 0.0 && min_fill_fraction <= 1.0)) throw ConfigError("min_fill_fraction must be in (0, 1]");
  if (!(cavity_pressure_low > 0.0) || !(cavity_pressure_low < cavity_pressure_high)) {
    throw ConfigError("cavity pressure band must satisfy 0 < low < high");
  }
  if (!(min_cushion_mm > 0.0)) throw ConfigError("min_cushion_mm must be positive");
}

SimulatorConfig SimulatorConfig::defaults() {
  SimulatorConfig c;
  c.noise_std = {
      0.3,  // screw_position_mm
      2.0,  // screw_velocity_mm_s
      5.0,  // injection_pressure_bar
      4.0,  // cavity_pressure_bar
      4.0,  // holding_pressure_actual_bar
      1.0,  // back_pressure_actual_bar
      0.5,  // melt_temp_C
      0.3,  // mold_temp_C
      0.5,  // barrel_zone1_C
      0.5,  // barrel_zone2_C
      0.5,  // barrel_zone3_C
      0.5,  // nozzle_temp_C
      1.0,  // screw_rpm_actual
      0.0,  // fill_volume_cm3 (integrated; kept monotone)
      0.4,  // flow_rate_cm3_s
      5.0,  // clamp_force_kN
      0.1,  // ejector_position_mm
      2.0,  // ejector_speed_mm_s
      0.2,  // coolant_temp_C
      0.1,  // coolant_flow_l_min
      0.1,  // cushion_mm
      0.0,  // phase_id
      0.0,  // elapsed_time_s
  };
  c.jitter.fill(0.05);
  c.jitter[col::sp_injection_volume - kNumSignals] = 0.01;
  c.jitter[col::sp_mold_temp - kNumSignals] = 0.01;
  c.jitter[col::sp_melt_temp - kNumSignals] = 0.01;
  c.fault_mix = {0.5, 0.2, 0.15, 0.15};
  return c;
}

SimulatorConfig SimulatorConfig::stand_in_real() {
  SimulatorConfig c = defaults();
  for (auto& s : c.noise_std) s *= 1.5;
  c.fault_mix = {0.6, 0.15, 0.15, 0.1};
  c.nominal.injection_speed = 380.0;
  c.nominal.holding_pressure = 590.0;
  c.nominal.mold_temp = 62.0;
  c.nominal.screw_rpm = 140.0;
  return c;
}

SimulatorConfig SimulatorConfig::without_noise() const {
  SimulatorConfig c = *this;
  c.noise_std.fill(0.0);
  return c;
}

void SimulatorConfig::validate() const {
  if (sample_period_ms <= 0) throw ConfigError("sample_period_ms must be positive");
  for (double s : noise_std) {
    if (!(s >= 0.0)) throw ConfigError("noise std must be >= 0");
  }
  for (double j : jitter) {
    if (!(j >= 0.0 && j < 1.0)) throw ConfigError("setpoint jitter must lie in [0, 1)");
  }
  double sum = 0.0;
  for (double p : fault_mix) {
    if (!(p >= 0.0)) throw ConfigError("fault probabilities must be >= 0");
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-12) throw ConfigError("fault_mix probabilities must sum to 1");
  label_thresholds.validate();
  if (!(cavity_volume > 0.0) || !(screw_area > 0.0)) throw ConfigError("cavity_volume and screw_area must be positive");
  const auto v = nominal.violations();
  if (!v.empty()) throw ConfigError("nominal setpoints: " + v.front());
}

Label label_cycle(const QualityIndicators& q, const LabelThresholds& th) {
  const bool good = q.fill_fraction >= th.min_fill_fraction && q.peak_cavity_pressure >= th.cavity_pressure_low &&
                    q.peak_cavity_pressure <= th.cavity_pressure_high && q.min_cushion >= th.min_cushion_mm;
  return good ? Label::good() : Label::not_good();
}

namespace {

/// Noise-free channel values for one row; noise is added at the end.
struct Row {
  std::array<double, kNumSignals> v{};
};

struct FaultEffects {
  double shot_factor = 1.0;
  double hold_factor = 1.0;
  double melt_drop = 0.0;
};

FaultEffects draw_fault(FaultMode fault, std::uint64_t seed) {
  RandomStream rng(seed, 0x6661756cULL);
  FaultEffects e;
  switch (fault) {
    case FaultMode::None: break;
    case FaultMode::ShortShot: e.shot_factor = 1.0 - rng.uniform(0.10, 0.30); break;
    case FaultMode::PressureLoss: e.hold_factor = rng.uniform(0.5, 0.8); break;
    case FaultMode::ColdMelt: e.melt_drop = rng.uniform(15.0, 30.0); break;
  }
  return e;
}

class CycleBuilder {
 public:
  CycleBuilder(const ProcessSetpoints& sp, const FaultEffects& fx, const SimulatorConfig& cfg)
      : sp_(sp), cfg_(cfg), m_(cfg.model), dt_(cfg.sample_period_ms / 1000.0) {
    shot_volume_ = sp.injection_volume * fx.shot_factor;
    melt_ = sp.melt_temp - fx.melt_drop;
    eta_ = std::exp(-(melt_ - m_.viscosity_ref_temp_c) / m_.viscosity_temp_scale_c);
    hold_pressure_ = sp.holding_pressure * fx.hold_factor;
    bottom_ = sp.piston_stroke - shot_volume_ * 10.0 / cfg.screw_area;
    coolant_ = sp.mold_temp - 5.0;
    mold_ = sp.mold_temp;
  }

  void run() {
    dosing();
    injection();
    holding();
    cooling();
    ejection();
  }

  const std::vector<Row>& rows() const { return rows_; }

  QualityIndicators quality() const {
    QualityIndicators q;
    q.fill_fraction = std::clamp(fill_ / cfg_.cavity_volume, 0.0, 1.0);
    q.peak_cavity_pressure = peak_cavity_;
    q.min_cushion = min_cushion_;
    return q;
  }

 private:
  double cushion() const { return std::max(0.0, pos_ - bottom_); }
  double fill_ratio() const { return fill_ / cfg_.cavity_volume; }

  void emit(Phase phase, int step) {
    Row r;
    auto& v = r.v;
    v[col::screw_position] = pos_;
    v[col::screw_velocity] = vel_;
    v[col::injection_pressure] = p_inj_;
    v[col::cavity_pressure] = p_cav_;
    v[col::holding_pressure_actual] = phase == Phase::Holding ? p_inj_ : 0.0;
    v[col::back_pressure_actual] = phase == Phase::Dosing ? sp_.back_pressure : 0.0;
    v[col::melt_temp] = melt_now_;
    v[col::mold_temp] = mold_;
    v[col::barrel_zone1] = melt_ - 20.0;
    v[col::barrel_zone2] = melt_ - 10.0;
    v[col::barrel_zone3] = melt_ - 5.0;
    v[col::nozzle_temp] = melt_;
    v[col::screw_rpm_actual] = phase == Phase::Dosing ? rpm_now_ : 0.0;
    v[col::fill_volume] = fill_;
    v[col::flow_rate] = phase == Phase::Dosing ? 0.0 : cfg_.screw_area * vel_ / 10.0;
    v[col::clamp_force] = phase == Phase::Ejection ? 0.0 : 800.0 + 0.5 * p_cav_;
    v[col::ejector_position] = ejector_pos_;
    v[col::ejector_speed] = ejector_speed_;
    v[col::coolant_temp] = coolant_ + 0.05 * (mold_ - coolant_);
    v[col::coolant_flow] = 12.0;
    v[col::cushion] = cushion();
    v[col::phase_id] = static_cast<double>(static_cast<int>(phase));
    v[col::elapsed_time] = static_cast<double>(rows_.size()) * dt_;
    for (double x : v) {
      if (!std::isfinite(x)) {
        throw SimulationError("simulate_cycle: non-finite state in " + std::string(phase_name(phase)) +
                              " phase at step " + std::to_string(step));
      }
    }
    if (phase != Phase::Dosing) min_cushion_ = std::min(min_cushion_, cushion());
    peak_cavity_ = std::max(peak_cavity_, p_cav_);
    rows_.push_back(r);
  }

  /// Advance the screw one sample with trapezoidal displacement and cap the
  /// fill at the cavity volume.
  void move_screw(double new_vel) {
    // Brake so the screw can always stop before the melt runs out.
    const double rem = pos_ - bottom_;
    new_vel = std::min(new_vel, std::max(0.0, (rem - 0.5 * vel_ * dt_) / dt_));
    const double travel = 0.5 * (vel_ + new_vel) * dt_;
    vel_ = new_vel;
    pos_ -= travel;
    displaced_ += cfg_.screw_area * travel / 10.0;
    fill_ = std::min(cfg_.cavity_volume, displaced_);
  }

  bool stalled() const { return displaced_ >= cfg_.cavity_volume || pos_ - bottom_ <= kBottomTolMm; }

  static constexpr double kBottomTolMm = 0.01;

  double lag(double current, double target, double tau) const {
    return current + (target - current) * (1.0 - std::exp(-dt_ / tau));
  }

  void dosing() {
    const double rate = m_.dosing_rate_coeff * sp_.screw_rpm / (1.0 + sp_.back_pressure / 100.0);  // cm^3/s
    const double duration = shot_volume_ / rate;
    const int n = std::max(2, static_cast<int>(std::ceil(duration / dt_)));
    const double distance = sp_.piston_stroke - bottom_;
    p_inj_ = sp_.back_pressure;
    rpm_now_ = sp_.screw_rpm;
    melt_now_ = melt_;
    for (int k = 0; k < n; ++k) {
      pos_ = bottom_ + distance * static_cast<double>(k) / static_cast<double>(n - 1);
      vel_ = k + 1 < n ? -distance / (static_cast<double>(n - 1) * dt_) : 0.0;
      if (k + 1 == n) {
        pos_ = sp_.piston_stroke;
        rpm_now_ = 0.0;
      }
      emit(Phase::Dosing, k);
    }
  }

  void injection() {
    const double target = sp_.injection_speed / eta_;
    const double mold_peak = sp_.mold_temp + 0.1 * (melt_ - sp_.mold_temp);
    const int max_steps = static_cast<int>(std::ceil(m_.max_injection_time_s / dt_));
    for (int k = 0; k < max_steps; ++k) {
      const bool stop = stalled();
      move_screw(stop ? 0.0 : lag(vel_, target, m_.velocity_tau_s));
      const double phi = fill_ratio();
      p_inj_ = m_.pressure_per_velocity * eta_ * vel_ + m_.fill_ramp_bar * phi * phi;
      p_cav_ = phi * (0.15 * eta_ * vel_ + 200.0 * phi * phi);
      mold_ = lag(mold_, mold_peak, 0.5);
      emit(Phase::Injection, k);
      if (pos_ <= sp_.changeover_point || stalled()) break;
    }
  }

  void holding() {
    const int n = std::max(1, static_cast<int>(std::lround(sp_.holding_time / dt_)));
    const double pack = m_.packing_speed_mm_s * (hold_pressure_ / 600.0) / eta_;
    const double mold_peak = sp_.mold_temp + 0.1 * (melt_ - sp_.mold_temp);
    for (int k = 0; k < n; ++k) {
      move_screw(stalled() ? 0.0 : lag(vel_, pack, m_.velocity_tau_s));
      p_inj_ = lag(p_inj_, hold_pressure_, m_.pressure_tau_s);
      const double phi = fill_ratio();
      const double cav_target = m_.cavity_transmission * p_inj_ * std::pow(phi, 8) / std::sqrt(eta_);
      p_cav_ = lag(p_cav_, cav_target, m_.pressure_tau_s);
      mold_ = lag(mold_, mold_peak, 0.5);
      emit(Phase::Holding, k);
    }
  }

  void cooling() {
    const int n = std::max(1, static_cast<int>(std::lround(sp_.cooling_time / dt_)));
    for (int k = 0; k < n; ++k) {
      move_screw(0.0);
      p_inj_ = lag(p_inj_, 0.0, m_.pressure_tau_s);
      p_cav_ = lag(p_cav_, 0.0, 0.3);
      melt_now_ = lag(melt_now_, coolant_, m_.cooling_tau_s);
      mold_ = lag(mold_, coolant_, m_.cooling_tau_s);
      emit(Phase::Cooling, k);
    }
  }

  void ejection() {
    const int n = std::max(2, static_cast<int>(std::lround(m_.ejection_time_s / dt_)));
    const double speed = m_.ejector_stroke_mm / (static_cast<double>(n - 1) * dt_);
    for (int k = 0; k < n; ++k) {
      move_screw(0.0);
      p_inj_ = 0.0;
      p_cav_ = lag(p_cav_, 0.0, 0.05);
      melt_now_ = lag(melt_now_, coolant_, m_.cooling_tau_s);
      mold_ = lag(mold_, coolant_, m_.cooling_tau_s);
      ejector_pos_ = speed * static_cast<double>(k) * dt_;
      ejector_speed_ = k + 1 < n ? speed : 0.0;
      emit(Phase::Ejection, k);
    }
  }

  const ProcessSetpoints& sp_;
  const SimulatorConfig& cfg_;
  const ProcessModel& m_;
  double dt_;

  double shot_volume_ = 0.0;
  double melt_ = 0.0;
  double eta_ = 1.0;
  double hold_pressure_ = 0.0;
  double bottom_ = 0.0;
  double coolant_ = 0.0;

  double pos_ = 0.0;
  double vel_ = 0.0;
  double displaced_ = 0.0;
  double fill_ = 0.0;
  double p_inj_ = 0.0;
  double p_cav_ = 0.0;
  double mold_ = 0.0;
  double melt_now_ = 0.0;
  double rpm_now_ = 0.0;
  double ejector_pos_ = 0.0;
  double ejector_speed_ = 0.0;

  double peak_cavity_ = 0.0;
  double min_cushion_ = std::numeric_limits<double>::infinity();
  std::vector<Row> rows_;
};

}  // namespace

SimulationResult simulate_cycle(const ProcessSetpoints& setpoints, FaultMode fault, const SimulatorConfig& config,
                                std::uint64_t seed) {
  const auto bad = setpoints.violations();
  if (!bad.empty()) throw ConfigError("simulate_cycle: " + bad.front());

  CycleBuilder builder(setpoints, draw_fault(fault, seed), config);
  builder.run();
  const auto& rows = builder.rows();

  SimulationResult out;
  CycleRecord& rec = out.record;
  rec.sample_period_ms = config.sample_period_ms;
  rec.setpoints = setpoints;
  rec.samples.resize(static_cast<Eigen::Index>(rows.size()), kNumFeatures);
  for (size_t r = 0; r < rows.size(); ++r) {
    for (int c = 0; c < kNumSignals; ++c) {
      rec.samples(static_cast<Eigen::Index>(r), c) = rows[r].v[static_cast<size_t>(c)];
    }
  }
  stamp_setpoints(rec.samples, setpoints);

  // Sensor noise, column by column so the draw order is fixed.
  RandomStream noise(seed, 0x6e6f6973ULL);
  for (int c = 0; c < kNumSignals; ++c) {
    const double sd = config.noise_std[static_cast<size_t>(c)];
    if (sd <= 0.0) continue;
    for (Eigen::Index r = 0; r < rec.samples.rows(); ++r) rec.samples(r, c) += noise.normal(0.0, sd);
  }

  out.quality = builder.quality();
  rec.quality = out.quality;
  return out;
}

ProcessSetpoints jitter_setpoints(const ProcessSetpoints& nominal, const std::array<double, kNumSetpoints>& jitter,
                                  std::uint64_t seed) {
  RandomStream rng(seed, 0x6a697474ULL);
  auto values = nominal.as_array();
  for (size_t i = 0; i < values.size(); ++i) {
    values[i] *= 1.0 + rng.uniform(-jitter[i], jitter[i]);
  }
  return ProcessSetpoints::from_array(values);
}

Dataset generate_dataset(const SimulatorConfig& config, int n, const ClassMix& mix, std::uint64_t base_seed,
                         const GenerateOptions& options) {
  config.validate();
  if (n < 1) throw ConfigError("generate_dataset: n must be >= 1");
  if (!(mix.good_fraction >= 0.0 && mix.notgood_fraction >= 0.0) ||
      std::abs(mix.good_fraction + mix.notgood_fraction - 1.0) > 1e-12) {
    throw ConfigError("generate_dataset: class mix must be non-negative and sum to 1");
  }

  const auto n_good = static_cast<size_t>(round_half_away(static_cast<double>(n) * mix.good_fraction));
  // Which cycle slots must come out Good.
  RandomStream slot_rng(base_seed, 0x736c6f74ULL);
  const auto perm = slot_rng.permutation(static_cast<size_t>(n));
  std::vector<bool> want_good(static_cast<size_t>(n), false);
  for (size_t i = 0; i < n_good; ++i) want_good[perm[i]] = true;

  Dataset ds;
  ds.name = options.name;
  ds.records.reserve(static_cast<size_t>(n));
  for (int k = 0; k < n; ++k) {
    const std::uint64_t cycle_seed = base_seed ^ static_cast<std::uint64_t>(k);
    const Label target = want_good[static_cast<size_t>(k)] ? Label::good() : Label::not_good();
    bool accepted = false;
    for (int attempt = 0; attempt < options.max_attempts && !accepted; ++attempt) {
      const std::uint64_t attempt_seed = mix64(cycle_seed, static_cast<std::uint64_t>(attempt));
      RandomStream draw(attempt_seed, 0x64726177ULL);
      const double u = draw.uniform();
      int fault = 0;
      double acc = config.fault_mix[0];
      while (fault + 1 < kNumFaultModes && u >= acc) acc += config.fault_mix[static_cast<size_t>(++fault)];
      const ProcessSetpoints sp = jitter_setpoints(config.nominal, config.jitter, mix64(attempt_seed, 1));
      if (!sp.violations().empty()) continue;
      auto sim = simulate_cycle(sp, static_cast<FaultMode>(fault), config, mix64(attempt_seed, 2));
      const Label label = label_cycle(sim.quality, config.label_thresholds);
      if (!(label == target)) continue;
      char id[64];
      std::snprintf(id, sizeof id, "%s-%05d", options.id_prefix.c_str(), k);
      sim.record.cycle_id = id;
      sim.record.source = options.source;
      sim.record.label = label;
      ds.records.push_back(std::move(sim.record));
      accepted = true;
    }
    if (!accepted) {
      throw DataError("generate_dataset: could not produce a " + std::string(to_string(target.value)) +
                      " cycle for slot " + std::to_string(k) + " within " + std::to_string(options.max_attempts) +
                      " attempts; class mix unattainable with this fault mix");
    }
  }
  return ds;
}

}  // namespace moldsynth
