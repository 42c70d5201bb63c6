#pragma once

#include "moldsynth/json_io.hpp"
#include "moldsynth/lstm.hpp"
#include "moldsynth/metrics.hpp"
#include "moldsynth/pipeline.hpp"
#include "moldsynth/simulator.hpp"
#include "moldsynth/training.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace moldsynth {

/// Version of the report column layout (report.csv, report.md, report.json).
inline constexpr int kReportSchemaVersion = 1;

/// Parameters of the built-in data used when no dataset paths are given.
struct DefaultData {
  int real_cycles = 275;
  double real_good_fraction = 0.565;
  int synthetic_cycles = 100;
  double synthetic_good_fraction = 0.4;
  int augment_factor = 4;
  SimulatorConfig real_simulator = SimulatorConfig::stand_in_real();
  SimulatorConfig synthetic_simulator = SimulatorConfig::defaults();
};

struct SweepConfig {
  MixMode mode = MixMode::Additive;
  /// Additive: percent of the real total. Substitutive: synthetic counts.
  std::vector<double> levels;
  int runs_per_level = 50;
  std::uint64_t base_seed = 0;
  ModelConfig model;
  double val_fraction = 0.33;
  /// Substitutive training-set size; <= 0 means the real training size.
  long long fixed_size = 0;
  std::optional<std::filesystem::path> real_dataset;
  std::optional<std::filesystem::path> synthetic_dataset;
  std::filesystem::path output_dir = "sweep_out";
  /// 0 picks std::thread::hardware_concurrency().
  int workers = 0;
  DefaultData default_data;

  static std::vector<double> default_levels(MixMode mode);
  static SweepConfig defaults(MixMode mode);
  /// Throws ConfigError.
  void validate() const;
};

/// Real and synthetic data shared by every cell of a sweep.
struct SweepData {
  Dataset real;
  Dataset synthetic_pool;
};

/// Loads the configured datasets, or builds the defaults: the stand-in real
/// process and one synthetic pool, both seeded from base_seed and augmented.
SweepData prepare_sweep_data(const SweepConfig& config);

/// base_seed ^ mix64(level_index, run_index).
std::uint64_t cell_seed(std::uint64_t base_seed, size_t level_index, size_t run_index);

struct CellResult {
  size_t level_index = 0;
  size_t run_index = 0;
  double level = 0.0;
  std::uint64_t seed = 0;
  MixAccounting accounting;
  EvalResult val;    // final epoch, real-only validation set
  EvalResult train;  // final epoch, eval mode on the mixed training set
  TrainingHistory history;
};

struct CellOptions {
  std::function<bool()> should_stop;
};

/// Fresh split, mix, train, evaluate for one (level, run) cell.
CellResult run_cell(const SweepConfig& config, const SweepData& data, size_t level_index, size_t run_index,
                    const CellOptions& options = {});

struct CurvePoint {
  int epoch = 0;
  double train_accuracy = 0.0;
  double train_loss = 0.0;
  double val_accuracy = 0.0;
  double val_loss = 0.0;
};

struct LevelSummary {
  double level = 0.0;
  MixAccounting accounting;
  AggregateResult val;
  MeanStd train_accuracy;
  MeanStd train_loss;
  std::vector<CurvePoint> curve;  // per-epoch means over runs
};

struct SweepReport {
  MixMode mode = MixMode::Additive;
  std::uint64_t base_seed = 0;
  int runs_per_level = 0;
  std::vector<LevelSummary> levels;
  std::vector<CellResult> cells;  // ordered by (level_index, run_index)
};

/// Summaries from raw cells; cells must be ordered by (level, run).
SweepReport summarize(MixMode mode, std::uint64_t base_seed, const std::vector<double>& levels, int runs_per_level,
                      std::vector<CellResult> cells);

struct SweepOptions {
  std::function<bool()> should_stop;
  /// Called from worker threads, serialized by the runner.
  std::function<void(const CellResult&, size_t done, size_t total)> on_cell;
};

/// Runs every (level, run) cell on a bounded worker pool. On failure or
/// cancellation the completed cells go to <output_dir>/partial_results.json
/// and the error is rethrown.
SweepReport run_sweep(const SweepConfig& config, const SweepData& data, const SweepOptions& options = {});

/// Directory-safe level tag, e.g. "5" or "12.5".
std::string level_tag(double level);

/// report.csv, report.md, report.json, curves/<level>.csv and
/// runs/<level>/<run>.json under `dir`. Byte-stable for a given report.
void render_report(const SweepReport& report, const std::filesystem::path& dir);

std::string report_csv(const SweepReport& report);
std::string report_markdown(const SweepReport& report);
std::string curve_csv(const LevelSummary& level);

json cell_to_json(const CellResult& cell);
CellResult cell_from_json(const json& j);
json report_to_json(const SweepReport& report);
SweepReport report_from_json(const json& j);

}  // namespace moldsynth
