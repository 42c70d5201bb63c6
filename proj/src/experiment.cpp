#include "moldsynth/experiment.hpp"

#include "moldsynth/json_io.hpp"
#include "moldsynth/random.hpp"
#include "moldsynth/storage.hpp"

#include <atomic>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <exception>
#include <mutex>
#include <thread>

namespace moldsynth {

namespace {

// Stream tags for seeds derived from a cell seed.
constexpr std::uint64_t kSplitTag = 0x10;
constexpr std::uint64_t kMixTag = 0x11;
constexpr std::uint64_t kTrainTag = 0x12;
constexpr std::uint64_t kRealDataTag = 0x20;
constexpr std::uint64_t kPoolTag = 0x21;

std::string fixed(double v, int digits) {
  if (!std::isfinite(v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string full(double v) { return std::isfinite(v) ? format_double(v) : "nan"; }

json accounting_json(const MixAccounting& a) {
  return {{"mode", to_string(a.mode)},
          {"real_total", a.real_total},
          {"real_count", a.real_count},
          {"synthetic_count", a.synthetic_count},
          {"training_count", a.training_count},
          {"validation_count", a.validation_count},
          {"total_count", a.total_count},
          {"percent", a.percent},
          {"synthetic_fraction_training", a.synthetic_fraction_training},
          {"real_fraction_training", a.real_fraction_training}};
}

MixAccounting accounting_from_json(const json& j) {
  MixAccounting a;
  a.mode = parse_mix_mode(j.at("mode").get<std::string>());
  a.real_total = j.at("real_total").get<long long>();
  a.real_count = j.at("real_count").get<long long>();
  a.synthetic_count = j.at("synthetic_count").get<long long>();
  a.training_count = j.at("training_count").get<long long>();
  a.validation_count = j.at("validation_count").get<long long>();
  a.total_count = j.at("total_count").get<long long>();
  a.percent = j.at("percent").get<double>();
  a.synthetic_fraction_training = j.at("synthetic_fraction_training").get<double>();
  a.real_fraction_training = j.at("real_fraction_training").get<double>();
  return a;
}

json mean_std_json(const MeanStd& m) { return {{"mean", number_or_null(m.mean)}, {"std", number_or_null(m.stddev)}}; }

long long real_train_size(const SweepConfig& c, size_t real_total) {
  return static_cast<long long>(real_total) - round_half_away(c.val_fraction * static_cast<double>(real_total));
}

}  // namespace

std::vector<double> SweepConfig::default_levels(MixMode mode) {
  if (mode == MixMode::Additive) return {0, 5, 10, 15, 20, 25, 30};
  return {0, 55, 110, 165, 220, 275, 330};
}

SweepConfig SweepConfig::defaults(MixMode mode) {
  SweepConfig c;
  c.mode = mode;
  c.levels = default_levels(mode);
  return c;
}

void SweepConfig::validate() const {
  if (levels.empty()) throw ConfigError("sweep: levels must not be empty");
  if (runs_per_level < 1) throw ConfigError("sweep: runs_per_level must be >= 1");
  if (!(val_fraction > 0.0 && val_fraction < 1.0)) throw ConfigError("sweep: val_fraction must lie in (0, 1)");
  if (workers < 0) throw ConfigError("sweep: workers must be >= 0");
  for (double l : levels) {
    if (mode == MixMode::Additive && !(l >= 0.0 && l <= 100.0)) {
      throw ConfigError("sweep: additive levels are percents in [0, 100]");
    }
    if (mode == MixMode::Substitutive && !(l >= 0.0 && l == std::floor(l))) {
      throw ConfigError("sweep: substitutive levels are non-negative synthetic counts");
    }
  }
  for (size_t i = 0; i < levels.size(); ++i) {
    for (size_t k = i + 1; k < levels.size(); ++k) {
      if (level_tag(levels[i]) == level_tag(levels[k])) throw ConfigError("sweep: duplicate level " + level_tag(levels[i]));
    }
  }
  model.validate();
}

SweepData prepare_sweep_data(const SweepConfig& config) {
  SweepData d;
  const auto& dd = config.default_data;
  if (config.real_dataset) {
    d.real = read_dataset(*config.real_dataset);
  } else {
    GenerateOptions o;
    o.source = Source::Real;
    o.id_prefix = "real";
    o.name = "real";
    const auto raw = generate_dataset(dd.real_simulator, dd.real_cycles,
                                      {dd.real_good_fraction, 1.0 - dd.real_good_fraction},
                                      mix64(config.base_seed, kRealDataTag), o);
    d.real = augment_dataset(raw, dd.augment_factor);
  }
  if (config.synthetic_dataset) {
    d.synthetic_pool = read_dataset(*config.synthetic_dataset);
  } else {
    GenerateOptions o;
    o.name = "synthetic";
    const auto raw = generate_dataset(dd.synthetic_simulator, dd.synthetic_cycles,
                                      {dd.synthetic_good_fraction, 1.0 - dd.synthetic_good_fraction},
                                      mix64(config.base_seed, kPoolTag), o);
    d.synthetic_pool = augment_dataset(raw, dd.augment_factor);
  }
  if (d.real.count(Source::Synthetic) != 0) throw DataError("real dataset contains synthetic records");
  if (d.synthetic_pool.count(Source::Real) != 0) throw DataError("synthetic pool contains real records");
  return d;
}

std::uint64_t cell_seed(std::uint64_t base_seed, size_t level_index, size_t run_index) {
  return base_seed ^ mix64(level_index, run_index);
}

CellResult run_cell(const SweepConfig& config, const SweepData& data, size_t level_index, size_t run_index,
                    const CellOptions& options) {
  if (level_index >= config.levels.size()) throw ConfigError("run_cell: level index out of range");
  CellResult r;
  r.level_index = level_index;
  r.run_index = run_index;
  r.level = config.levels[level_index];
  r.seed = cell_seed(config.base_seed, level_index, run_index);
  try {
    const Split split = split_real(data.real, {config.val_fraction, mix64(r.seed, kSplitTag)});
    const auto real_total = static_cast<long long>(data.real.size());
    MixResult mixed;
    if (config.mode == MixMode::Additive) {
      mixed = mix_additive(split.train, data.synthetic_pool, r.level, real_total, mix64(r.seed, kMixTag));
    } else {
      const long long fixed_size = config.fixed_size > 0 ? config.fixed_size : static_cast<long long>(split.train.size());
      mixed = mix_substitutive(split.train, data.synthetic_pool, static_cast<long long>(r.level), fixed_size,
                               mix64(r.seed, kMixTag), real_total);
    }
    if (split.val.count(Source::Synthetic) != 0) throw DataError("validation set contains synthetic records");
    r.accounting = mixed.accounting;

    TrainOptions topt;
    topt.should_stop = options.should_stop;
    const TrainResult tr = train(config.model, mixed.train, split.val, mix64(r.seed, kTrainTag), topt);
    r.history = tr.history;
    r.val = evaluate(tr.final_val_scores, labels_of(split.val));
    r.train = evaluate(tr.final_train_scores, labels_of(mixed.train));
  } catch (const CancelledError&) {
    throw;
  } catch (const ConfigError& e) {
    throw ConfigError("cell (level " + level_tag(r.level) + ", run " + std::to_string(run_index) + "): " + e.what());
  } catch (const DataError& e) {
    throw DataError("cell (level " + level_tag(r.level) + ", run " + std::to_string(run_index) + "): " + e.what());
  } catch (const std::exception& e) {
    throw Error("cell (level " + level_tag(r.level) + ", run " + std::to_string(run_index) + "): " + e.what());
  }
  return r;
}

SweepReport summarize(MixMode mode, std::uint64_t base_seed, const std::vector<double>& levels, int runs_per_level,
                      std::vector<CellResult> cells) {
  SweepReport rep;
  rep.mode = mode;
  rep.base_seed = base_seed;
  rep.runs_per_level = runs_per_level;
  for (size_t li = 0; li < levels.size(); ++li) {
    std::vector<const CellResult*> mine;
    for (const auto& c : cells) {
      if (c.level_index == li) mine.push_back(&c);
    }
    if (mine.empty()) continue;
    LevelSummary s;
    s.level = levels[li];
    s.accounting = mine.front()->accounting;
    std::vector<EvalResult> vals;
    std::vector<double> tacc, tloss;
    for (const auto* c : mine) {
      vals.push_back(c->val);
      tacc.push_back(c->train.accuracy);
      tloss.push_back(c->train.loss);
    }
    s.val = aggregate_runs(vals);
    s.train_accuracy = mean_std(tacc);
    s.train_loss = mean_std(tloss);
    size_t epochs = mine.front()->history.size();
    for (const auto* c : mine) epochs = std::min(epochs, c->history.size());
    for (size_t e = 0; e < epochs; ++e) {
      CurvePoint p;
      p.epoch = static_cast<int>(e) + 1;
      std::vector<double> ta, tl, va, vl;
      for (const auto* c : mine) {
        ta.push_back(c->history[e].train_accuracy);
        tl.push_back(c->history[e].train_loss);
        va.push_back(c->history[e].val_accuracy);
        vl.push_back(c->history[e].val_loss);
      }
      p.train_accuracy = mean_std(ta).mean;
      p.train_loss = mean_std(tl).mean;
      p.val_accuracy = mean_std(va).mean;
      p.val_loss = mean_std(vl).mean;
      s.curve.push_back(p);
    }
    rep.levels.push_back(std::move(s));
  }
  rep.cells = std::move(cells);
  return rep;
}

SweepReport run_sweep(const SweepConfig& config, const SweepData& data, const SweepOptions& options) {
  config.validate();
  const size_t n_levels = config.levels.size();
  const auto runs = static_cast<size_t>(config.runs_per_level);
  const size_t total = n_levels * runs;

  // Feasibility is checked up front so that a bad level fails before any training.
  const long long real_total = static_cast<long long>(data.real.size());
  const long long n_train = real_train_size(config, data.real.size());
  for (double level : config.levels) {
    if (config.mode == MixMode::Additive) {
      const auto a = additive_accounting(n_train, real_total, level);
      if (a.synthetic_count > static_cast<long long>(data.synthetic_pool.size())) {
        throw DataError("level " + level_tag(level) + " needs " + std::to_string(a.synthetic_count) +
                        " synthetic records, pool has " + std::to_string(data.synthetic_pool.size()));
      }
    } else {
      const long long fixed_size = config.fixed_size > 0 ? config.fixed_size : n_train;
      substitutive_accounting(n_train, real_total, static_cast<long long>(level), fixed_size);
      if (static_cast<long long>(level) > static_cast<long long>(data.synthetic_pool.size())) {
        throw DataError("level " + level_tag(level) + " exceeds the synthetic pool size");
      }
    }
  }

  std::vector<std::optional<CellResult>> slots(total);
  std::atomic<size_t> next{0};
  std::atomic<bool> abort{false};
  std::mutex mu;
  std::exception_ptr first_error;
  size_t done = 0;

  auto stop = [&] { return abort.load() || (options.should_stop && options.should_stop()); };
  auto worker = [&] {
    while (!stop()) {
      const size_t i = next.fetch_add(1);
      if (i >= total) break;
      try {
        CellOptions co;
        co.should_stop = stop;
        CellResult r = run_cell(config, data, i / runs, i % runs, co);
        std::lock_guard lock(mu);
        slots[i] = std::move(r);
        ++done;
        if (options.on_cell) options.on_cell(*slots[i], done, total);
      } catch (...) {
        std::lock_guard lock(mu);
        if (!first_error) first_error = std::current_exception();
        abort = true;
      }
    }
  };

  unsigned n_workers = config.workers > 0 ? static_cast<unsigned>(config.workers) : std::thread::hardware_concurrency();
  n_workers = std::max(1u, std::min<unsigned>(n_workers, static_cast<unsigned>(total)));
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < n_workers; ++w) pool.emplace_back(worker);
  for (auto& t : pool) t.join();

  std::vector<CellResult> cells;
  cells.reserve(total);
  for (auto& s : slots) {
    if (s) cells.push_back(std::move(*s));
  }

  const bool cancelled = !first_error && cells.size() < total;
  if (first_error || cancelled) {
    std::string message = "sweep cancelled";
    if (first_error) {
      try {
        std::rethrow_exception(first_error);
      } catch (const std::exception& e) {
        message = e.what();
      }
    }
    json partial = {{"report_schema_version", kReportSchemaVersion},
                    {"status", cancelled ? "cancelled" : "failed"},
                    {"error", message},
                    {"completed_cells", cells.size()},
                    {"total_cells", total},
                    {"cells", json::array()}};
    for (const auto& c : cells) partial["cells"].push_back(cell_to_json(c));
    write_text_file(config.output_dir / "partial_results.json", partial.dump(2) + "\n");
    if (first_error) std::rethrow_exception(first_error);
    throw CancelledError("sweep cancelled after " + std::to_string(cells.size()) + " of " + std::to_string(total) +
                         " cells");
  }
  return summarize(config.mode, config.base_seed, config.levels, config.runs_per_level, std::move(cells));
}

std::string level_tag(double level) { return format_double(level); }

json cell_to_json(const CellResult& c) {
  json history = json::array();
  for (const auto& m : c.history) history.push_back(to_json(m));
  return {{"level_index", c.level_index},
          {"run_index", c.run_index},
          {"level", c.level},
          {"seed", c.seed},
          {"accounting", accounting_json(c.accounting)},
          {"val", to_json(c.val)},
          {"train", to_json(c.train)},
          {"history", std::move(history)}};
}

CellResult cell_from_json(const json& j) {
  CellResult c;
  c.level_index = j.at("level_index").get<size_t>();
  c.run_index = j.at("run_index").get<size_t>();
  c.level = j.at("level").get<double>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.accounting = accounting_from_json(j.at("accounting"));
  c.val = eval_result_from_json(j.at("val"));
  c.train = eval_result_from_json(j.at("train"));
  for (const auto& m : j.at("history")) {
    c.history.push_back({number_or_nan(m.at("train_loss")), number_or_nan(m.at("train_accuracy")),
                         number_or_nan(m.at("val_loss")), number_or_nan(m.at("val_accuracy"))});
  }
  return c;
}

json report_to_json(const SweepReport& rep) {
  json levels = json::array();
  for (const auto& s : rep.levels) {
    levels.push_back({{"level", s.level},
                      {"accounting", accounting_json(s.accounting)},
                      {"runs", s.val.runs},
                      {"val_mean", to_json(s.val.mean)},
                      {"val_std", to_json(s.val.stddev)},
                      {"train_accuracy", mean_std_json(s.train_accuracy)},
                      {"train_loss", mean_std_json(s.train_loss)}});
  }
  json cells = json::array();
  for (const auto& c : rep.cells) cells.push_back(cell_to_json(c));
  std::vector<double> level_values;
  for (const auto& s : rep.levels) level_values.push_back(s.level);
  return {{"report_schema_version", kReportSchemaVersion},
          {"mode", to_string(rep.mode)},
          {"base_seed", rep.base_seed},
          {"runs_per_level", rep.runs_per_level},
          {"level_values", level_values},
          {"levels", std::move(levels)},
          {"cells", std::move(cells)}};
}

SweepReport report_from_json(const json& j) {
  try {
    if (j.at("report_schema_version").get<int>() != kReportSchemaVersion) {
      throw DataError("unsupported report_schema_version");
    }
    std::vector<CellResult> cells;
    for (const auto& c : j.at("cells")) cells.push_back(cell_from_json(c));
    return summarize(parse_mix_mode(j.at("mode").get<std::string>()), j.at("base_seed").get<std::uint64_t>(),
                     j.at("level_values").get<std::vector<double>>(), j.at("runs_per_level").get<int>(),
                     std::move(cells));
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed report: ") + e.what());
  }
}

std::string report_csv(const SweepReport& rep) {
  std::string out =
      "level,total_count,training_count,real_count,synthetic_count,synthetic_fraction_training,runs,"
      "mean_val_acc,std_val_acc,mean_val_loss,std_val_loss,mean_train_acc,std_train_acc,mean_train_loss,"
      "std_train_loss,mean_f1,std_f1,mean_auc_roc,std_auc_roc\n";
  for (const auto& s : rep.levels) {
    const auto& a = s.accounting;
    const auto& m = s.val.mean;
    const auto& d = s.val.stddev;
    out += level_tag(s.level) + "," + std::to_string(a.total_count) + "," + std::to_string(a.training_count) + "," +
           std::to_string(a.real_count) + "," + std::to_string(a.synthetic_count) + "," +
           full(a.synthetic_fraction_training) + "," + std::to_string(s.val.runs) + "," + full(m.accuracy) + "," +
           full(d.accuracy) + "," + full(m.loss) + "," + full(d.loss) + "," + full(s.train_accuracy.mean) + "," +
           full(s.train_accuracy.stddev) + "," + full(s.train_loss.mean) + "," + full(s.train_loss.stddev) + "," +
           full(m.f1) + "," + full(d.f1) + "," + full(m.auc_roc) + "," + full(d.auc_roc) + "\n";
  }
  return out;
}

std::string report_markdown(const SweepReport& rep) {
  const bool additive = rep.mode == MixMode::Additive;
  std::string out = "<!-- moldsynth report schema v" + std::to_string(kReportSchemaVersion) + " -->\n";
  out += "# Sweep report (" + std::string(to_string(rep.mode)) + ")\n\n";
  out += "Base seed " + std::to_string(rep.base_seed) + ", " + std::to_string(rep.runs_per_level) +
         " runs per level. Metrics are final-epoch values on the real-only validation set (train columns on the "
         "training set), mean and population std over runs.\n\n";
  out += std::string("| ") + (additive ? "level (% of real total)" : "level (synthetic count)") +
         " | total count | training count | real count | synthetic count | synthetic fraction training (%) "
         "| mean val acc | std val acc | mean val loss | std val loss | mean train acc | std train acc "
         "| mean train loss | std train loss | F1 | std F1 | AUC-ROC | std AUC-ROC |\n";
  out += "|";
  for (int i = 0; i < 18; ++i) out += "---|";
  out += "\n";
  for (const auto& s : rep.levels) {
    const auto& a = s.accounting;
    const auto& m = s.val.mean;
    const auto& d = s.val.stddev;
    out += "| " + level_tag(s.level) + " | " + std::to_string(a.total_count) + " | " +
           std::to_string(a.training_count) + " | " + std::to_string(a.real_count) + " | " +
           std::to_string(a.synthetic_count) + " | " + fixed(100.0 * a.synthetic_fraction_training, 1) + " | " +
           fixed(m.accuracy, 4) + " | " + fixed(d.accuracy, 4) + " | " + fixed(m.loss, 4) + " | " +
           fixed(d.loss, 4) + " | " + fixed(s.train_accuracy.mean, 4) + " | " + fixed(s.train_accuracy.stddev, 4) +
           " | " + fixed(s.train_loss.mean, 4) + " | " + fixed(s.train_loss.stddev, 4) + " | " + fixed(m.f1, 4) +
           " | " + fixed(d.f1, 4) + " | " + fixed(m.auc_roc, 4) + " | " + fixed(d.auc_roc, 4) + " |\n";
  }
  return out;
}

std::string curve_csv(const LevelSummary& s) {
  std::string out = "epoch,mean_train_acc,mean_train_loss,mean_val_acc,mean_val_loss\n";
  for (const auto& p : s.curve) {
    out += std::to_string(p.epoch) + "," + full(p.train_accuracy) + "," + full(p.train_loss) + "," +
           full(p.val_accuracy) + "," + full(p.val_loss) + "\n";
  }
  return out;
}

void render_report(const SweepReport& rep, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_text_file(dir / "report.csv", report_csv(rep));
  write_text_file(dir / "report.md", report_markdown(rep));
  write_text_file(dir / "report.json", report_to_json(rep).dump(2) + "\n");
  for (const auto& s : rep.levels) write_text_file(dir / "curves" / (level_tag(s.level) + ".csv"), curve_csv(s));
  for (const auto& c : rep.cells) {
    write_text_file(dir / "runs" / level_tag(c.level) / (std::to_string(c.run_index) + ".json"),
                    cell_to_json(c).dump(2) + "\n");
  }
}

}  // namespace moldsynth
