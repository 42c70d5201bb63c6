#include "moldsynth/cli.hpp"

#include "moldsynth/experiment.hpp"
#include "moldsynth/json_io.hpp"
#include "moldsynth/pipeline.hpp"
#include "moldsynth/simulator.hpp"
#include "moldsynth/storage.hpp"
#include "moldsynth/training.hpp"

#include <CLI11.hpp>

#include <csignal>
#include <cstdio>
#include <cstdlib>
#include <optional>

namespace moldsynth::cli {

namespace {

extern "C" void on_sigint(int) { interrupt_flag().store(true); }

struct Common {
  std::string config_path;
  std::string output;
  std::optional<std::uint64_t> seed;
  int verbosity = 0;
};

/// Flag values that override the config file when present.
struct ModelFlags {
  std::optional<int> epochs;
  std::optional<double> lr;
  std::optional<int> batch_size;
  std::vector<int> units;
  std::optional<double> dropout_inner;
  std::optional<double> dropout_final;
  bool no_standardize = false;

  void add(CLI::App* app) {
    app->add_option("--epochs", epochs, "Training epochs")->check(CLI::PositiveNumber);
    app->add_option("--lr", lr, "Adam learning rate");
    app->add_option("--batch-size", batch_size, "Mini-batch size")->check(CLI::PositiveNumber);
    app->add_option("--units", units, "Hidden units per LSTM layer, comma separated")->delimiter(',');
    app->add_option("--dropout-inner", dropout_inner, "Dropout after inner LSTM layers");
    app->add_option("--dropout-final", dropout_final, "Dropout after the last LSTM layer");
    app->add_flag("--no-standardize", no_standardize, "Disable per-channel z-scoring");
  }

  void apply(json& m) const {
    if (epochs) m["epochs"] = *epochs;
    if (lr) m["learning_rate"] = *lr;
    if (batch_size) m["batch_size"] = *batch_size;
    if (!units.empty()) m["units"] = units;
    if (dropout_inner) m["dropout_inner"] = *dropout_inner;
    if (dropout_final) m["dropout_final"] = *dropout_final;
    if (no_standardize) m["standardize"] = false;
  }
};

json load_config_file(const std::string& path) {
  if (path.empty()) return json::object();
  std::string text;
  try {
    text = read_text_file(path);
  } catch (const DataError& e) {
    throw ConfigError(std::string("config file: ") + e.what());
  }
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError("config file " + path + ": " + e.what());
  }
  reject_unknown_keys(j, {"seed", "output", "simulator", "generate", "augment", "split", "mix", "model", "sweep"},
                      "config file");
  return j;
}

json section(const json& file, const char* key) {
  return file.contains(key) ? file.at(key) : json::object();
}

fs::path resolve_output(const Common& c, const json& file, const std::string& command) {
  if (!c.output.empty()) return c.output;
  if (file.contains("output")) return file.at("output").get<std::string>();
  if (const char* root = std::getenv(kOutputRootEnv); root && *root) return fs::path(root) / command;
  return fs::path("moldsynth_out") / command;
}

std::uint64_t resolve_seed(const Common& c, const json& file) {
  if (c.seed) return *c.seed;
  if (file.contains("seed")) return file.at("seed").get<std::uint64_t>();
  return 0;
}

void echo_config(const fs::path& out_dir, const json& resolved) {
  write_text_file(out_dir / "resolved_config.json", resolved.dump(2) + "\n");
}

SimulatorConfig preset(const std::string& name) {
  if (name == "defaults") return SimulatorConfig::defaults();
  if (name == "stand_in_real") return SimulatorConfig::stand_in_real();
  throw ConfigError("unknown simulator preset '" + name + "' (expected defaults or stand_in_real)");
}

std::string balance_line(const Dataset& d) {
  char buf[160];
  const auto b = class_balance(d);
  std::snprintf(buf, sizeof buf, "%zu records: %zu good (%.1f%%), %zu not_good (%.1f%%)", d.size(),
                d.count(LabelValue::Good), 100.0 * b.good_fraction, d.count(LabelValue::NotGood),
                100.0 * b.notgood_fraction);
  return buf;
}

json accounting_summary(const MixAccounting& a) {
  return {{"mode", to_string(a.mode)},
          {"real_total", a.real_total},
          {"real_count", a.real_count},
          {"synthetic_count", a.synthetic_count},
          {"training_count", a.training_count},
          {"validation_count", a.validation_count},
          {"total_count", a.total_count},
          {"percent", a.percent},
          {"synthetic_fraction_training", a.synthetic_fraction_training}};
}

json metrics_json(const EvalResult& r) { return to_json(r); }

// ---------------------------------------------------------------- generate

struct GenerateFlags {
  std::optional<int> count;
  std::optional<double> good_frac;
  std::optional<std::string> preset_name;
  std::optional<std::string> source;
  std::optional<std::string> id_prefix;
  std::optional<std::string> name;
  bool noise_free = false;
  std::vector<double> fault_mix;
};

int cmd_generate(const Common& c, const GenerateFlags& f, std::ostream& out) {
  const json file = load_config_file(c.config_path);
  json g = {{"count", 100}, {"good_fraction", 0.4}, {"preset", "defaults"}, {"source", "synthetic"},
            {"id_prefix", "syn"}, {"name", "synthetic"}, {"noise_free", false}};
  const json gf = section(file, "generate");
  reject_unknown_keys(gf, {"count", "good_fraction", "preset", "source", "id_prefix", "name", "noise_free"},
                      "generate section");
  g.merge_patch(gf);
  if (f.count) g["count"] = *f.count;
  if (f.good_frac) g["good_fraction"] = *f.good_frac;
  if (f.preset_name) g["preset"] = *f.preset_name;
  if (f.source) g["source"] = *f.source;
  if (f.id_prefix) g["id_prefix"] = *f.id_prefix;
  if (f.name) g["name"] = *f.name;
  if (f.noise_free) g["noise_free"] = true;

  SimulatorConfig sim = simulator_config_from_json(section(file, "simulator"), preset(g["preset"].get<std::string>()));
  if (g["noise_free"].get<bool>()) sim = sim.without_noise();
  if (!f.fault_mix.empty()) {
    if (f.fault_mix.size() != kNumFaultModes) throw ConfigError("--fault-mix needs 4 values");
    std::copy(f.fault_mix.begin(), f.fault_mix.end(), sim.fault_mix.begin());
    sim.validate();
  }
  const std::uint64_t seed = resolve_seed(c, file);
  sim.rng_seed = seed;
  const int count = g["count"].get<int>();
  const double good = g["good_fraction"].get<double>();
  if (count < 1) throw ConfigError("--count must be >= 1");
  if (!(good >= 0.0 && good <= 1.0)) throw ConfigError("--good-frac must lie in [0, 1]");

  GenerateOptions opt;
  opt.source = parse_source(g["source"].get<std::string>());
  opt.id_prefix = g["id_prefix"].get<std::string>();
  opt.name = g["name"].get<std::string>();
  const fs::path dir = resolve_output(c, file, "generate");
  json resolved = {{"command", "generate"}, {"seed", seed}, {"output", dir.string()}, {"generate", g},
                   {"simulator", to_json(sim)}};
  echo_config(dir, resolved);

  const Dataset ds = generate_dataset(sim, count, {good, 1.0 - good}, seed, opt);
  write_dataset(ds, dir);
  out << "generated " << balance_line(ds) << " -> " << dir.string() << "\n";
  return kExitOk;
}

// ----------------------------------------------------------------- augment

int cmd_augment(const Common& c, const std::string& input, std::optional<int> factor_flag, std::ostream& out) {
  const json file = load_config_file(c.config_path);
  json a = {{"factor", 4}};
  const json af = section(file, "augment");
  reject_unknown_keys(af, {"factor"}, "augment section");
  a.merge_patch(af);
  if (factor_flag) a["factor"] = *factor_flag;
  const int factor = a["factor"].get<int>();
  const fs::path dir = resolve_output(c, file, "augment");
  echo_config(dir, {{"command", "augment"}, {"input", input}, {"output", dir.string()}, {"augment", a}});
  const Dataset in = read_dataset(input);
  const Dataset ds = augment_dataset(in, factor);
  write_dataset(ds, dir);
  out << "augmented " << in.size() << " -> " << ds.size() << " records (factor " << factor << ") -> "
      << dir.string() << "\n";
  return kExitOk;
}

// ------------------------------------------------------------------- split

int cmd_split(const Common& c, const std::string& input, std::optional<double> frac_flag, std::ostream& out) {
  const json file = load_config_file(c.config_path);
  json s = {{"val_fraction", 0.33}};
  const json sf = section(file, "split");
  reject_unknown_keys(sf, {"val_fraction"}, "split section");
  s.merge_patch(sf);
  if (frac_flag) s["val_fraction"] = *frac_flag;
  const std::uint64_t seed = resolve_seed(c, file);
  const fs::path dir = resolve_output(c, file, "split");
  echo_config(dir, {{"command", "split"}, {"input", input}, {"seed", seed}, {"output", dir.string()}, {"split", s}});
  const Dataset in = read_dataset(input);
  const Split sp = split_real(in, {s["val_fraction"].get<double>(), seed});
  write_dataset(sp.train, dir / "train", "train");
  write_dataset(sp.val, dir / "val", "val");
  out << "split " << in.size() << " -> " << sp.train.size() << " train / " << sp.val.size() << " val -> "
      << dir.string() << "\n";
  return kExitOk;
}

// --------------------------------------------------------------------- mix

struct MixFlags {
  std::string real_train;
  std::string pool;
  std::optional<std::string> mode;
  std::optional<double> percent;
  std::optional<long long> count;
  std::optional<long long> real_total;
  std::optional<long long> fixed_size;
};

int cmd_mix(const Common& c, const MixFlags& f, std::ostream& out) {
  const json file = load_config_file(c.config_path);
  json m = {{"mode", "additive"}, {"percent", 0.0}, {"count", 0}, {"real_total", 1100}, {"fixed_size", nullptr}};
  const json mf = section(file, "mix");
  reject_unknown_keys(mf, {"mode", "percent", "count", "real_total", "fixed_size"}, "mix section");
  m.merge_patch(mf);
  if (f.mode) m["mode"] = *f.mode;
  if (f.percent) m["percent"] = *f.percent;
  if (f.count) m["count"] = *f.count;
  if (f.real_total) m["real_total"] = *f.real_total;
  if (f.fixed_size) m["fixed_size"] = *f.fixed_size;
  const std::uint64_t seed = resolve_seed(c, file);
  const MixMode mode = parse_mix_mode(m["mode"].get<std::string>());

  const Dataset real_train = read_dataset(f.real_train);
  const Dataset pool = read_dataset(f.pool);
  if (m["fixed_size"].is_null()) m["fixed_size"] = static_cast<long long>(real_train.size());
  const fs::path dir = resolve_output(c, file, "mix");
  echo_config(dir, {{"command", "mix"},
                    {"real_train", f.real_train},
                    {"pool", f.pool},
                    {"seed", seed},
                    {"output", dir.string()},
                    {"mix", m}});

  const MixResult r = mode == MixMode::Additive
                          ? mix_additive(real_train, pool, m["percent"].get<double>(),
                                         m["real_total"].get<long long>(), seed)
                          : mix_substitutive(real_train, pool, m["count"].get<long long>(),
                                             m["fixed_size"].get<long long>(), seed, m["real_total"].get<long long>());
  write_dataset(r.train, dir, "train");
  write_text_file(dir / "accounting.json", accounting_summary(r.accounting).dump(2) + "\n");
  const auto& a = r.accounting;
  char frac[32];
  std::snprintf(frac, sizeof frac, "%.1f", 100.0 * a.synthetic_fraction_training);
  out << "mix " << to_string(mode) << ": " << a.real_count << " real + " << a.synthetic_count << " synthetic = "
      << a.training_count << " training records (synthetic fraction " << frac << "%, total " << a.total_count
      << ") -> " << dir.string() << "\n";
  return kExitOk;
}

// ------------------------------------------------------------------- train

std::string history_csv(const TrainingHistory& h) {
  std::string s = "epoch,train_acc,train_loss,val_acc,val_loss\n";
  for (size_t e = 0; e < h.size(); ++e) {
    s += std::to_string(e + 1) + "," + format_double(h[e].train_accuracy) + "," + format_double(h[e].train_loss) +
         "," + format_double(h[e].val_accuracy) + "," + format_double(h[e].val_loss) + "\n";
  }
  return s;
}

int cmd_train(const Common& c, const std::string& train_dir, const std::string& val_dir, const ModelFlags& mf,
              std::ostream& out, std::ostream& err) {
  const json file = load_config_file(c.config_path);
  json mj = to_json(ModelConfig{});
  mj.merge_patch(section(file, "model"));
  mf.apply(mj);
  const std::uint64_t seed = resolve_seed(c, file);
  mj["seed"] = seed;
  const ModelConfig cfg = model_config_from_json(mj);
  const fs::path dir = resolve_output(c, file, "train");
  echo_config(dir, {{"command", "train"},
                    {"train", train_dir},
                    {"val", val_dir},
                    {"seed", seed},
                    {"output", dir.string()},
                    {"model", to_json(cfg)}});

  const Dataset tr = read_dataset(train_dir);
  const Dataset va = read_dataset(val_dir);
  TrainOptions opt;
  opt.should_stop = [] { return interrupt_flag().load(); };
  if (c.verbosity > 0) {
    opt.on_epoch = [&err](int e, const EpochMetrics& m) {
      char buf[160];
      std::snprintf(buf, sizeof buf, "epoch %d: train acc %.4f loss %.5f | val acc %.4f loss %.5f\n", e + 1,
                    m.train_accuracy, m.train_loss, m.val_accuracy, m.val_loss);
      err << buf;
    };
  }
  const TrainResult r = train(cfg, tr, va, seed, opt);
  save_model(r.model, dir / "model.json");
  write_text_file(dir / "history.csv", history_csv(r.history));
  const EvalResult ev = evaluate(r.final_val_scores, labels_of(va));
  write_text_file(dir / "metrics.json", metrics_json(ev).dump(2) + "\n");
  char buf[160];
  std::snprintf(buf, sizeof buf, "trained %d epochs: val acc %.4f, loss %.5f, F1 %.4f, AUC-ROC %.4f", cfg.epochs,
                ev.accuracy, ev.loss, ev.f1, ev.auc_roc);
  out << buf << " -> " << dir.string() << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------- evaluate

int cmd_evaluate(const Common& c, const std::string& model_path, const std::string& data_dir, std::ostream& out) {
  const json file = load_config_file(c.config_path);
  const fs::path dir = resolve_output(c, file, "evaluate");
  echo_config(dir, {{"command", "evaluate"}, {"model", model_path}, {"data", data_dir}, {"output", dir.string()}});
  const Model model = load_model(model_path);
  const DatasetManifest manifest = read_manifest(data_dir);
  if (model.schema_fingerprint != manifest.schema_fingerprint) {
    throw DataError("schema mismatch: model was trained on schema " + model.schema_fingerprint + ", dataset " +
                    data_dir + " has schema " + manifest.schema_fingerprint);
  }
  if (model.schema_fingerprint != FeatureSchema::canonical().fingerprint()) {
    throw DataError("schema mismatch: model schema " + model.schema_fingerprint + " is not the current schema");
  }
  const Dataset ds = read_dataset(data_dir);
  const auto scores = predict(model, ds);
  const EvalResult ev = evaluate(scores, labels_of(ds));
  write_text_file(dir / "metrics.json", metrics_json(ev).dump(2) + "\n");
  char buf[160];
  std::snprintf(buf, sizeof buf, "evaluated %zu records: acc %.4f, loss %.5f, F1 %.4f, AUC-ROC %.4f", ds.size(),
                ev.accuracy, ev.loss, ev.f1, ev.auc_roc);
  out << buf << " -> " << dir.string() << "\n";
  return kExitOk;
}

// ------------------------------------------------------------------- sweep

struct SweepFlags {
  std::optional<std::string> mode;
  std::vector<double> levels;
  std::optional<int> runs_per_level;
  std::optional<int> workers;
  std::optional<std::string> real;
  std::optional<std::string> synthetic;
  std::optional<double> val_fraction;
  std::optional<long long> fixed_size;
};

json default_data_json(const DefaultData& d) {
  return {{"real_cycles", d.real_cycles},
          {"real_good_fraction", d.real_good_fraction},
          {"synthetic_cycles", d.synthetic_cycles},
          {"synthetic_good_fraction", d.synthetic_good_fraction},
          {"augment_factor", d.augment_factor},
          {"real_simulator", to_json(d.real_simulator)},
          {"synthetic_simulator", to_json(d.synthetic_simulator)}};
}

DefaultData default_data_from_json(const json& j) {
  reject_unknown_keys(j,
                      {"real_cycles", "real_good_fraction", "synthetic_cycles", "synthetic_good_fraction",
                       "augment_factor", "real_simulator", "synthetic_simulator"},
                      "sweep.default_data");
  DefaultData d;
  if (j.contains("real_cycles")) d.real_cycles = j.at("real_cycles").get<int>();
  if (j.contains("real_good_fraction")) d.real_good_fraction = j.at("real_good_fraction").get<double>();
  if (j.contains("synthetic_cycles")) d.synthetic_cycles = j.at("synthetic_cycles").get<int>();
  if (j.contains("synthetic_good_fraction")) d.synthetic_good_fraction = j.at("synthetic_good_fraction").get<double>();
  if (j.contains("augment_factor")) d.augment_factor = j.at("augment_factor").get<int>();
  if (j.contains("real_simulator")) {
    d.real_simulator = simulator_config_from_json(j.at("real_simulator"), SimulatorConfig::stand_in_real());
  }
  if (j.contains("synthetic_simulator")) {
    d.synthetic_simulator = simulator_config_from_json(j.at("synthetic_simulator"), SimulatorConfig::defaults());
  }
  return d;
}

int cmd_sweep(const Common& c, const SweepFlags& f, const ModelFlags& mf, std::ostream& out, std::ostream& err) {
  const json file = load_config_file(c.config_path);
  const json sf = section(file, "sweep");
  reject_unknown_keys(sf,
                      {"mode", "levels", "runs_per_level", "workers", "real_dataset", "synthetic_dataset",
                       "val_fraction", "fixed_size", "default_data"},
                      "sweep section");
  std::string mode_name = sf.value("mode", std::string("additive"));
  if (f.mode) mode_name = *f.mode;
  SweepConfig cfg = SweepConfig::defaults(parse_mix_mode(mode_name));
  try {
    if (sf.contains("levels")) cfg.levels = sf.at("levels").get<std::vector<double>>();
    if (sf.contains("runs_per_level")) cfg.runs_per_level = sf.at("runs_per_level").get<int>();
    if (sf.contains("workers")) cfg.workers = sf.at("workers").get<int>();
    if (sf.contains("real_dataset")) cfg.real_dataset = sf.at("real_dataset").get<std::string>();
    if (sf.contains("synthetic_dataset")) cfg.synthetic_dataset = sf.at("synthetic_dataset").get<std::string>();
    if (sf.contains("val_fraction")) cfg.val_fraction = sf.at("val_fraction").get<double>();
    if (sf.contains("fixed_size")) cfg.fixed_size = sf.at("fixed_size").get<long long>();
    if (sf.contains("default_data")) cfg.default_data = default_data_from_json(sf.at("default_data"));
  } catch (const json::exception& e) {
    throw ConfigError(std::string("sweep section: ") + e.what());
  }
  if (!f.levels.empty()) cfg.levels = f.levels;
  if (f.runs_per_level) cfg.runs_per_level = *f.runs_per_level;
  if (f.workers) cfg.workers = *f.workers;
  if (f.real) cfg.real_dataset = *f.real;
  if (f.synthetic) cfg.synthetic_dataset = *f.synthetic;
  if (f.val_fraction) cfg.val_fraction = *f.val_fraction;
  if (f.fixed_size) cfg.fixed_size = *f.fixed_size;

  json mj = to_json(ModelConfig{});
  mj.merge_patch(section(file, "model"));
  mf.apply(mj);
  cfg.base_seed = resolve_seed(c, file);
  mj["seed"] = cfg.base_seed;
  cfg.model = model_config_from_json(mj);
  cfg.output_dir = resolve_output(c, file, "sweep");
  cfg.validate();

  // Worker count does not affect results, so it stays out of the echoed
  // config to keep output directories comparable across machines.
  json resolved = {{"command", "sweep"},
                   {"seed", cfg.base_seed},
                   {"output", cfg.output_dir.string()},
                   {"model", to_json(cfg.model)},
                   {"sweep",
                    {{"mode", to_string(cfg.mode)},
                     {"levels", cfg.levels},
                     {"runs_per_level", cfg.runs_per_level},
                     {"val_fraction", cfg.val_fraction},
                     {"fixed_size", cfg.fixed_size},
                     {"real_dataset", cfg.real_dataset ? json(cfg.real_dataset->string()) : json(nullptr)},
                     {"synthetic_dataset",
                      cfg.synthetic_dataset ? json(cfg.synthetic_dataset->string()) : json(nullptr)},
                     {"default_data", default_data_json(cfg.default_data)}}}};
  echo_config(cfg.output_dir, resolved);

  const SweepData data = prepare_sweep_data(cfg);
  if (c.verbosity >= 0) {
    err << "sweep " << to_string(cfg.mode) << ": " << cfg.levels.size() << " levels x " << cfg.runs_per_level
        << " runs; real " << data.real.size() << ", synthetic pool " << data.synthetic_pool.size() << "\n";
  }
  SweepOptions opt;
  opt.should_stop = [] { return interrupt_flag().load(); };
  if (c.verbosity > 0) {
    opt.on_cell = [&err](const CellResult& r, size_t done, size_t total) {
      char buf[160];
      std::snprintf(buf, sizeof buf, "[%zu/%zu] level %s run %zu: val acc %.4f\n", done, total,
                    level_tag(r.level).c_str(), r.run_index, r.val.accuracy);
      err << buf;
    };
  }
  const SweepReport report = run_sweep(cfg, data, opt);
  render_report(report, cfg.output_dir);
  out << report_markdown(report);
  out << "report written to " << cfg.output_dir.string() << "\n";
  return kExitOk;
}

// ------------------------------------------------------------------ report

int cmd_report(const Common& c, const std::string& input, std::ostream& out) {
  const json file = load_config_file(c.config_path);
  const fs::path in = fs::is_directory(input) ? fs::path(input) / "report.json" : fs::path(input);
  json j;
  try {
    j = json::parse(read_text_file(in));
  } catch (const json::parse_error& e) {
    throw DataError(in.string() + ": " + e.what());
  }
  const SweepReport report = report_from_json(j);
  const fs::path dir = c.output.empty() && !file.contains("output") ? in.parent_path() : resolve_output(c, file, "report");
  render_report(report, dir);
  out << report_markdown(report);
  return kExitOk;
}

}  // namespace

std::atomic<bool>& interrupt_flag() {
  static std::atomic<bool> flag{false};
  return flag;
}

void install_signal_handlers() { std::signal(SIGINT, on_sigint); }

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Synthetic injection-molding data, LSTM quality classification, and enrichment sweeps."};
  app.name(args.empty() ? "moldsynth" : args.front());
  app.require_subcommand(1);
  app.set_version_flag("--version", "moldsynth 1.0");

  Common common;
  auto add_common = [&common](CLI::App* sub) {
    sub->add_option("-c,--config", common.config_path, "JSON config file; explicit flags override it");
    sub->add_option("-o,--output", common.output,
                    std::string("Output directory (default: $") + kOutputRootEnv + "/<command>)");
    sub->add_option("--seed", common.seed, "Base seed");
    sub->add_flag("-v,--verbose", common.verbosity, "More progress output");
  };

  GenerateFlags gen;
  auto* g = app.add_subcommand("generate", "Simulate cycles and write a labelled dataset");
  add_common(g);
  g->add_option("--count", gen.count, "Number of cycles");
  g->add_option("--good-frac", gen.good_frac, "Fraction of Good cycles");
  g->add_option("--preset", gen.preset_name, "Simulator preset: defaults | stand_in_real");
  g->add_option("--source", gen.source, "Provenance tag: synthetic | real");
  g->add_option("--id-prefix", gen.id_prefix, "Cycle id prefix");
  g->add_option("--name", gen.name, "Dataset name");
  g->add_flag("--noise-free", gen.noise_free, "Disable sensor noise");
  g->add_option("--fault-mix", gen.fault_mix, "Probabilities of none,short_shot,pressure_loss,cold_melt")
      ->delimiter(',');

  std::string aug_input;
  std::optional<int> aug_factor;
  auto* a = app.add_subcommand("augment", "Quadruple a dataset by phase decimation");
  add_common(a);
  a->add_option("-i,--input", aug_input, "Dataset directory")->required();
  a->add_option("--factor", aug_factor, "Decimation factor");

  std::string split_input;
  std::optional<double> split_frac;
  auto* s = app.add_subcommand("split", "Split real data into train/ and val/");
  add_common(s);
  s->add_option("-i,--input", split_input, "Dataset directory")->required();
  s->add_option("--val-frac", split_frac, "Validation fraction");

  MixFlags mix;
  auto* m = app.add_subcommand("mix", "Enrich a real training set with synthetic records");
  add_common(m);
  m->add_option("--real-train", mix.real_train, "Real training dataset directory")->required();
  m->add_option("--pool", mix.pool, "Synthetic pool dataset directory")->required();
  m->add_option("--mode", mix.mode, "additive | substitutive");
  m->add_option("--percent", mix.percent, "Additive: synthetic records as percent of the real total");
  m->add_option("--count", mix.count, "Substitutive: number of synthetic records");
  m->add_option("--real-total", mix.real_total, "Size of the full real dataset (train + val)");
  m->add_option("--fixed-size", mix.fixed_size, "Substitutive training-set size");

  std::string train_dir, val_dir;
  ModelFlags train_model;
  auto* t = app.add_subcommand("train", "Train the LSTM classifier");
  add_common(t);
  t->add_option("--train", train_dir, "Training dataset directory")->required();
  t->add_option("--val", val_dir, "Validation dataset directory")->required();
  train_model.add(t);

  std::string model_path, eval_dir;
  auto* e = app.add_subcommand("evaluate", "Score a dataset with a trained model");
  add_common(e);
  e->add_option("--model", model_path, "model.json from train")->required();
  e->add_option("--data", eval_dir, "Dataset directory")->required();

  SweepFlags sweep;
  ModelFlags sweep_model;
  auto* w = app.add_subcommand("sweep", "Run an enrichment sweep and write the report");
  add_common(w);
  w->add_option("--mode", sweep.mode, "additive | substitutive");
  w->add_option("--levels", sweep.levels, "Comma-separated levels (percents or synthetic counts)")->delimiter(',');
  w->add_option("--runs-per-level", sweep.runs_per_level, "Runs per level")->check(CLI::PositiveNumber);
  w->add_option("--workers", sweep.workers, "Worker threads (0 = hardware concurrency)");
  w->add_option("--real", sweep.real, "Real dataset directory (default: built-in stand-in)");
  w->add_option("--synthetic", sweep.synthetic, "Synthetic pool directory (default: generated)");
  w->add_option("--val-frac", sweep.val_fraction, "Validation fraction");
  w->add_option("--fixed-size", sweep.fixed_size, "Substitutive training-set size");
  sweep_model.add(w);

  std::string report_input;
  auto* r = app.add_subcommand("report", "Re-render report files from report.json");
  add_common(r);
  r->add_option("-i,--input", report_input, "report.json or a sweep output directory")->required();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    if (!reversed.empty()) reversed.pop_back();
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::CallForVersion&) {
    out << app.version() << "\n";
    return kExitOk;
  } catch (const CLI::ParseError& ex) {
    err << "error: " << ex.what() << "\n";
    return kExitConfig;
  }

  try {
    if (g->parsed()) return cmd_generate(common, gen, out);
    if (a->parsed()) return cmd_augment(common, aug_input, aug_factor, out);
    if (s->parsed()) return cmd_split(common, split_input, split_frac, out);
    if (m->parsed()) return cmd_mix(common, mix, out);
    if (t->parsed()) return cmd_train(common, train_dir, val_dir, train_model, out, err);
    if (e->parsed()) return cmd_evaluate(common, model_path, eval_dir, out);
    if (w->parsed()) return cmd_sweep(common, sweep, sweep_model, out, err);
    if (r->parsed()) return cmd_report(common, report_input, out);
  } catch (const CancelledError& ex) {
    err << "interrupted: " << ex.what() << "\n";
    return kExitInterrupted;
  } catch (const ConfigError& ex) {
    err << "config error: " << ex.what() << "\n";
    return kExitConfig;
  } catch (const DataError& ex) {
    err << "data error: " << ex.what() << "\n";
    return kExitData;
  } catch (const json::exception& ex) {
    err << "config error: " << ex.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& ex) {
    err << "error: " << ex.what() << "\n";
    return kExitRuntime;
  }
  return kExitConfig;
}

}  // namespace moldsynth::cli
