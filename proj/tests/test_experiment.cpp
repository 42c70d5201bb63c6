#include <doctest.h>

#include "moldsynth/experiment.hpp"
#include "moldsynth/storage.hpp"
#include "test_util.hpp"

#include <atomic>
#include <fstream>
#include <sstream>

using namespace moldsynth;

namespace {

SweepConfig tiny_config(const std::filesystem::path& out) {
  SweepConfig c = SweepConfig::defaults(MixMode::Additive);
  c.levels = {0, 30};
  c.runs_per_level = 2;
  c.base_seed = 17;
  c.output_dir = out;
  c.model.units = {6};
  c.model.epochs = 2;
  c.model.batch_size = 32;
  c.model.learning_rate = 0.01;
  c.default_data.real_cycles = 30;
  c.default_data.synthetic_cycles = 20;
  return c;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("sweep defaults and validation") {
  const auto add = SweepConfig::defaults(MixMode::Additive);
  CHECK(add.levels == std::vector<double>{0, 5, 10, 15, 20, 25, 30});
  CHECK(add.runs_per_level == 50);
  CHECK(add.val_fraction == 0.33);
  const auto sub = SweepConfig::defaults(MixMode::Substitutive);
  CHECK(sub.levels.front() == 0);
  auto bad = add;
  bad.levels = {0, 0};
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = add;
  bad.levels = {101};
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = add;
  bad.runs_per_level = 0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("cell seeds are distinct per cell and tied to the base seed") {
  CHECK(cell_seed(5, 0, 0) == (5 ^ mix64(0, 0)));
  CHECK(cell_seed(5, 1, 0) != cell_seed(5, 0, 1));
  CHECK(level_tag(5) == "5");
  CHECK(level_tag(12.5) == "12.5");
}

TEST_CASE("default sweep data quadruples both sources") {
  const auto cfg = tiny_config(test::scratch_dir("exp_data"));
  const auto data = prepare_sweep_data(cfg);
  CHECK(data.real.size() == 120);
  CHECK(data.synthetic_pool.size() == 80);
  CHECK(data.real.count(Source::Synthetic) == 0);
  CHECK(data.synthetic_pool.count(Source::Real) == 0);
  // round(30 * 0.565) = 17 good cycles, x4.
  CHECK(data.real.count(LabelValue::Good) == 68);
  CHECK(data.synthetic_pool.count(LabelValue::Good) == 32);
}

TEST_CASE("small sweep: counts, determinism, and report") {
  const auto dir = test::scratch_dir("exp_sweep");
  auto cfg = tiny_config(dir / "a");
  const auto data = prepare_sweep_data(cfg);
  cfg.workers = 1;
  const auto rep = run_sweep(cfg, data);
  REQUIRE(rep.cells.size() == 4);
  REQUIRE(rep.levels.size() == 2);

  // 120 real: 40 validation (round(0.33 * 120)), 80 train; 30% of 120 = 36 synthetic.
  const auto& a0 = rep.levels[0].accounting;
  const auto& a1 = rep.levels[1].accounting;
  CHECK(a0.validation_count == 40);
  CHECK(a0.real_count == 80);
  CHECK(a0.synthetic_count == 0);
  CHECK(a1.synthetic_count == 36);
  CHECK(a1.training_count == 116);
  for (const auto& c : rep.cells) {
    CHECK(c.accounting.validation_count == 40);
    CHECK(c.val.confusion.total() == 40);
    CHECK(c.train.confusion.total() == c.accounting.training_count);
    CHECK(c.history.size() == 2);
    CHECK(c.seed == cell_seed(17, c.level_index, c.run_index));
  }

  // Level means equal aggregate_runs over that level's cells.
  for (size_t li = 0; li < 2; ++li) {
    std::vector<EvalResult> vals;
    for (const auto& c : rep.cells) {
      if (c.level_index == li) vals.push_back(c.val);
    }
    const auto agg = aggregate_runs(vals);
    CHECK(rep.levels[li].val.mean.accuracy == agg.mean.accuracy);
    CHECK(rep.levels[li].val.stddev.accuracy == agg.stddev.accuracy);
    CHECK(rep.levels[li].curve.size() == 2);
    CHECK(rep.levels[li].curve.back().val_accuracy == agg.mean.accuracy);
  }

  // Worker count does not change any result.
  auto cfg2 = cfg;
  cfg2.workers = 3;
  const auto rep2 = run_sweep(cfg2, data);
  CHECK(report_csv(rep) == report_csv(rep2));
  CHECK(report_to_json(rep) == report_to_json(rep2));

  // Rendering is byte-stable and the JSON round-trips.
  render_report(rep, dir / "r1");
  render_report(report_from_json(report_to_json(rep)), dir / "r2");
  for (const char* f : {"report.csv", "report.md", "report.json", "curves/0.csv", "curves/30.csv", "runs/30/1.json"}) {
    CAPTURE(f);
    REQUIRE(std::filesystem::exists(dir / "r1" / f));
    CHECK(slurp(dir / "r1" / f) == slurp(dir / "r2" / f));
  }

  // report.csv has a header plus one row per level with the right counts.
  std::istringstream csv(slurp(dir / "r1" / "report.csv"));
  std::string line;
  std::getline(csv, line);
  CHECK(line.rfind("level,total_count,training_count,real_count,synthetic_count", 0) == 0);
  std::getline(csv, line);
  CHECK(line.rfind("0,120,80,80,0,", 0) == 0);
  std::getline(csv, line);
  CHECK(line.rfind("30,156,116,80,36,", 0) == 0);
  CHECK(slurp(dir / "r1" / "report.md").find("<!-- moldsynth report schema v1 -->") != std::string::npos);
}

TEST_CASE("cancelled sweep writes partial results") {
  const auto dir = test::scratch_dir("exp_cancel");
  auto cfg = tiny_config(dir);
  cfg.workers = 1;
  const auto data = prepare_sweep_data(cfg);
  std::atomic<int> cells{0};
  SweepOptions opts;
  opts.on_cell = [&](const CellResult&, size_t, size_t) { ++cells; };
  opts.should_stop = [&] { return cells.load() >= 1; };
  CHECK_THROWS_AS(run_sweep(cfg, data, opts), CancelledError);
  const auto partial = json::parse(slurp(dir / "partial_results.json"));
  CHECK(partial["status"] == "cancelled");
  CHECK(partial["completed_cells"] == 1);
  CHECK(partial["total_cells"] == 4);
  CHECK(partial["cells"].size() == 1);
}

TEST_CASE("infeasible level fails before training") {
  auto cfg = tiny_config(test::scratch_dir("exp_infeasible"));
  cfg.levels = {0, 100};  // needs 120 synthetic, pool has 80
  const auto data = prepare_sweep_data(cfg);
  CHECK_THROWS_AS(run_sweep(cfg, data), DataError);
}
