#include <doctest.h>

#include "moldsynth/cli.hpp"
#include "moldsynth/json_io.hpp"
#include "moldsynth/storage.hpp"
#include "test_util.hpp"

#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>
#include <sys/wait.h>

using namespace moldsynth;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

/// Runs the CLI in-process; `args` excludes the program name.
Run run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "moldsynth");
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Every regular file under `dir`, keyed by relative path.
std::map<std::string, std::string> tree(const std::filesystem::path& dir) {
  std::map<std::string, std::string> files;
  for (const auto& e : std::filesystem::recursive_directory_iterator(dir)) {
    if (e.is_regular_file()) files[std::filesystem::relative(e.path(), dir).string()] = slurp(e.path());
  }
  return files;
}

}  // namespace

TEST_CASE("generate writes the requested balance and is reproducible") {
  const auto dir = test::scratch_dir("cli_gen");
  const auto r = run_cli({"generate", "--count", "20", "--good-frac", "0.4", "--seed", "9", "-o", (dir / "a").string()});
  REQUIRE(r.code == 0);
  const auto ds = read_dataset(dir / "a");
  CHECK(ds.size() == 20);
  CHECK(ds.count(LabelValue::Good) == 8);
  CHECK(ds.count(Source::Synthetic) == 20);
  CHECK(std::filesystem::exists(dir / "a" / "resolved_config.json"));

  REQUIRE(run_cli({"generate", "--count", "20", "--good-frac", "0.4", "--seed", "9", "-o", (dir / "b").string()}).code == 0);
  auto ta = tree(dir / "a");
  auto tb = tree(dir / "b");
  // The echoed config names its own output directory; everything else matches.
  ta.erase("resolved_config.json");
  tb.erase("resolved_config.json");
  CHECK(ta == tb);

  const auto resolved = json::parse(slurp(dir / "a" / "resolved_config.json"));
  CHECK(resolved["seed"] == 9);
}

TEST_CASE("config file values apply and flags override them") {
  const auto dir = test::scratch_dir("cli_cfg");
  {
    std::ofstream cfg(dir / "c.json");
    cfg << R"({"seed": 3, "generate": {"count": 10, "good_fraction": 0.5}})";
  }
  REQUIRE(run_cli({"generate", "-c", (dir / "c.json").string(), "--count", "6", "-o", (dir / "o").string()}).code == 0);
  const auto ds = read_dataset(dir / "o");
  CHECK(ds.size() == 6);
  CHECK(ds.count(LabelValue::Good) == 3);
  const auto resolved = json::parse(slurp(dir / "o" / "resolved_config.json"));
  CHECK(resolved["seed"] == 3);
}

TEST_CASE("exit codes") {
  const auto dir = test::scratch_dir("cli_exit");
  CHECK(run_cli({}).code == 2);
  CHECK(run_cli({"generate", "--no-such-flag"}).code == 2);
  CHECK(run_cli({"generate", "--count", "4", "--good-frac", "1.5", "-o", (dir / "g").string()}).code == 2);
  CHECK(run_cli({"generate", "--preset", "nope", "-o", (dir / "g").string()}).code == 2);
  {
    std::ofstream cfg(dir / "bad.json");
    cfg << R"({"sede": 1})";
  }
  const auto bad = run_cli({"generate", "-c", (dir / "bad.json").string(), "-o", (dir / "g").string()});
  CHECK(bad.code == 2);
  CHECK(bad.err.find("sede") != std::string::npos);

  const auto missing = run_cli({"augment", "-i", (dir / "does_not_exist").string(), "-o", (dir / "x").string()});
  CHECK(missing.code == 3);
  CHECK_FALSE(missing.err.empty());

  // A manifest written under another schema is rejected as a data error.
  REQUIRE(run_cli({"generate", "--count", "4", "-o", (dir / "g").string()}).code == 0);
  auto manifest = json::parse(slurp(dir / "g" / "manifest.json"));
  manifest["schema_fingerprint"] = "0000";
  {
    std::ofstream m(dir / "g" / "manifest.json");
    m << manifest.dump(2);
  }
  const auto mismatch = run_cli({"augment", "-i", (dir / "g").string(), "-o", (dir / "y").string()});
  CHECK(mismatch.code == 3);
  CHECK(mismatch.err.find("schema") != std::string::npos);
}

TEST_CASE("output root from the environment") {
  const auto dir = test::scratch_dir("cli_env");
  ::setenv(cli::kOutputRootEnv, dir.c_str(), 1);
  const auto r = run_cli({"generate", "--count", "4"});
  ::unsetenv(cli::kOutputRootEnv);
  REQUIRE(r.code == 0);
  CHECK(std::filesystem::exists(dir / "generate" / "manifest.json"));
}

TEST_CASE("augment, split and mix pipeline") {
  const auto dir = test::scratch_dir("cli_pipe");
  REQUIRE(run_cli({"generate", "--count", "10", "--good-frac", "0.5", "--preset", "stand_in_real", "--source", "real",
                   "--id-prefix", "real", "--seed", "1", "-o", (dir / "real").string()})
              .code == 0);
  REQUIRE(run_cli({"augment", "-i", (dir / "real").string(), "-o", (dir / "real4").string()}).code == 0);
  CHECK(read_dataset(dir / "real4").size() == 40);
  REQUIRE(run_cli({"split", "-i", (dir / "real4").string(), "--seed", "2", "-o", (dir / "split").string()}).code == 0);
  // round(0.33 * 40) = 13 validation records.
  CHECK(read_dataset(dir / "split" / "val").size() == 13);
  CHECK(read_dataset(dir / "split" / "train").size() == 27);

  REQUIRE(run_cli({"generate", "--count", "15", "--seed", "3", "-o", (dir / "syn").string()}).code == 0);
  REQUIRE(run_cli({"augment", "-i", (dir / "syn").string(), "-o", (dir / "syn4").string()}).code == 0);
  // 5 % of the 1100-record real total adds 55 synthetic records.
  const auto mix = run_cli({"mix", "--real-train", (dir / "split" / "train").string(), "--pool",
                            (dir / "syn4").string(), "--percent", "5", "-o", (dir / "mix").string()});
  REQUIRE(mix.code == 0);
  const auto acc = json::parse(slurp(dir / "mix" / "accounting.json"));
  CHECK(acc["synthetic_count"] == 55);
  CHECK(acc["real_count"] == 27);
  CHECK(acc["training_count"] == 82);
  const auto mixed = read_dataset(dir / "mix");
  CHECK(mixed.size() == 82);
  CHECK(mixed.count(Source::Synthetic) == 55);

  // A pool that is too small is a data error.
  CHECK(run_cli({"mix", "--real-train", (dir / "split" / "train").string(), "--pool", (dir / "syn4").string(),
                 "--percent", "10", "-o", (dir / "mix2").string()})
            .code == 3);

  // Train and evaluate a tiny model end to end.
  const auto tr = run_cli({"train", "--train", (dir / "mix").string(), "--val", (dir / "split" / "val").string(),
                           "--epochs", "2", "--units", "4", "--seed", "4", "-o", (dir / "model").string()});
  REQUIRE(tr.code == 0);
  CHECK(std::filesystem::exists(dir / "model" / "model.json"));
  CHECK(std::filesystem::exists(dir / "model" / "history.csv"));
  const auto ev = run_cli({"evaluate", "--model", (dir / "model" / "model.json").string(), "--data",
                           (dir / "split" / "val").string(), "-o", (dir / "eval").string()});
  REQUIRE(ev.code == 0);
  CHECK(slurp(dir / "eval" / "metrics.json") == slurp(dir / "model" / "metrics.json"));

  // A model from another schema is refused.
  auto model = json::parse(slurp(dir / "model" / "model.json"));
  model["schema_fingerprint"] = "ffff";
  {
    std::ofstream m(dir / "model" / "other.json");
    m << model.dump();
  }
  const auto refused = run_cli({"evaluate", "--model", (dir / "model" / "other.json").string(), "--data",
                                (dir / "split" / "val").string(), "-o", (dir / "eval2").string()});
  CHECK(refused.code == 3);
  CHECK(refused.err.find("schema mismatch") != std::string::npos);
}

TEST_CASE("installed binary reports usage errors with exit code 2") {
  const std::string cmd = std::string("\"") + MOLDSYNTH_CLI_PATH + "\" generate --count abc >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  REQUIRE(WIFEXITED(status));
  CHECK(WEXITSTATUS(status) == 2);
}
