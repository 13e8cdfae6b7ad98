#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "pdball/commands.hpp"

using namespace pdball;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("pdball_cli_" + std::to_string(std::random_device{}()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

std::string slurp(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  REQUIRE(bool(is));
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> lines;
  std::stringstream ss(text);
  std::string line;
  while (std::getline(ss, line)) lines.push_back(line);
  return lines;
}

std::string last_field(const std::string& csv_line) {
  return csv_line.substr(csv_line.rfind(',') + 1);
}

std::string write_config(const TempDir& tmp, const std::string& name, const std::string& body) {
  const std::string path = tmp.file(name);
  std::ofstream(path) << body;
  return path;
}

CliOptions opts(const std::string& command, const std::string& config,
                const std::string& out) {
  CliOptions o;
  o.command = command;
  o.config_path = config;
  o.out = out;
  return o;
}

const char* kTrainCvConfig = R"({
  "seed": 5,
  "dataset": {"kind": "synth-graphs", "synth": "cycles-vs-trees", "n_per_class": 6},
  "filtrations": [{"type": "vr", "max_dim": 1}],
  "representation": {"variant": "poinc", "m": 2, "K": 2},
  "train": {"epochs": 2, "batch": 8, "folds": 2, "lr": 0.01}
})";

}  // namespace

TEST_CASE("diagrams command writes summaries and a readable cache") {
  TempDir tmp;
  const std::string cfg_path = write_config(tmp, "cfg.json", std::string(R"({
    "dataset": {"kind": "graph-dir", "path": ")") + FIXTURE_DIR R"(/graphs_toy"},
    "filtrations": [{"type": "vr", "max_dim": 2}]
  })");
  CliOptions o = opts("diagrams", cfg_path, tmp.file("out"));
  o.dump_phi = tmp.file("phi.csv");
  REQUIRE(run_command(o) == 0);

  const std::vector<std::string> summary = lines_of(slurp(tmp.file("out/summary.csv")));
  REQUIRE(!summary.empty());
  CHECK(summary[0] == "sample,slot,label,dim,finite_points,essential_points,total_persistence");
  // The 4-cycle carries one H1 point (1,2); the path has two unit merges.
  bool cycle_h1 = false, path_h0 = false;
  for (const std::string& l : summary) {
    cycle_h1 = cycle_h1 || l == "0,vr,1,1,1,0,1";
    path_h0 = path_h0 || l == "1,vr,0,0,2,1,2";
  }
  CHECK(cycle_h1);
  CHECK(path_h0);

  CHECK(fs::exists(tmp.file("out/resolved_config.json")));
  const RunConfig cfg = parse_run_config(cfg_path);
  const auto cached = read_diagram_cache(tmp.file("out/diagrams"),
                                         filtration_config_hash(cfg.filtrations));
  REQUIRE(cached.has_value());
  CHECK(cached->diagrams.size() == 2);
  CHECK(cached->labels == std::vector<int>{1, 0});

  const std::vector<std::string> phi = lines_of(slurp(tmp.file("phi.csv")));
  REQUIRE(!phi.empty());
  CHECK(phi[0] == "sample,slot,dim,birth,death,phi_0,phi_1,phi_2");
  CHECK(phi.size() > 1);
}

TEST_CASE("train command in cross-validation mode") {
  TempDir tmp;
  const std::string cfg = write_config(tmp, "cfg.json", kTrainCvConfig);
  REQUIRE(run_command(opts("train", cfg, tmp.file("out"))) == 0);

  const std::vector<std::string> log = lines_of(slurp(tmp.file("out/log.csv")));
  CHECK(log[0] == "fold,epoch,train_loss,val_acc,lr");
  CHECK(log.size() == 1 + 2 * 2);  // folds x epochs
  const std::vector<std::string> metrics = lines_of(slurp(tmp.file("out/metrics.csv")));
  REQUIRE(metrics.size() == 2);
  CHECK(metrics[0] == "variant,folds,mean_acc,std_acc");
  CHECK(metrics[1].substr(0, 6) == "poinc,");
  const std::vector<std::string> folds = lines_of(slurp(tmp.file("out/folds.csv")));
  CHECK(folds[0] == "fold,best_epoch,best_val_acc");
  CHECK(folds.size() == 3);
}

TEST_CASE("train and eval round-trip through a checkpoint") {
  TempDir tmp;
  const std::string cfg = write_config(tmp, "cfg.json", R"({
    "seed": 9,
    "dataset": {"kind": "synth-graphs", "synth": "cycles-vs-trees", "n_per_class": 8,
                "test_fraction": 0.25},
    "filtrations": [{"type": "vr", "max_dim": 1}],
    "representation": {"variant": "poinc", "m": 2, "K": 2},
    "train": {"epochs": 2, "batch": 8, "lr": 0.01}
  })");
  REQUIRE(run_command(opts("train", cfg, tmp.file("t"))) == 0);
  const std::vector<std::string> metrics = lines_of(slurp(tmp.file("t/metrics.csv")));
  REQUIRE(metrics.size() == 2);
  CHECK(metrics[0] == "variant,n_train,n_test,test_acc");
  REQUIRE(fs::exists(tmp.file("t/checkpoint.json")));

  CliOptions e = opts("eval", cfg, tmp.file("e"));
  e.checkpoint = tmp.file("t/checkpoint.json");
  REQUIRE(run_command(e) == 0);
  const std::vector<std::string> ev = lines_of(slurp(tmp.file("e/eval.csv")));
  REQUIRE(ev.size() >= 2);
  CHECK(ev[0] == "scope,n,accuracy");
  CHECK(ev[1].substr(0, 4) == "all,");
  // Evaluating the saved final model reproduces the accuracy train reported.
  CHECK(std::stod(last_field(ev[1])) == std::stod(last_field(metrics[1])));

  SUBCASE("eval requires a checkpoint") {
    CHECK(run_command(opts("eval", cfg, tmp.file("e2"))) == 1);
  }
}

TEST_CASE("the seed pins every training artifact byte for byte") {
  TempDir tmp;
  const std::string cfg = write_config(tmp, "cfg.json", kTrainCvConfig);
  auto run_with_seed = [&](const std::string& out, std::uint64_t seed) {
    CliOptions o = opts("train", cfg, tmp.file(out));
    o.seed = seed;
    o.seed_set = true;
    REQUIRE(run_command(o) == 0);
  };
  run_with_seed("a", 7);
  run_with_seed("b", 7);
  run_with_seed("c", 8);
  CHECK(slurp(tmp.file("a/log.csv")) == slurp(tmp.file("b/log.csv")));
  CHECK(slurp(tmp.file("a/metrics.csv")) == slurp(tmp.file("b/metrics.csv")));
  CHECK(slurp(tmp.file("a/log.csv")) != slurp(tmp.file("c/log.csv")));
  // The seed override lands in the resolved config echo.
  CHECK(slurp(tmp.file("c/resolved_config.json")).find("\"seed\": 8") != std::string::npos);
}

TEST_CASE("gradcheck command") {
  TempDir tmp;
  SUBCASE("all analytic gradients pass") {
    CliOptions o = opts("gradcheck", "", tmp.file("out"));
    o.seed = 3;
    o.seed_set = true;
    CHECK(run_command(o) == 0);
    const std::vector<std::string> rows = lines_of(slurp(tmp.file("out/gradcheck.csv")));
    CHECK(rows[0] == "group,param,analytic,numeric,rel_err,pass");
    REQUIRE(rows.size() > 100);
    for (std::size_t i = 1; i < rows.size(); ++i) CHECK(last_field(rows[i]) == "1");
  }
  SUBCASE("corrupted gradients are caught") {
    CliOptions o = opts("gradcheck", "", tmp.file("bad"));
    o.corrupt = true;
    CHECK(run_command(o) == 2);
    const std::vector<std::string> rows = lines_of(slurp(tmp.file("bad/gradcheck.csv")));
    int failures = 0;
    for (std::size_t i = 1; i < rows.size(); ++i) failures += last_field(rows[i]) == "0";
    CHECK(failures > 0);
  }
}

TEST_CASE("stability command") {
  TempDir tmp;
  const std::string cfg = write_config(tmp, "cfg.json", R"({
    "stability": {"n_diagrams": 5, "points": 4}
  })");
  CHECK(run_command(opts("stability", cfg, tmp.file("out"))) == 0);
  const std::vector<std::string> rows = lines_of(slurp(tmp.file("out/stability.csv")));
  CHECK(rows[0] == "pair_id,dim,p,wasserstein,d_ball,ratio");
  CHECK(rows.size() == 1 + 5 * 3 * 2);  // diagrams x deltas x homology dims
}

TEST_CASE("baseline command reports both histogram variants") {
  TempDir tmp;
  const std::string cfg = write_config(tmp, "cfg.json", R"({
    "dataset": {"kind": "synth-graphs", "synth": "components-count", "n_per_class": 6},
    "filtrations": [{"type": "vr", "max_dim": 1}],
    "baseline": {"bins": 4},
    "train": {"epochs": 2, "batch": 8, "folds": 2}
  })");
  CHECK(run_command(opts("baseline", cfg, tmp.file("out"))) == 0);
  const std::vector<std::string> rows = lines_of(slurp(tmp.file("out/baseline.csv")));
  REQUIRE(rows.size() == 3);
  CHECK(rows[0] == "features,bins,folds,mean_acc,std_acc");
  CHECK(rows[1].substr(0, 20) == "hist-with-essential,");
  CHECK(rows[2].substr(0, 18) == "hist-no-essential,");
}

TEST_CASE("config validation reports every problem at once") {
  try {
    run_config_from_json_text(R"({
      "dataset": {"kind": "idx"},
      "representation": {"m": 1, "K": 0},
      "train": {"lr": -2.0},
      "stability": {"deltas": []}
    })",
                              "test");
    FAIL("expected a validation error");
  } catch (const std::runtime_error& e) {
    const std::string msg = e.what();
    CHECK(msg.find("dataset.images/labels") != std::string::npos);
    CHECK(msg.find("representation.m") != std::string::npos);
    CHECK(msg.find("representation.K") != std::string::npos);
    CHECK(msg.find("train:") != std::string::npos);
    CHECK(msg.find("stability.deltas") != std::string::npos);
  }
  CHECK_THROWS_WITH_AS(
      run_config_from_json_text(R"({"train": {"lr": "fast"}})", "test"),
      doctest::Contains("train.lr: wrong type"), std::runtime_error);
  CHECK_THROWS_WITH_AS(run_config_from_json_text("{nope", "test"),
                       doctest::Contains("invalid JSON"), std::runtime_error);
}

TEST_CASE("command dispatch maps errors to exit codes") {
  TempDir tmp;
  CHECK(run_command(opts("train", tmp.file("missing.json"), tmp.file("out"))) == 1);
  const std::string bad = write_config(tmp, "bad.json", R"({"dataset": {"kind": "nope"}})");
  CHECK(run_command(opts("train", bad, tmp.file("out"))) == 1);
  CHECK(run_command(opts("frobnicate", "", tmp.file("out"))) == 1);
  CHECK(run_command(opts("train", "", tmp.file("out"))) == 1);  // train needs a config
}
