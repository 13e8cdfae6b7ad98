#pragma once

#include <optional>

#include "pdball/metrics.hpp"
#include "pdball/train.hpp"

namespace pdball {

struct DatasetConfig {
  std::string kind = "synth-graphs";  // synth-graphs | graph-dir | idx | synth-digits
  std::string synth = "cycles-vs-trees";
  int n_per_class = 100;
  std::string path;             // graph-dir
  std::string images, labels;   // idx
  long long limit = -1;
  std::string test_images, test_labels;  // optional idx test split
  long long test_limit = -1;
  double test_fraction = 0.0;     // stratified holdout for the other kinds
  std::vector<int> classes;       // idx: keep these labels, relabelled 0..k-1
};

struct StabilityRunConfig {
  int n_diagrams = 20;
  int points = 6;
  std::vector<double> deltas{1e-2, 1e-3, 1e-4};
};

struct RunConfig {
  std::uint64_t seed = 0;
  std::string out = "out";
  DatasetConfig dataset;
  std::vector<FiltrationConfig> filtrations{FiltrationConfig{}};
  ModelSpec spec;
  TrainConfig train;
  int baseline_bins = 10;
  StabilityRunConfig stability;
  std::string cache_dir;  // optional diagram cache
};

/// Parse + validate; throws with every validation error listed, one per line.
RunConfig parse_run_config(const std::string& path);
RunConfig run_config_from_json_text(const std::string& text, const std::string& origin);

struct CliOptions {
  std::string command;
  std::string config_path;
  std::string out;  // overrides cfg.out when non-empty
  std::uint64_t seed = 0;
  bool seed_set = false;
  int jobs = 0;
  std::string checkpoint;  // eval
  std::string dump_phi;    // diagrams: φ-image debug CSV
  bool corrupt = false;    // gradcheck negative control
};

/// Dispatch + exception-to-exit-code mapping (0 ok, 1 validation, 2 numerical).
int run_command(const CliOptions& opt);

int cmd_diagrams(const RunConfig& cfg, const CliOptions& opt);
int cmd_train(const RunConfig& cfg, const CliOptions& opt);
int cmd_eval(const RunConfig& cfg, const CliOptions& opt);
int cmd_gradcheck(const RunConfig& cfg, const CliOptions& opt);
int cmd_stability(const RunConfig& cfg, const CliOptions& opt);
int cmd_baseline(const RunConfig& cfg, const CliOptions& opt);

/// Diagrams ready for training: the full set, or a train/test split when the
/// config asks for one. Statistics of the test part play no role in sizing.
struct Prepared {
  DiagramDataset train;
  std::optional<DiagramDataset> test;
};
Prepared prepare_diagrams(const RunConfig& cfg);

struct GradCheckRow {
  std::string group;
  int param = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  double rel_err = 0.0;  // |a − n| / max(1, |a|, |n|)
  bool pass = false;
};

/// Finite-difference audit of every analytic gradient (primitives, all three
/// representation variants, the classifier head, and the end-to-end model);
/// `corrupt` biases some analytic values as a negative control.
std::vector<GradCheckRow> run_gradcheck(std::uint64_t seed, bool corrupt);

/// Theorem-1 audit rows plus the calibrated linear-regime check: per base
/// diagram, c = d/δ at the largest δ must bound d ≤ 2·c·δ at the smaller
/// ones, and diagonal insertions must not move Φ at all.
struct StabilityRunRow {
  int pair = 0;
  int dim = 0;
  double delta = 0.0;
  double w1 = 0.0;
  double d_ball = 0.0;
  double ratio = 0.0;
};

struct StabilityRunReport {
  std::vector<StabilityRunRow> rows;
  int violations = 0;
  double max_ratio = 0.0;
  bool diagonal_invariant = true;
};

StabilityRunReport run_stability(const RunConfig& cfg);

}  // namespace pdball
