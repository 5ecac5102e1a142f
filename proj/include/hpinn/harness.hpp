#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "hpinn/annulus.hpp"
#include "hpinn/stage1.hpp"
#include "hpinn/stats.hpp"

/// Configuration, runs, sweeps, seedwise statistics and reports for both stages.
namespace hpinn::harness {

using Json = nlohmann::ordered_json;

enum class Stage { stage1, stage2 };
std::string to_string(Stage s);
Stage stage_from_string(const std::string& name);

/// Everything that determines a run. Only the block for `stage` is used.
struct RunConfig {
  Stage stage = Stage::stage1;
  stage1::Config s1;
  stage2::Config s2;
  /// Stage 2: FD wall slice to compare against; empty for none.
  std::string reference_slice;
  std::string output_dir = "runs";
  /// File stem for outputs; derived from stage, arm, weight and seed when empty.
  std::string run_name;

  std::string arm_name() const;
  /// Aux weight (stage 1) or shell weight (stage 2); 0 for the off arm.
  double weight() const;
  std::uint64_t seed() const;
  std::string resolved_run_name() const;
};

/// Invalid configuration; `keys` lists every offending key.
class ConfigError : public std::invalid_argument {
 public:
  ConfigError(const std::string& what, std::vector<std::string> keys)
      : std::invalid_argument(what), keys_(std::move(keys)) {}
  const std::vector<std::string>& keys() const { return keys_; }

 private:
  std::vector<std::string> keys_;
};

/// Flat keys accepted for a stage, in echo order.
std::vector<std::string> config_keys(Stage stage);
/// Keys accepted for either stage (union, echo order).
std::vector<std::string> all_config_keys();

/// Flat JSON object; "stage" is required. Unknown keys, keys belonging to the
/// other stage and ill-typed values all raise ConfigError naming the keys.
RunConfig config_from_json(const Json& j);
/// Every key for the config's stage, so the echo alone reproduces the run.
Json config_to_json(const RunConfig& cfg);
RunConfig load_config(const std::filesystem::path& path);

/// Applies HPINN_OUTPUT_DIR when set.
std::string effective_output_dir(const RunConfig& cfg);

inline constexpr int kSummarySchemaVersion = 1;

struct RunSummary {
  Stage stage = Stage::stage1;
  std::string run_name;
  std::string arm;
  double weight = 0.0;
  std::uint64_t seed = 0;
  Json config;
  bool failed = false;
  std::string failure;
  double final_loss = 0.0;
  double best_val = 0.0;
  long best_epoch = 0;
  long last_finite_epoch = -1;
  /// Stage metrics by name; NaN where not available (written as null).
  std::map<std::string, double> metrics;
  std::vector<HistoryPoint> history;
  /// Wall-clock timing; excluded from determinism comparisons.
  double total_seconds = 0.0;
  double seconds_per_epoch = 0.0;
};

/// Metric columns per stage, in CSV order.
const std::vector<std::string>& metric_names(Stage stage);

/// Summary without timing, for bit-identical comparisons.
Json summary_to_json(const RunSummary& s, bool with_timing = true);
RunSummary summary_from_json(const Json& j);

/// CSV schema v1, one row per run.
std::string csv_header(Stage stage);
std::string csv_row(const RunSummary& s);

/// Trains and audits one configuration. Writes nothing.
RunSummary execute(const RunConfig& cfg);

struct RunOutputs {
  std::filesystem::path json;
  std::filesystem::path csv;
  std::filesystem::path checkpoint;
};

/// execute() plus <dir>/<name>.json, .csv and the best checkpoint .ckpt.
RunSummary run(const RunConfig& cfg, RunOutputs* outputs = nullptr);

struct SweepAxes {
  std::vector<std::string> arms;
  std::vector<std::uint64_t> seeds;
  /// Aux or shell weights; empty keeps the template's weight.
  std::vector<double> weights;
};

/// Per-(arm, weight) aggregate over completed runs.
struct AggregateRow {
  Stage stage = Stage::stage1;
  std::string arm;
  double weight = 0.0;
  std::size_t runs = 0;
  std::size_t failed = 0;
  std::map<std::string, MeanStd> metrics;  // over completed runs, sample std
  int rank = 0;                            // 1 = best under the stage hierarchy
};

/// The Cartesian product of the axes applied to the template, in arm, weight,
/// seed order. Seeds set the init, cloud and audit seeds together. The off arm
/// is expanded over seeds only.
std::vector<RunConfig> expand_sweep(const RunConfig& tmpl, const SweepAxes& axes);

struct SweepResult {
  std::vector<RunSummary> runs;
  std::vector<AggregateRow> aggregate;
};

/// Runs every expanded config (writing per-run outputs) plus sweep.csv and
/// aggregate.csv in the template's output directory.
SweepResult sweep(const RunConfig& tmpl, const SweepAxes& axes);

/// Aggregates and ranks summaries from one stage. Stage 2 ranks by the mean of
/// dTdn_wall_rmse, bc_residual_rmse, wall_bc_rmse, final_loss, best_val,
/// T_wall_rmse in that order; stage 1 by best_val, residual_rmse, rel_l2_u.
/// Lower is better, a missing value ties at its level, and the arm label breaks
/// full ties so the result does not depend on input order.
std::vector<AggregateRow> report(const std::vector<RunSummary>& summaries);

std::string aggregate_csv(const std::vector<AggregateRow>& rows);

/// Exact two-sided binomial p-value min(1, 2 P[X >= max(wins, n - wins)]),
/// X ~ Bin(n, 1/2). Ties must already be dropped from n.
double paired_sign_test(int wins, int n);

struct PairedComparison {
  int wins = 0;    // seeds where `challenger` is lower
  int losses = 0;
  int ties = 0;    // dropped from the test
  double p_value = 1.0;
};

/// Pairs completed runs of two arms by seed and compares `metric`.
PairedComparison compare_arms(const std::vector<RunSummary>& summaries, const std::string& baseline,
                              const std::string& challenger, const std::string& metric);

}  // namespace hpinn::harness
