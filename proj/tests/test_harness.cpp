#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>

#include "hpinn/fdref.hpp"
#include "hpinn/harness.hpp"

namespace hpinn::harness {
namespace {

namespace fs = std::filesystem;

Json tiny_stage1(const std::string& arm = "off") {
  return {{"stage", "stage1"}, {"arm", arm},          {"hidden", {8, 8}},     {"epochs", 20},
          {"lr_init", 5e-3},   {"validate_every", 5}, {"n_interior", 64},     {"n_boundary", 32},
          {"n_val_interior", 32}, {"n_val_boundary", 16}, {"n_audit", 128}, {"aux_n", 16}};
}

Json tiny_stage2(const std::string& arm = "off") {
  return {{"stage", "stage2"},   {"arm", arm},          {"hidden", {8}},        {"epochs", 10},
          {"lr_init", 5e-3},     {"validate_every", 5}, {"n_interior", 64},     {"n_boundary", 16},
          {"n_pairs", 8},        {"n_val_interior", 32}, {"n_val_boundary", 8}, {"n_val_pairs", 4},
          {"shell_n_s", 4},      {"shell_n_theta", 8},  {"shell_n_z", 6},       {"audit_n_theta", 16},
          {"audit_n_z", 16}};
}

class TempDir {
 public:
  TempDir() {
    path_ = fs::temp_directory_path() / ("hpinn_test_" + std::to_string(std::random_device{}()));
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

std::string read_file(const fs::path& p) {
  std::ifstream is(p);
  return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

RunSummary fake(Stage stage, const std::string& arm, std::uint64_t seed,
                std::map<std::string, double> metrics, double final_loss = 1.0, double best_val = 1.0) {
  RunSummary s;
  s.stage = stage;
  s.arm = arm;
  s.seed = seed;
  s.final_loss = final_loss;
  s.best_val = best_val;
  for (const std::string& m : metric_names(stage)) s.metrics[m] = std::numeric_limits<double>::quiet_NaN();
  for (const auto& [k, v] : metrics) s.metrics[k] = v;
  return s;
}

// C(n, k) by Pascal's triangle
double binom(int n, int k) {
  std::vector<double> row{1.0};
  for (int i = 0; i < n; ++i) {
    std::vector<double> next(row.size() + 1, 0.0);
    for (std::size_t j = 0; j < row.size(); ++j) {
      next[j] += row[j];
      next[j + 1] += row[j];
    }
    row = next;
  }
  return row[k];
}

TEST(SignTest, KnownValues) {
  EXPECT_EQ(paired_sign_test(6, 6), 0.03125);
  EXPECT_EQ(paired_sign_test(0, 6), 0.03125);
  EXPECT_EQ(paired_sign_test(3, 6), 1.0);
  EXPECT_EQ(paired_sign_test(5, 6), 0.21875);
  EXPECT_EQ(paired_sign_test(5, 6), 2.0 * (binom(6, 6) + binom(6, 5)) / 64.0);
  EXPECT_THROW(paired_sign_test(0, 0), std::invalid_argument);
  EXPECT_THROW(paired_sign_test(7, 6), std::invalid_argument);
}

TEST(SignTest, BruteForceEnumerationAndSymmetry) {
  for (int n = 1; n <= 12; ++n) {
    for (int w = 0; w <= n; ++w) {
      // P(|X - n/2| >= |w - n/2|) over all 2^n sign patterns
      int extreme = 0;
      for (unsigned bits = 0; bits < (1u << n); ++bits) {
        const int x = __builtin_popcount(bits);
        if (std::abs(2 * x - n) >= std::abs(2 * w - n)) ++extreme;
      }
      const double brute = static_cast<double>(extreme) / (1u << n);
      EXPECT_DOUBLE_EQ(paired_sign_test(w, n), brute) << w << "/" << n;
      EXPECT_EQ(paired_sign_test(w, n), paired_sign_test(n - w, n));
    }
  }
}

TEST(SignTest, LargeSamplesStayConsistent) {
  EXPECT_NEAR(paired_sign_test(63, 63), std::ldexp(1.0, -62), 1e-12 * std::ldexp(1.0, -62));
  EXPECT_EQ(paired_sign_test(50, 100), 1.0);
  EXPECT_LT(paired_sign_test(70, 100), paired_sign_test(60, 100));
}

TEST(Config, RoundTripsThroughTheEcho) {
  for (const Json& j : {tiny_stage1("fd_linear"), tiny_stage2("scheduled")}) {
    const RunConfig cfg = config_from_json(j);
    const Json echo = config_to_json(cfg);
    EXPECT_EQ(config_to_json(config_from_json(echo)), echo);
    for (const auto& [k, v] : j.items()) EXPECT_EQ(echo.at(k), v) << k;
    EXPECT_EQ(echo.size(), config_keys(cfg.stage).size());
  }
}

TEST(Config, ErrorsNameEveryOffendingKey) {
  Json j = tiny_stage1();
  j["epochz"] = 3;
  j["shell_weight"] = 1e-3;
  j["hidden"] = "wide";
  try {
    config_from_json(j);
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    std::vector<std::string> keys = e.keys();
    std::sort(keys.begin(), keys.end());
    EXPECT_EQ(keys, (std::vector<std::string>{"epochz", "hidden", "shell_weight"}));
    EXPECT_NE(std::string(e.what()).find("not used by stage1"), std::string::npos);
  }
  EXPECT_THROW(config_from_json(Json{{"epochs", 3}}), ConfigError);
  EXPECT_THROW(config_from_json(Json{{"stage", "stage3"}}), ConfigError);
  EXPECT_THROW(config_from_json(Json{{"stage", "stage1"}, {"epochs", 2.5}}), ConfigError);
  EXPECT_THROW(config_from_json(Json{{"stage", "stage1"}, {"epochs", -1}}), ConfigError);
  EXPECT_THROW(config_from_json(Json{{"stage", "stage2"}, {"term_weights", {1, 1, 0, 1, 1, 1}}}), ConfigError);
  EXPECT_THROW(config_from_json(Json{{"stage", "stage1"}, {"arm", "shell"}}), ConfigError);
}

TEST(Config, OutputDirectoryOverride) {
  RunConfig cfg = config_from_json(tiny_stage1());
  cfg.output_dir = "from_config";
  unsetenv("HPINN_OUTPUT_DIR");
  EXPECT_EQ(effective_output_dir(cfg), "from_config");
  setenv("HPINN_OUTPUT_DIR", "/tmp/elsewhere", 1);
  EXPECT_EQ(effective_output_dir(cfg), "/tmp/elsewhere");
  unsetenv("HPINN_OUTPUT_DIR");
}

TEST(Run, WritesOutputsAndIsReproducibleFromItsEcho) {
  TempDir dir;
  Json j = tiny_stage1("fd_fixed");
  j["output_dir"] = dir.path().string();
  const RunConfig cfg = config_from_json(j);
  RunOutputs out;
  const RunSummary s = run(cfg, &out);
  EXPECT_FALSE(s.failed);
  ASSERT_TRUE(fs::exists(out.json));
  ASSERT_TRUE(fs::exists(out.checkpoint));
  const std::string csv = read_file(out.csv);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 2);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), csv_header(Stage::stage1));

  const RunSummary back = summary_from_json(Json::parse(read_file(out.json)));
  EXPECT_EQ(summary_to_json(back), summary_to_json(s));

  const RunSummary again = execute(config_from_json(s.config));
  EXPECT_EQ(summary_to_json(again, false).dump(), summary_to_json(s, false).dump());
}

TEST(Run, DivergenceIsRecorded) {
  Json j = tiny_stage1();
  j["lr_init"] = 1e300;
  j["lr_final"] = 1e300;
  const RunSummary s = execute(config_from_json(j));
  EXPECT_TRUE(s.failed);
  EXPECT_FALSE(s.failure.empty());
  EXPECT_FALSE(s.history.empty());
  EXPECT_EQ(summary_to_json(s)["status"], "failed");
}

TEST(Run, StageTwoWithReferenceSlice) {
  TempDir dir;
  Json j = tiny_stage2("fixed");
  const RunConfig probe = config_from_json(j);
  const fdref::FdField f = fdref::solve_reference({5, 16, 17}, probe.s2.geometry, probe.s2.flux);
  const fs::path slice = dir.path() / "wall.bin";
  save_wall_slice(slice, fdref::wall_slice(f));
  j["reference_slice"] = slice.string();
  j["output_dir"] = dir.path().string();
  const RunSummary s = run(config_from_json(j));
  EXPECT_FALSE(s.failed);
  for (const std::string& m : metric_names(Stage::stage2)) {
    EXPECT_TRUE(std::isfinite(s.metrics.at(m))) << m;
  }
  EXPECT_NEAR(s.metrics.at("bc_residual_rmse"), s.metrics.at("dTdn_wall_rmse"), 1e-12);
}

TEST(Sweep, CountsRowsAndAggregatesMatchRecomputation) {
  TempDir dir;
  Json j = tiny_stage1();
  j["output_dir"] = dir.path().string();
  const RunConfig tmpl = config_from_json(j);
  const SweepResult r = sweep(tmpl, {{"off", "fd_fixed"}, {0, 1, 2}, {}});
  ASSERT_EQ(r.runs.size(), 6u);
  ASSERT_EQ(r.aggregate.size(), 2u);
  const std::string csv = read_file(dir.path() / "sweep.csv");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 7);
  EXPECT_TRUE(fs::exists(dir.path() / "aggregate.csv"));
  for (const AggregateRow& row : r.aggregate) {
    std::vector<double> v;
    for (const RunSummary& s : r.runs) {
      if (s.arm == row.arm) v.push_back(s.metrics.at("residual_rmse"));
    }
    ASSERT_EQ(v.size(), 3u);
    const double mean = (v[0] + v[1] + v[2]) / 3.0;
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    EXPECT_NEAR(row.metrics.at("residual_rmse").mean, mean, 1e-15 * mean);
    EXPECT_NEAR(row.metrics.at("residual_rmse").std, std::sqrt(ss / 2.0), 1e-12 * mean);
    EXPECT_EQ(row.runs, 3u);
  }
}

TEST(Sweep, SingleRunPassthroughAndEmptyAxes) {
  const RunConfig tmpl = config_from_json(tiny_stage1());
  const auto one = expand_sweep(tmpl, {{"off"}, {4}, {}});
  ASSERT_EQ(one.size(), 1u);
  EXPECT_EQ(one[0].s1.init_seed, 4u);
  EXPECT_EQ(one[0].s1.audit_seed, 4u);
  EXPECT_THROW(expand_sweep(tmpl, {{}, {0}, {}}), std::invalid_argument);
  const auto grid = expand_sweep(tmpl, {{"off", "fd_fixed"}, {0, 1}, {1e-4, 1e-3}});
  ASSERT_EQ(grid.size(), 6u);
  EXPECT_EQ(grid[0].weight(), 0.0);
  EXPECT_EQ(grid[2].weight(), 1e-4);
  EXPECT_EQ(grid[5].weight(), 1e-3);
  EXPECT_EQ(grid[5].s1.init_seed, 1u);
}

TEST(Report, WallFluxOutranksScalarLoss) {
  const std::vector<RunSummary> runs = {
      fake(Stage::stage2, "A", 0, {{"dTdn_wall_rmse", 0.1}}, 5.0),
      fake(Stage::stage2, "B", 0, {{"dTdn_wall_rmse", 0.2}}, 1.0),
  };
  const auto rows = report(runs);
  EXPECT_EQ(rows[0].arm, "A");
  EXPECT_EQ(rows[0].rank, 1);
  EXPECT_EQ(rows[1].rank, 2);
}

TEST(Report, MissingLevelTiesAndNextLevelDecides) {
  // no FD reference: the first two levels are missing, wall audit decides
  const std::vector<RunSummary> runs = {
      fake(Stage::stage2, "off", 0, {{"wall_bc_rmse", 0.3}}),
      fake(Stage::stage2, "fixed", 0, {{"wall_bc_rmse", 0.2}}),
      fake(Stage::stage2, "scheduled", 0, {{"wall_bc_rmse", 0.25}}),
  };
  std::vector<std::string> order;
  for (const auto& r : report(runs)) order.push_back(r.arm);
  EXPECT_EQ(order, (std::vector<std::string>{"fixed", "scheduled", "off"}));
}

TEST(Report, InvariantToInputOrderAndRejectsMixedStages) {
  std::vector<RunSummary> runs;
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    runs.push_back(fake(Stage::stage1, "off", seed, {{"residual_rmse", 1.0 + seed}}, 1.0, 0.5));
    runs.push_back(fake(Stage::stage1, "fd_fixed", seed, {{"residual_rmse", 0.5 + seed}}, 1.0, 0.5));
    runs.push_back(fake(Stage::stage1, "ad_fixed", seed, {{"residual_rmse", 0.5 + seed}}, 1.0, 0.5));
  }
  const std::string base = aggregate_csv(report(runs));
  std::mt19937 rng(3);
  for (int t = 0; t < 5; ++t) {
    std::shuffle(runs.begin(), runs.end(), rng);
    EXPECT_EQ(aggregate_csv(report(runs)), base);
  }
  EXPECT_EQ(report({runs[0]}).front().rank, 1);
  runs.push_back(fake(Stage::stage2, "off", 0, {}));
  EXPECT_THROW(report(runs), std::invalid_argument);
  EXPECT_THROW(report({}), std::invalid_argument);
}

TEST(Report, FailedRunsAreCountedButNotAveraged) {
  std::vector<RunSummary> runs = {fake(Stage::stage1, "off", 0, {{"residual_rmse", 1.0}}),
                                  fake(Stage::stage1, "off", 1, {{"residual_rmse", 3.0}})};
  runs[1].failed = true;
  const auto rows = report(runs);
  EXPECT_EQ(rows[0].runs, 2u);
  EXPECT_EQ(rows[0].failed, 1u);
  EXPECT_EQ(rows[0].metrics.at("residual_rmse").mean, 1.0);
  EXPECT_EQ(rows[0].metrics.at("residual_rmse").count, 1u);
}

TEST(CompareArms, PairsBySeedAndDropsTies) {
  std::vector<RunSummary> runs;
  const double off[] = {0.5, 0.4, 0.3, 0.2};
  const double fixed[] = {0.4, 0.3, 0.35, 0.2};
  for (std::uint64_t s = 0; s < 4; ++s) {
    runs.push_back(fake(Stage::stage2, "off", s, {{"wall_bc_rmse", off[s]}}));
    runs.push_back(fake(Stage::stage2, "fixed", s, {{"wall_bc_rmse", fixed[s]}}));
  }
  const PairedComparison c = compare_arms(runs, "off", "fixed", "wall_bc_rmse");
  EXPECT_EQ(c.wins, 2);
  EXPECT_EQ(c.losses, 1);
  EXPECT_EQ(c.ties, 1);
  EXPECT_EQ(c.p_value, paired_sign_test(2, 3));
  EXPECT_THROW(compare_arms(runs, "off", "fixed", "nope"), std::invalid_argument);
}

}  // namespace
}  // namespace hpinn::harness
