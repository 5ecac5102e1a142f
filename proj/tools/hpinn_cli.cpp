#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "hpinn/checkpoint.hpp"
#include "hpinn/fdref.hpp"
#include "hpinn/harness.hpp"
#include "hpinn/runtime.hpp"
#include "hpinn/wall_slice.hpp"

namespace {

using namespace hpinn;
using harness::Json;

/// --<key> flags for every config key. Values are parsed as JSON where
/// possible, so `--hidden [64,64]` and `--epochs 500` keep their types and
/// `--arm fixed` falls back to a string.
struct ConfigFlags {
  std::string config_path;
  std::map<std::string, std::string> values;

  void attach(CLI::App* app) {
    app->add_option("-c,--config", config_path, "JSON config file; flags override its keys")
        ->check(CLI::ExistingFile);
    for (const std::string& key : harness::all_config_keys()) {
      app->add_option("--" + key, values[key], "config key '" + key + "'");
    }
  }

  Json merged(CLI::App* app) const {
    Json j = Json::object();
    if (!config_path.empty()) {
      std::ifstream is(config_path);
      j = Json::parse(is);
    }
    for (const auto& [key, raw] : values) {
      if (app->get_option("--" + key)->count() == 0) continue;
      try {
        j[key] = Json::parse(raw);
      } catch (const Json::parse_error&) {
        j[key] = raw;
      }
    }
    return j;
  }

  harness::RunConfig build(CLI::App* app) const { return harness::config_from_json(merged(app)); }
};

fdref::GridSize parse_grid(const std::string& s) {
  fdref::GridSize g;
  char c1 = 0, c2 = 0;
  std::istringstream is(s);
  if (!(is >> g.n_s >> c1 >> g.n_theta >> c2 >> g.n_z) || c1 != ',' || c2 != ',' || !is.eof()) {
    throw CLI::ValidationError("grid", "expected N_s,N_theta,N_z, got '" + s + "'");
  }
  return g;
}

std::vector<harness::RunSummary> read_summaries(const std::vector<std::string>& paths) {
  std::vector<harness::RunSummary> out;
  for (const std::string& p : paths) {
    std::ifstream is(p);
    out.push_back(harness::summary_from_json(Json::parse(is)));
  }
  return out;
}

void print_change(const char* label, const fdref::Change& c) {
  std::printf(",%s,%.6e,%.6e,%.6e", label, c.rel_l2, c.max_abs, c.rmse);
}

}  // namespace

int main(int argc, char** argv) {
  tune_allocator();
  CLI::App app{"Regularized PINN training, sweeps, FD wall reference and reports"};
  app.require_subcommand(1);

  ConfigFlags run_flags;
  auto* run = app.add_subcommand("run", "Train and audit one configuration");
  run_flags.attach(run);
  bool print_config = false;
  run->add_flag("--print-config", print_config, "Print the resolved config echo and exit");

  ConfigFlags sweep_flags;
  std::vector<std::string> sweep_arms;
  std::vector<std::uint64_t> sweep_seeds{0, 1, 2};
  std::vector<double> sweep_weights;
  auto* sweep = app.add_subcommand("sweep", "Run arms x weights x seeds and aggregate");
  sweep_flags.attach(sweep);
  sweep->add_option("--arms", sweep_arms, "Arms to sweep")->required()->delimiter(',');
  sweep->add_option("--seeds", sweep_seeds, "Seeds")->delimiter(',');
  sweep->add_option("--weights", sweep_weights, "Aux or shell weights")->delimiter(',');

  ConfigFlags fd_flags;
  std::string fd_grid = "25,48,193";
  std::string fd_out = "wall_slice.bin";
  auto* fd_solve = app.add_subcommand("fdref-solve", "Solve the FD reference and write the wall slice");
  fd_flags.attach(fd_solve);
  fd_solve->add_option("--fd-grid", fd_grid, "N_s,N_theta,N_z");
  fd_solve->add_option("-o,--out", fd_out, "Wall slice output path");

  ConfigFlags study_flags;
  std::vector<std::string> study_grids;
  auto* fd_study = app.add_subcommand("fdref-gridstudy", "Refinement changes between nested FD grids");
  study_flags.attach(fd_study);
  fd_study->add_option("--grids", study_grids, "Grids coarse to fine, each N_s,N_theta,N_z")
      ->required()
      ->expected(2, -1);

  ConfigFlags audit_flags;
  std::string audit_ckpt;
  auto* audit = app.add_subcommand("audit", "Audit a saved checkpoint");
  audit_flags.attach(audit);
  audit->add_option("--checkpoint", audit_ckpt, "Checkpoint file")->required()->check(CLI::ExistingFile);

  std::vector<std::string> report_inputs;
  std::string compare_arms;
  std::string compare_metric;
  auto* report = app.add_subcommand("report", "Aggregate and rank run summaries");
  report->add_option("summaries", report_inputs, "Run summary JSON files")->required()->check(CLI::ExistingFile);
  report->add_option("--compare", compare_arms, "baseline,challenger for a paired sign test");
  report->add_option("--metric", compare_metric, "Metric for --compare");

  int sign_wins = 0;
  int sign_n = 0;
  auto* sign = app.add_subcommand("sign-test", "Two-sided paired sign test p-value");
  sign->add_option("wins", sign_wins)->required();
  sign->add_option("n", sign_n)->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      const harness::RunConfig cfg = run_flags.build(run);
      if (print_config) {
        std::cout << harness::config_to_json(cfg).dump(2) << "\n";
        return 0;
      }
      harness::RunOutputs out;
      const harness::RunSummary s = harness::run(cfg, &out);
      std::cout << harness::csv_header(s.stage) << "\n" << harness::csv_row(s) << "\n";
      std::cerr << "wrote " << out.json.string() << ", " << out.csv.string() << ", " << out.checkpoint.string()
                << "\n";
      return s.failed ? 2 : 0;
    }
    if (*sweep) {
      const harness::SweepResult r =
          harness::sweep(sweep_flags.build(sweep), {sweep_arms, sweep_seeds, sweep_weights});
      std::cout << harness::aggregate_csv(r.aggregate);
      return 0;
    }
    if (*fd_solve) {
      harness::RunConfig cfg = fd_flags.build(fd_solve);
      const fdref::FdField f = fdref::solve_reference(parse_grid(fd_grid), cfg.s2.geometry, cfg.s2.flux);
      save_wall_slice(fd_out, fdref::wall_slice(f));
      std::printf("grid %s iterations %ld residual %.3e -> %s\n", f.grid.str().c_str(), f.iterations,
                  f.final_residual, fd_out.c_str());
      return 0;
    }
    if (*fd_study) {
      harness::RunConfig cfg = study_flags.build(fd_study);
      std::vector<fdref::GridSize> grids;
      for (const std::string& g : study_grids) grids.push_back(parse_grid(g));
      std::printf("coarse,fine,slice,rel_l2,max_abs,rmse\n");
      for (const fdref::Refinement& r : fdref::grid_study(grids, cfg.s2.geometry, cfg.s2.flux)) {
        for (auto [label, c] : {std::pair{"field", r.field}, {"t_wall", r.t_wall}, {"dtdn", r.dtdn}}) {
          std::printf("%s,%s", r.coarse.str().c_str(), r.fine.str().c_str());
          print_change(label, c);
          std::printf("\n");
        }
      }
      return 0;
    }
    if (*audit) {
      const harness::RunConfig cfg = audit_flags.build(audit);
      const NetworkParams net = load_checkpoint(audit_ckpt);
      Json j;
      if (cfg.stage == harness::Stage::stage1) {
        const stage1::Metrics m =
            stage1::audit_stage1(NetworkField(net, std::nullopt, cfg.s1.eval), cfg.s1.audit_seed, cfg.s1.n_audit,
                                 cfg.s1.aux_n);
        j = {{"rel_l2_u", m.rel_l2_u},
             {"rel_l2_grad_u", m.rel_l2_grad_u},
             {"residual_rmse", m.residual_rmse},
             {"grad_r_rmse", m.grad_r_rmse},
             {"shifted_fd_rg", m.shifted_fd_rg}};
      } else {
        WallSlice ref;
        if (!cfg.reference_slice.empty()) ref = load_wall_slice(cfg.reference_slice);
        const stage2::WallAuditReport r =
            stage2::audit_stage2(NetworkField(net, stage2::input_map(cfg.s2.geometry), cfg.s2.eval), cfg.s2,
                                 cfg.reference_slice.empty() ? nullptr : &ref);
        auto num = [](double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); };
        j = {{"wall_bc_rmse", r.wall_bc_rmse},
             {"dTdn_wall_rmse", num(r.dtdn_wall_rmse)},
             {"T_wall_rmse", num(r.t_wall_rmse)},
             {"bc_residual_rmse", num(r.bc_residual_rmse)},
             {"shell_probe", r.shell_probe}};
      }
      std::cout << j.dump(2) << "\n";
      return 0;
    }
    if (*report) {
      const auto summaries = read_summaries(report_inputs);
      std::cout << harness::aggregate_csv(harness::report(summaries));
      if (!compare_arms.empty()) {
        const auto comma = compare_arms.find(',');
        if (comma == std::string::npos || compare_metric.empty()) {
          throw std::invalid_argument("--compare needs baseline,challenger and --metric");
        }
        const harness::PairedComparison c = harness::compare_arms(
            summaries, compare_arms.substr(0, comma), compare_arms.substr(comma + 1), compare_metric);
        std::printf("\n%s: wins %d losses %d ties %d p %.6g\n", compare_metric.c_str(), c.wins, c.losses, c.ties,
                    c.p_value);
      }
      return 0;
    }
    if (*sign) {
      std::printf("%.17g\n", harness::paired_sign_test(sign_wins, sign_n));
      return 0;
    }
  } catch (const harness::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 64;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
