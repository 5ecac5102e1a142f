#include "hpinn/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

#include "hpinn/checkpoint.hpp"
#include "hpinn/stats.hpp"

namespace hpinn::harness {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// ---- typed reads and writes of config values ----

long read_integer(const Json& j) {
  if (!j.is_number_integer()) throw std::invalid_argument("expected an integer");
  return j.get<long>();
}

void read(const Json& j, long& out) { out = read_integer(j); }
void read(const Json& j, int& out) { out = static_cast<int>(read_integer(j)); }
void read(const Json& j, std::uint64_t& out) {
  if (!j.is_number_integer() || (j.is_number_integer() && !j.is_number_unsigned() && j.get<long>() < 0)) {
    throw std::invalid_argument("expected a non-negative integer");
  }
  out = j.get<std::uint64_t>();
}
void read(const Json& j, double& out) {
  if (!j.is_number()) throw std::invalid_argument("expected a number");
  out = j.get<double>();
  if (!std::isfinite(out)) throw std::invalid_argument("expected a finite number");
}
void read(const Json& j, std::string& out) {
  if (!j.is_string()) throw std::invalid_argument("expected a string");
  out = j.get<std::string>();
}
void read(const Json& j, std::vector<int>& out) {
  if (!j.is_array() || j.empty()) throw std::invalid_argument("expected a non-empty array of integers");
  out.clear();
  for (const Json& v : j) {
    if (!v.is_number_integer() || v.get<long>() <= 0) {
      throw std::invalid_argument("expected positive integer layer widths");
    }
    out.push_back(v.get<int>());
  }
}
void read(const Json& j, stage2::TermWeights& out) {
  if (!j.is_array() || j.size() != out.size()) throw std::invalid_argument("expected an array of 6 numbers");
  for (std::size_t t = 0; t < out.size(); ++t) read(j[t], out[t]);
}

template <typename Enum, typename Parse>
void read_enum(const Json& j, Enum& out, Parse parse) {
  std::string name;
  read(j, name);
  out = parse(name);
}

void read(const Json& j, Activation& out) { read_enum(j, out, activation_from_string); }
void read(const Json& j, OptimizerKind& out) { read_enum(j, out, optimizer_from_string); }
void read(const Json& j, stage1::GridStrategy& out) { read_enum(j, out, stage1::grid_strategy_from_string); }
void read(const Json& j, stage1::Arm& out) { read_enum(j, out, stage1::arm_from_string); }
void read(const Json& j, stage2::Arm& out) { read_enum(j, out, stage2::arm_from_string); }
void read(const Json& j, DecayKind& out) {
  std::string name;
  read(j, name);
  if (name == "linear") {
    out = DecayKind::linear;
  } else if (name == "cosine") {
    out = DecayKind::cosine;
  } else {
    throw std::invalid_argument("unknown decay kind '" + name + "' (linear, cosine)");
  }
}

Json write(long v) { return v; }
Json write(int v) { return v; }
Json write(std::uint64_t v) { return v; }
Json write(double v) { return v; }
Json write(const std::string& v) { return v; }
Json write(const std::vector<int>& v) { return Json(v); }
Json write(const stage2::TermWeights& v) { return Json(v); }
Json write(Activation v) { return to_string(v); }
Json write(OptimizerKind v) { return to_string(v); }
Json write(stage1::GridStrategy v) { return stage1::to_string(v); }
Json write(stage1::Arm v) { return stage1::to_string(v); }
Json write(stage2::Arm v) { return stage2::to_string(v); }
Json write(DecayKind v) { return v == DecayKind::linear ? "linear" : "cosine"; }

// ---- key table ----

enum StageMask : unsigned { kS1 = 1, kS2 = 2, kBoth = 3 };

struct Key {
  std::string name;
  unsigned stages;
  std::function<void(RunConfig&, const Json&)> set;
  std::function<Json(const RunConfig&)> get;
};

/// Key whose field has the same name in both stage configs.
template <typename Field>
Key shared(std::string name, Field field) {
  return {std::move(name), kBoth,
          [field](RunConfig& c, const Json& j) {
            if (c.stage == Stage::stage1) {
              read(j, field(c.s1));
            } else {
              read(j, field(c.s2));
            }
          },
          [field](const RunConfig& c) {
            return c.stage == Stage::stage1 ? write(field(c.s1)) : write(field(c.s2));
          }};
}

template <typename Field>
Key only(std::string name, unsigned stage, Field field) {
  return {std::move(name), stage, [field](RunConfig& c, const Json& j) { read(j, field(c)); },
          [field](const RunConfig& c) { return write(field(c)); }};
}

#define HPINN_FIELD(expr) [](auto& c) -> auto& { return expr; }

const std::vector<Key>& key_table() {
  static const std::vector<Key> keys = [] {
    std::vector<Key> k;
    k.push_back({"stage", kBoth, [](RunConfig&, const Json&) {},
                 [](const RunConfig& c) { return Json(to_string(c.stage)); }});
    k.push_back(only("run_name", kBoth, HPINN_FIELD(c.run_name)));
    k.push_back(only("output_dir", kBoth, HPINN_FIELD(c.output_dir)));
    k.push_back(shared("arm", HPINN_FIELD(c.arm)));
    k.push_back(shared("optimizer", HPINN_FIELD(c.optimizer)));
    k.push_back(shared("activation", HPINN_FIELD(c.activation)));
    k.push_back(shared("hidden", HPINN_FIELD(c.hidden)));
    k.push_back(shared("epochs", HPINN_FIELD(c.epochs)));
    k.push_back(shared("lr_init", HPINN_FIELD(c.lr.lr_init)));
    k.push_back(shared("lr_final", HPINN_FIELD(c.lr.lr_final)));
    k.push_back(shared("validate_every", HPINN_FIELD(c.validate_every)));
    k.push_back(shared("init_seed", HPINN_FIELD(c.init_seed)));
    k.push_back(shared("cloud_seed", HPINN_FIELD(c.cloud_seed)));
    k.push_back(only("audit_seed", kS1, HPINN_FIELD(c.s1.audit_seed)));
    k.push_back(shared("threads", HPINN_FIELD(c.eval.threads)));
    k.push_back(shared("chunk_size", HPINN_FIELD(c.eval.chunk_size)));

    k.push_back(only("n_interior", kS1, HPINN_FIELD(c.s1.n_interior)));
    k.push_back(only("n_boundary", kS1, HPINN_FIELD(c.s1.n_boundary)));
    k.push_back(only("n_val_interior", kS1, HPINN_FIELD(c.s1.n_val_interior)));
    k.push_back(only("n_val_boundary", kS1, HPINN_FIELD(c.s1.n_val_boundary)));
    k.push_back(only("n_audit", kS1, HPINN_FIELD(c.s1.n_audit)));
    k.push_back(only("lambda_bc", kS1, HPINN_FIELD(c.s1.lambda_bc)));
    k.push_back(only("aux_weight", kS1, HPINN_FIELD(c.s1.aux_weight)));
    k.push_back(only("aux_start", kS1, HPINN_FIELD(c.s1.aux_start)));
    k.push_back(only("aux_ramp", kS1, HPINN_FIELD(c.s1.aux_ramp)));
    k.push_back(only("aux_hold", kS1, HPINN_FIELD(c.s1.aux_hold)));
    k.push_back(only("aux_decay", kS1, HPINN_FIELD(c.s1.aux_decay)));
    k.push_back(only("aux_decay_kind", kS1, HPINN_FIELD(c.s1.aux_decay_kind)));
    k.push_back(only("aux_final_fraction", kS1, HPINN_FIELD(c.s1.aux_final_fraction)));
    k.push_back(only("grid", kS1, HPINN_FIELD(c.s1.grid)));
    k.push_back(only("aux_n", kS1, HPINN_FIELD(c.s1.aux_n)));

    k.push_back(only("n_interior", kS2, HPINN_FIELD(c.s2.train_sizes.interior)));
    k.push_back(only("n_boundary", kS2, HPINN_FIELD(c.s2.train_sizes.per_boundary)));
    k.push_back(only("n_pairs", kS2, HPINN_FIELD(c.s2.train_sizes.pairs)));
    k.push_back(only("n_val_interior", kS2, HPINN_FIELD(c.s2.val_sizes.interior)));
    k.push_back(only("n_val_boundary", kS2, HPINN_FIELD(c.s2.val_sizes.per_boundary)));
    k.push_back(only("n_val_pairs", kS2, HPINN_FIELD(c.s2.val_sizes.pairs)));
    k.push_back(only("term_weights", kS2, HPINN_FIELD(c.s2.weights)));
    k.push_back(only("shell_weight", kS2, HPINN_FIELD(c.s2.shell_weight)));
    k.push_back(only("shell_start_weight", kS2, HPINN_FIELD(c.s2.shell_start_weight)));
    k.push_back(only("shell_hold_fraction", kS2, HPINN_FIELD(c.s2.shell_hold_fraction)));
    k.push_back(only("shell_decay_fraction", kS2, HPINN_FIELD(c.s2.shell_decay_fraction)));
    k.push_back(only("shell_s_lo", kS2, HPINN_FIELD(c.s2.shell.s_lo)));
    k.push_back(only("shell_s_hi", kS2, HPINN_FIELD(c.s2.shell.s_hi)));
    k.push_back(only("shell_n_s", kS2, HPINN_FIELD(c.s2.shell.n_s)));
    k.push_back(only("shell_n_theta", kS2, HPINN_FIELD(c.s2.shell.n_theta)));
    k.push_back(only("shell_n_z", kS2, HPINN_FIELD(c.s2.shell.n_z)));
    k.push_back(only("r_min", kS2, HPINN_FIELD(c.s2.geometry.r_min)));
    k.push_back(only("r_max", kS2, HPINN_FIELD(c.s2.geometry.r_max)));
    k.push_back(only("length", kS2, HPINN_FIELD(c.s2.geometry.length)));
    k.push_back(only("amplitude", kS2, HPINN_FIELD(c.s2.geometry.amplitude)));
    k.push_back(only("lobes", kS2, HPINN_FIELD(c.s2.geometry.lobes)));
    k.push_back(only("flux_z_start", kS2, HPINN_FIELD(c.s2.flux.z_start)));
    k.push_back(only("flux_z_end", kS2, HPINN_FIELD(c.s2.flux.z_end)));
    k.push_back(only("flux_q_max", kS2, HPINN_FIELD(c.s2.flux.q_max)));
    k.push_back(only("audit_n_theta", kS2, HPINN_FIELD(c.s2.audit_n_theta)));
    k.push_back(only("audit_n_z", kS2, HPINN_FIELD(c.s2.audit_n_z)));
    k.push_back(only("reference_slice", kS2, HPINN_FIELD(c.reference_slice)));
    return k;
  }();
  return keys;
}

#undef HPINN_FIELD

unsigned mask(Stage s) { return s == Stage::stage1 ? kS1 : kS2; }

const Key* find_key(const std::string& name, Stage stage) {
  for (const Key& k : key_table()) {
    if (k.name == name && (k.stages & mask(stage))) return &k;
  }
  return nullptr;
}

void check_ranges(const RunConfig& c, std::vector<std::string>& bad, std::vector<std::string>& why) {
  auto need = [&](bool ok, const char* key, const char* msg) {
    if (!ok) {
      bad.push_back(key);
      why.push_back(std::string(key) + ": " + msg);
    }
  };
  auto common = [&](const auto& s) {
    need(s.epochs >= 0, "epochs", "must be >= 0");
    need(s.validate_every > 0, "validate_every", "must be > 0");
    need(s.lr.lr_init > 0.0, "lr_init", "must be > 0");
    need(s.lr.lr_final > 0.0, "lr_final", "must be > 0");
    need(s.eval.threads >= 1, "threads", "must be >= 1");
    need(s.eval.chunk_size >= 1, "chunk_size", "must be >= 1");
  };
  if (c.stage == Stage::stage1) {
    common(c.s1);
    need(c.s1.n_interior > 0, "n_interior", "must be > 0");
    need(c.s1.n_boundary > 0, "n_boundary", "must be > 0");
    need(c.s1.n_audit > 0, "n_audit", "must be > 0");
    need(c.s1.aux_weight >= 0.0, "aux_weight", "must be >= 0");
  } else {
    common(c.s2);
    need(c.s2.shell_weight >= 0.0, "shell_weight", "must be >= 0");
    for (double w : c.s2.weights) need(w > 0.0, "term_weights", "must all be > 0");
  }
}

// ---- summaries ----

Json number_or_null(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

double number_from(const Json& j) { return j.is_null() ? kNaN : j.get<double>(); }

std::string fmt_double(double v) {
  if (!std::isfinite(v)) return "";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fmt_weight(double w) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", w);
  return buf;
}

struct Executed {
  RunSummary summary;
  NetworkParams best;
};

Executed execute_with_params(const RunConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  Executed out;
  RunSummary& s = out.summary;
  s.stage = cfg.stage;
  s.run_name = cfg.resolved_run_name();
  s.arm = cfg.arm_name();
  s.weight = cfg.weight();
  s.seed = cfg.seed();
  s.config = config_to_json(cfg);
  const TrainOutcome* train = nullptr;
  stage1::Result r1;
  stage2::Result r2;
  long epochs = 0;
  if (cfg.stage == Stage::stage1) {
    r1 = stage1::train_stage1(cfg.s1);
    train = &r1.train;
    epochs = cfg.s1.epochs;
    s.metrics = {{"rel_l2_u", r1.metrics.rel_l2_u},
                 {"rel_l2_grad_u", r1.metrics.rel_l2_grad_u},
                 {"residual_rmse", r1.metrics.residual_rmse},
                 {"grad_r_rmse", r1.metrics.grad_r_rmse},
                 {"ad_scale", r1.ad_scale}};
  } else {
    WallSlice ref;
    const bool have_ref = !cfg.reference_slice.empty();
    if (have_ref) ref = load_wall_slice(cfg.reference_slice);
    r2 = stage2::train_stage2(cfg.s2, have_ref ? &ref : nullptr);
    train = &r2.train;
    epochs = cfg.s2.epochs;
    s.metrics = {{"wall_bc_rmse", r2.report.wall_bc_rmse},
                 {"dTdn_wall_rmse", r2.report.dtdn_wall_rmse},
                 {"T_wall_rmse", r2.report.t_wall_rmse},
                 {"bc_residual_rmse", r2.report.bc_residual_rmse},
                 {"shell_probe", r2.report.shell_probe}};
    for (int t = 0; t < 6; ++t) {
      s.metrics[std::string("term_") + stage2::kTermNames[t]] =
          r2.train.failed ? kNaN : r2.final_terms.mean_square[t];
    }
  }
  s.failed = train->failed;
  s.failure = train->failure;
  s.final_loss = train->final_loss;
  s.best_val = train->best_val;
  s.best_epoch = train->best_epoch;
  s.last_finite_epoch = train->last_finite_epoch;
  s.history = train->history;
  out.best = train->best;
  s.total_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  s.seconds_per_epoch = epochs > 0 ? s.total_seconds / static_cast<double>(epochs) : 0.0;
  return out;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << text;
  if (!os) throw std::runtime_error("write failed for " + path.string());
}

// exact for n <= 62, log-space beyond
double upper_tail(int m, int n) {
  if (n <= 62) {
    unsigned __int128 c = 1;  // C(n, k), starting at k = 0
    unsigned __int128 sum = 0;
    for (int k = 0; k <= n; ++k) {
      if (k > 0) c = c * static_cast<unsigned>(n - k + 1) / static_cast<unsigned>(k);
      if (k >= m) sum += c;
    }
    return std::ldexp(static_cast<double>(sum), -n);
  }
  double p = 0.0;
  for (int k = m; k <= n; ++k) {
    p += std::exp(std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0) -
                  n * std::log(2.0));
  }
  return p;
}

const std::vector<std::string>& ranking_levels(Stage s) {
  static const std::vector<std::string> s1 = {"best_val", "residual_rmse", "rel_l2_u"};
  static const std::vector<std::string> s2 = {"dTdn_wall_rmse", "bc_residual_rmse", "wall_bc_rmse",
                                              "final_loss",     "best_val",         "T_wall_rmse"};
  return s == Stage::stage1 ? s1 : s2;
}

// -1 if a ranks ahead of b, 1 if behind, 0 if tied on every level
int compare_rows(const AggregateRow& a, const AggregateRow& b) {
  for (const std::string& m : ranking_levels(a.stage)) {
    const double x = a.metrics.at(m).mean;
    const double y = b.metrics.at(m).mean;
    if (std::isnan(x) || std::isnan(y) || x == y) continue;
    return x < y ? -1 : 1;
  }
  return 0;
}

}  // namespace

std::string to_string(Stage s) { return s == Stage::stage1 ? "stage1" : "stage2"; }

Stage stage_from_string(const std::string& name) {
  if (name == "stage1") return Stage::stage1;
  if (name == "stage2") return Stage::stage2;
  throw std::invalid_argument("unknown stage '" + name + "' (stage1, stage2)");
}

std::string RunConfig::arm_name() const {
  return stage == Stage::stage1 ? stage1::to_string(s1.arm) : stage2::to_string(s2.arm);
}

double RunConfig::weight() const {
  if (arm_name() == "off") return 0.0;
  return stage == Stage::stage1 ? s1.aux_weight : s2.shell_weight;
}

std::uint64_t RunConfig::seed() const { return stage == Stage::stage1 ? s1.init_seed : s2.init_seed; }

std::string RunConfig::resolved_run_name() const {
  if (!run_name.empty()) return run_name;
  return to_string(stage) + "_" + arm_name() + "_w" + fmt_weight(weight()) + "_s" + std::to_string(seed());
}

std::vector<std::string> config_keys(Stage stage) {
  std::vector<std::string> out;
  for (const Key& k : key_table()) {
    if (k.stages & mask(stage)) out.push_back(k.name);
  }
  return out;
}

std::vector<std::string> all_config_keys() {
  std::vector<std::string> out;
  for (const Key& k : key_table()) {
    if (std::find(out.begin(), out.end(), k.name) == out.end()) out.push_back(k.name);
  }
  return out;
}

RunConfig config_from_json(const Json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object", {});
  if (!j.contains("stage")) throw ConfigError("config: missing required key 'stage'", {"stage"});
  RunConfig cfg;
  try {
    cfg.stage = stage_from_string(j.at("stage").is_string() ? j.at("stage").get<std::string>() : "");
  } catch (const std::invalid_argument&) {
    throw ConfigError("config: 'stage' must be \"stage1\" or \"stage2\"", {"stage"});
  }

  std::vector<std::string> bad;
  std::vector<std::string> why;
  for (const auto& [name, value] : j.items()) {
    const Key* key = find_key(name, cfg.stage);
    if (!key) {
      bad.push_back(name);
      const bool other = find_key(name, cfg.stage == Stage::stage1 ? Stage::stage2 : Stage::stage1);
      why.push_back(name + (other ? ": not used by " + to_string(cfg.stage) : ": unknown key"));
      continue;
    }
    try {
      key->set(cfg, value);
    } catch (const std::exception& e) {
      bad.push_back(name);
      why.push_back(name + ": " + e.what());
    }
  }
  if (bad.empty()) check_ranges(cfg, bad, why);
  if (!bad.empty()) {
    std::string msg = "invalid config:";
    for (const std::string& w : why) msg += "\n  " + w;
    throw ConfigError(msg, bad);
  }
  return cfg;
}

Json config_to_json(const RunConfig& cfg) {
  Json j = Json::object();
  for (const Key& k : key_table()) {
    if (k.stages & mask(cfg.stage)) j[k.name] = k.get(cfg);
  }
  return j;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open config " + path.string());
  Json j;
  try {
    j = Json::parse(is);
  } catch (const Json::parse_error& e) {
    throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what(), {});
  }
  return config_from_json(j);
}

std::string effective_output_dir(const RunConfig& cfg) {
  const char* env = std::getenv("HPINN_OUTPUT_DIR");
  return env && *env ? std::string(env) : cfg.output_dir;
}

const std::vector<std::string>& metric_names(Stage stage) {
  static const std::vector<std::string> s1 = {"rel_l2_u", "rel_l2_grad_u", "residual_rmse",
                                              "grad_r_rmse", "ad_scale"};
  static const std::vector<std::string> s2 = {
      "wall_bc_rmse", "dTdn_wall_rmse", "T_wall_rmse", "bc_residual_rmse", "shell_probe",
      "term_pde",     "term_inner",     "term_inlet",  "term_outlet",      "term_outer",
      "term_periodic"};
  return stage == Stage::stage1 ? s1 : s2;
}

Json summary_to_json(const RunSummary& s, bool with_timing) {
  Json j;
  j["schema"] = "hpinn.run_summary";
  j["schema_version"] = kSummarySchemaVersion;
  j["stage"] = to_string(s.stage);
  j["run_name"] = s.run_name;
  j["arm"] = s.arm;
  j["weight"] = s.weight;
  j["seed"] = s.seed;
  j["status"] = s.failed ? "failed" : "ok";
  j["failure"] = s.failure;
  j["final_loss"] = number_or_null(s.final_loss);
  j["best_val"] = number_or_null(s.best_val);
  j["best_epoch"] = s.best_epoch;
  j["last_finite_epoch"] = s.last_finite_epoch;
  Json m = Json::object();
  for (const std::string& name : metric_names(s.stage)) {
    const auto it = s.metrics.find(name);
    m[name] = number_or_null(it == s.metrics.end() ? kNaN : it->second);
  }
  j["metrics"] = m;
  Json h = Json::array();
  for (const HistoryPoint& p : s.history) {
    h.push_back({p.epoch, number_or_null(p.train_loss), number_or_null(p.val_loss)});
  }
  j["history_columns"] = {"epoch", "train_loss", "val_loss"};
  j["history"] = h;
  j["config"] = s.config;
  if (with_timing) j["timing"] = {{"total_seconds", s.total_seconds}, {"seconds_per_epoch", s.seconds_per_epoch}};
  return j;
}

RunSummary summary_from_json(const Json& j) {
  if (j.value("schema", "") != "hpinn.run_summary") throw std::invalid_argument("not a run summary");
  if (j.value("schema_version", 0) != kSummarySchemaVersion) {
    throw std::invalid_argument("unsupported run summary schema version");
  }
  RunSummary s;
  s.stage = stage_from_string(j.at("stage").get<std::string>());
  s.run_name = j.at("run_name").get<std::string>();
  s.arm = j.at("arm").get<std::string>();
  s.weight = j.at("weight").get<double>();
  s.seed = j.at("seed").get<std::uint64_t>();
  s.failed = j.at("status").get<std::string>() == "failed";
  s.failure = j.at("failure").get<std::string>();
  s.final_loss = number_from(j.at("final_loss"));
  s.best_val = number_from(j.at("best_val"));
  s.best_epoch = j.at("best_epoch").get<long>();
  s.last_finite_epoch = j.at("last_finite_epoch").get<long>();
  for (const auto& [name, v] : j.at("metrics").items()) s.metrics[name] = number_from(v);
  for (const Json& p : j.at("history")) {
    s.history.push_back({p.at(0).get<long>(), number_from(p.at(1)), number_from(p.at(2))});
  }
  s.config = j.at("config");
  if (j.contains("timing")) {
    s.total_seconds = j["timing"].at("total_seconds").get<double>();
    s.seconds_per_epoch = j["timing"].at("seconds_per_epoch").get<double>();
  }
  return s;
}

std::string csv_header(Stage stage) {
  std::string h = "run_name,stage,arm,weight,seed,optimizer,epochs,status,final_loss,best_val,best_epoch";
  for (const std::string& m : metric_names(stage)) h += "," + m;
  return h + ",seconds_per_epoch";
}

std::string csv_row(const RunSummary& s) {
  std::ostringstream os;
  os << s.run_name << ',' << to_string(s.stage) << ',' << s.arm << ',' << fmt_double(s.weight) << ','
     << s.seed << ',' << s.config.value("optimizer", "") << ',' << s.config.value("epochs", 0L) << ','
     << (s.failed ? "failed" : "ok") << ',' << fmt_double(s.final_loss) << ',' << fmt_double(s.best_val)
     << ',' << s.best_epoch;
  for (const std::string& m : metric_names(s.stage)) {
    const auto it = s.metrics.find(m);
    os << ',' << fmt_double(it == s.metrics.end() ? kNaN : it->second);
  }
  os << ',' << fmt_double(s.seconds_per_epoch);
  return os.str();
}

RunSummary execute(const RunConfig& cfg) { return execute_with_params(cfg).summary; }

RunSummary run(const RunConfig& cfg, RunOutputs* outputs) {
  const std::filesystem::path dir = effective_output_dir(cfg);
  std::filesystem::create_directories(dir);
  Executed e = execute_with_params(cfg);
  const std::string stem = e.summary.run_name;
  RunOutputs o{dir / (stem + ".json"), dir / (stem + ".csv"), dir / (stem + ".ckpt")};
  write_text(o.json, summary_to_json(e.summary).dump(2) + "\n");
  write_text(o.csv, csv_header(cfg.stage) + "\n" + csv_row(e.summary) + "\n");
  save_checkpoint(o.checkpoint, e.best);
  if (outputs) *outputs = o;
  return e.summary;
}

std::vector<RunConfig> expand_sweep(const RunConfig& tmpl, const SweepAxes& axes) {
  if (axes.arms.empty() || axes.seeds.empty()) {
    throw std::invalid_argument("sweep: arms and seeds must be non-empty");
  }
  const double tmpl_weight = tmpl.stage == Stage::stage1 ? tmpl.s1.aux_weight : tmpl.s2.shell_weight;
  const std::vector<double> weights = axes.weights.empty() ? std::vector<double>{tmpl_weight} : axes.weights;
  std::vector<RunConfig> out;
  for (const std::string& arm : axes.arms) {
    // The weight does not enter an off run, so it is run once per seed.
    const std::size_t n_weights = arm == "off" ? 1 : weights.size();
    for (std::size_t wi = 0; wi < n_weights; ++wi) {
      const double w = weights[wi];
      for (std::uint64_t seed : axes.seeds) {
        RunConfig c = tmpl;
        if (c.stage == Stage::stage1) {
          c.s1.arm = stage1::arm_from_string(arm);
          c.s1.aux_weight = w;
          c.s1.init_seed = c.s1.cloud_seed = c.s1.audit_seed = seed;
        } else {
          c.s2.arm = stage2::arm_from_string(arm);
          c.s2.shell_weight = w;
          c.s2.init_seed = c.s2.cloud_seed = seed;
        }
        c.run_name.clear();
        if (!tmpl.run_name.empty()) c.run_name = tmpl.run_name + "_" + c.resolved_run_name();
        out.push_back(std::move(c));
      }
    }
  }
  return out;
}

SweepResult sweep(const RunConfig& tmpl, const SweepAxes& axes) {
  SweepResult res;
  for (const RunConfig& c : expand_sweep(tmpl, axes)) res.runs.push_back(run(c));
  res.aggregate = report(res.runs);
  const std::filesystem::path dir = effective_output_dir(tmpl);
  std::string rows = csv_header(tmpl.stage) + "\n";
  for (const RunSummary& s : res.runs) rows += csv_row(s) + "\n";
  write_text(dir / "sweep.csv", rows);
  write_text(dir / "aggregate.csv", aggregate_csv(res.aggregate));
  return res;
}

std::vector<AggregateRow> report(const std::vector<RunSummary>& summaries) {
  if (summaries.empty()) throw std::invalid_argument("report: no summaries");
  const Stage stage = summaries.front().stage;
  for (const RunSummary& s : summaries) {
    if (s.stage != stage) throw std::invalid_argument("report: summaries mix stage1 and stage2");
  }
  std::vector<std::string> metrics = {"final_loss", "best_val"};
  for (const std::string& m : metric_names(stage)) metrics.push_back(m);

  std::map<std::pair<std::string, double>, std::vector<const RunSummary*>> groups;
  for (const RunSummary& s : summaries) groups[{s.arm, s.weight}].push_back(&s);

  std::vector<AggregateRow> rows;
  for (const auto& [label, runs] : groups) {
    AggregateRow row;
    row.stage = stage;
    row.arm = label.first;
    row.weight = label.second;
    row.runs = runs.size();
    for (const std::string& m : metrics) {
      std::vector<double> v;
      for (const RunSummary* s : runs) {
        if (s->failed) continue;
        const double x = m == "final_loss" ? s->final_loss
                         : m == "best_val" ? s->best_val
                                           : s->metrics.count(m) ? s->metrics.at(m) : kNaN;
        if (std::isfinite(x)) v.push_back(x);
      }
      MeanStd ms = mean_std(v);
      if (v.empty()) ms.mean = ms.std = kNaN;
      row.metrics[m] = ms;
    }
    for (const RunSummary* s : runs) row.failed += s->failed ? 1 : 0;
    rows.push_back(std::move(row));
  }
  // rows are in label order; repeatedly take the first row that nothing remaining beats
  std::vector<AggregateRow> ranked;
  while (!rows.empty()) {
    std::size_t best = 0;
    for (std::size_t p = 1; p < rows.size(); ++p) {
      if (compare_rows(rows[p], rows[best]) < 0) best = p;
    }
    rows[best].rank = static_cast<int>(ranked.size()) + 1;
    ranked.push_back(std::move(rows[best]));
    rows.erase(rows.begin() + static_cast<long>(best));
  }
  return ranked;
}

std::string aggregate_csv(const std::vector<AggregateRow>& rows) {
  if (rows.empty()) return "";
  std::ostringstream os;
  os << "stage,arm,weight,rank,runs,failed";
  for (const auto& [name, ms] : rows.front().metrics) os << ',' << name << "_mean," << name << "_std";
  os << '\n';
  for (const AggregateRow& r : rows) {
    os << to_string(r.stage) << ',' << r.arm << ',' << fmt_double(r.weight) << ',' << r.rank << ','
       << r.runs << ',' << r.failed;
    for (const auto& [name, ms] : r.metrics) os << ',' << fmt_double(ms.mean) << ',' << fmt_double(ms.std);
    os << '\n';
  }
  return os.str();
}

double paired_sign_test(int wins, int n) {
  if (n <= 0) throw std::invalid_argument("paired_sign_test: n must be positive");
  if (wins < 0 || wins > n) throw std::invalid_argument("paired_sign_test: need 0 <= wins <= n");
  const int m = std::max(wins, n - wins);
  return std::min(1.0, 2.0 * upper_tail(m, n));
}

PairedComparison compare_arms(const std::vector<RunSummary>& summaries, const std::string& baseline,
                              const std::string& challenger, const std::string& metric) {
  auto value = [&](const RunSummary& s) {
    if (metric == "final_loss") return s.final_loss;
    if (metric == "best_val") return s.best_val;
    const auto it = s.metrics.find(metric);
    if (it == s.metrics.end()) throw std::invalid_argument("compare_arms: unknown metric '" + metric + "'");
    return it->second;
  };
  std::map<std::uint64_t, double> base, chal;
  for (const RunSummary& s : summaries) {
    if (s.failed || (s.arm != baseline && s.arm != challenger)) continue;
    auto& side = s.arm == baseline ? base : chal;
    if (!side.emplace(s.seed, value(s)).second) {
      throw std::invalid_argument("compare_arms: arm '" + s.arm + "' has two runs for seed " +
                                  std::to_string(s.seed));
    }
  }
  PairedComparison out;
  for (const auto& [seed, b] : base) {
    const auto it = chal.find(seed);
    if (it == chal.end()) continue;
    const double c = it->second;
    if (std::isnan(b) || std::isnan(c) || b == c) {
      ++out.ties;
    } else if (c < b) {
      ++out.wins;
    } else {
      ++out.losses;
    }
  }
  const int n = out.wins + out.losses;
  out.p_value = n > 0 ? paired_sign_test(out.wins, n) : 1.0;
  return out;
}

}  // namespace hpinn::harness
