#include "minimax/suite.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>

#include "minimax/errors.hpp"
#include "minimax/parallel.hpp"
#include "minimax/rng.hpp"

namespace minimax {

using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

namespace {

// Typed access to one JSON object that remembers which keys were read, so
// anything left over can be rejected as unknown.
class Fields {
 public:
  Fields(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw InputError(path_ + ": expected an object");
  }

  bool has(const std::string& key) const { return j_.contains(key); }

  template <class T>
  T get(const std::string& key, T fallback) {
    used_.insert(key);
    if (!j_.contains(key)) return fallback;
    return convert<T>(j_.at(key), key);
  }

  template <class T>
  T req(const std::string& key) {
    used_.insert(key);
    if (!j_.contains(key)) throw InputError(path_ + ": missing required key '" + key + "'");
    return convert<T>(j_.at(key), key);
  }

  const json* sub(const std::string& key) {
    used_.insert(key);
    return j_.contains(key) ? &j_.at(key) : nullptr;
  }

  std::string at(const std::string& key) const { return path_ + "." + key; }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!used_.count(it.key())) throw InputError(path_ + ": unknown key '" + it.key() + "'");
  }

 private:
  template <class T>
  T convert(const json& v, const std::string& key) const {
    try {
      if constexpr (std::is_same_v<T, int> || std::is_same_v<T, long long>) {
        if (!v.is_number_integer()) throw InputError("");
      } else if constexpr (std::is_same_v<T, double>) {
        if (!v.is_number()) throw InputError("");
      } else if constexpr (std::is_same_v<T, bool>) {
        if (!v.is_boolean()) throw InputError("");
      } else if constexpr (std::is_same_v<T, std::string>) {
        if (!v.is_string()) throw InputError("");
      }
      return v.get<T>();
    } catch (const std::exception&) {
      throw InputError(path_ + "." + key + ": wrong type (" + std::string(v.type_name()) + ")");
    }
  }

  const json& j_;
  std::string path_;
  std::set<std::string> used_;
};

ojson onum(double x) { return std::isfinite(x) ? ojson(x) : ojson(nullptr); }

std::vector<double> number_list(const json* j, const std::string& path, std::vector<double> fallback) {
  if (!j) return fallback;
  if (!j->is_array() || j->empty()) throw InputError(path + ": expected a nonempty array of numbers");
  std::vector<double> out;
  for (const auto& v : *j) {
    if (!v.is_number()) throw InputError(path + ": expected numbers");
    out.push_back(v.get<double>());
  }
  return out;
}

std::pair<double, double> band(const json* j, const std::string& path) {
  const auto v = number_list(j, path, {});
  if (v.size() != 2 || !(v[0] <= v[1])) throw InputError(path + ": expected [lo, hi] with lo <= hi");
  return {v[0], v[1]};
}

ConstantsProfile parse_profile(const json* j, const std::string& path, const ConstantsProfile& fallback) {
  if (!j) return fallback;
  if (j->is_string()) return ConstantsProfile::by_name(j->get<std::string>());
  Fields f(*j, path);
  ConstantsProfile p = f.has("base") ? ConstantsProfile::by_name(f.req<std::string>("base")) : fallback;
  p.Q = f.get("Q", p.Q);
  p.eta = f.get("eta", p.eta);
  p.c0 = f.get("c0", p.c0);
  p.eta_prime = f.get("eta_prime", p.eta_prime);
  p.c0_prime = f.get("c0_prime", p.c0_prime);
  p.C_M = f.get("C_M", p.C_M);
  p.C_Q = f.get("C_Q", p.C_Q);
  p.C_X = f.get("C_X", p.C_X);
  p.zeta = f.get("zeta", p.zeta);
  p.zeta_prime = f.get("zeta_prime", p.zeta_prime);
  p.mc_samples = f.get("mc_samples", p.mc_samples);
  p.bisect_rel_tol = f.get("bisect_rel_tol", p.bisect_rel_tol);
  f.finish();
  p.validate();
  return p;
}

ojson profile_json(const ConstantsProfile& p) {
  return ojson{{"name", p.name},       {"Q", p.Q},         {"eta", p.eta},
               {"c0", p.c0},           {"eta_prime", p.eta_prime}, {"c0_prime", p.c0_prime},
               {"C_M", p.C_M},         {"C_Q", p.C_Q},     {"C_X", p.C_X},
               {"zeta", p.zeta},       {"zeta_prime", p.zeta_prime}, {"mc_samples", p.mc_samples},
               {"bisect_rel_tol", p.bisect_rel_tol}};
}

TargetSpec parse_target(const json& j, const std::string& path, int N, int d) {
  Fields f(j, path);
  const std::string kind = f.req<std::string>("kind");
  TargetSpec t;
  if (kind == "zero") {
    t.kind = TargetSpec::Kind::kZero;
  } else if (kind == "spike" || kind == "dense") {
    t.kind = kind == "spike" ? TargetSpec::Kind::kSpike : TargetSpec::Kind::kDense;
    t.l1_norm = f.req<double>("l1_norm");
  } else if (kind == "sparse") {
    t.kind = TargetSpec::Kind::kSparse;
    const json* s = f.sub("s");
    if (!s) throw InputError(path + ": sparse target needs 's'");
    if (s->is_string() && s->get<std::string>() == "auto") {
      t.s = rip_sparsity(N, d);
    } else if (s->is_number_integer()) {
      t.s = s->get<int>();
    } else {
      throw InputError(path + ".s: expected an integer or \"auto\"");
    }
    if (t.s < 1) throw InputError(path + ".s: must be at least 1");
    if (f.has("amplitude") == f.has("l1_norm"))
      throw InputError(path + ": sparse target needs exactly one of 'amplitude' and 'l1_norm'");
    t.amplitude = f.has("amplitude") ? f.req<double>("amplitude") : f.req<double>("l1_norm") / t.s;
  } else {
    throw InputError(path + ".kind: unknown target kind '" + kind + "' (sparse, dense, spike, zero)");
  }
  f.finish();
  t.validate(d);
  return t;
}

CellSpec parse_cell(const json& j, const std::string& path) {
  Fields f(j, path);
  CellSpec c;
  c.N = f.req<int>("N");
  c.d = f.req<int>("d");
  c.sigma = f.req<double>("sigma");
  if (c.N < 1 || c.d < 1) throw InputError(path + ": N and d must be positive");
  const json* t = f.sub("target");
  if (t) c.target = parse_target(*t, f.at("target"), c.N, c.d);
  f.finish();
  return c;
}

// "cells": [...] or "cell": {...} with "vary": {"N": [...]} (keys N, d, sigma, rho).
std::vector<CellSpec> parse_cells(Fields& f, const std::string& path) {
  const json* cells = f.sub("cells");
  const json* base = f.sub("cell");
  const json* vary = f.sub("vary");
  if ((cells != nullptr) == (base != nullptr)) throw InputError(path + ": give either 'cells' or 'cell'");
  std::vector<CellSpec> out;
  if (cells) {
    if (vary) throw InputError(path + ": 'vary' needs 'cell'");
    if (!cells->is_array() || cells->empty()) throw InputError(path + ".cells: expected a nonempty array");
    for (std::size_t i = 0; i < cells->size(); ++i)
      out.push_back(parse_cell((*cells)[i], path + ".cells[" + std::to_string(i) + "]"));
    return out;
  }
  if (!vary) return {parse_cell(*base, path + ".cell")};
  if (!vary->is_object() || vary->size() != 1) throw InputError(path + ".vary: expected one key");
  const std::string key = vary->begin().key();
  const auto values = number_list(&vary->begin().value(), path + ".vary." + key, {});
  for (double v : values) {
    json cell = *base;
    if (key == "N" || key == "d") {
      if (v != std::floor(v)) throw InputError(path + ".vary." + key + ": expected integers");
      cell[key] = static_cast<int>(v);
    } else if (key == "sigma") {
      cell[key] = v;
    } else if (key == "rho") {
      if (!cell.contains("target")) throw InputError(path + ".vary.rho: the cell needs a target");
      cell["target"].erase("amplitude");
      cell["target"]["l1_norm"] = v;
    } else {
      throw InputError(path + ".vary: unknown key '" + key + "' (N, d, sigma, rho)");
    }
    out.push_back(parse_cell(cell, path + ".cell"));
  }
  return out;
}

SolverOptions parse_solver(const json* j, const std::string& path) {
  SolverOptions o;
  if (!j) return o;
  Fields f(*j, path);
  o.max_iters = f.get("max_iters", o.max_iters);
  o.tol = f.get("tol", o.tol);
  f.finish();
  o.validate();
  return o;
}

RermGrid parse_grid(const json* j, const std::string& path) {
  RermGrid g;
  if (!j) return g;
  Fields f(*j, path);
  g.points = f.get("points", g.points);
  g.refine_iters = f.get("refine_iters", g.refine_iters);
  g.monotone_tol = f.get("monotone_tol", g.monotone_tol);
  if (f.has("rho_min")) g.rho_min = f.req<double>("rho_min");
  if (f.has("rho_max")) g.rho_max = f.req<double>("rho_max");
  f.finish();
  return g;
}

PsiMode parse_psi(Fields& f) {
  const std::string m = f.get<std::string>("psi", "mc");
  if (m == "mc") return PsiMode::kMonteCarlo;
  if (m == "closed") return PsiMode::kClosed;
  throw InputError("psi must be \"mc\" or \"closed\"");
}

struct Flag {
  std::string name;
  bool pass = true;
  bool report_only = false;
  std::string detail;
};

ojson flags_json(const std::vector<Flag>& flags) {
  ojson out = ojson::array();
  for (const auto& f : flags)
    out.push_back(ojson{{"name", f.name}, {"pass", f.pass}, {"report_only", f.report_only}, {"detail", f.detail}});
  return out;
}

std::string fmt(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", x);
  return buf;
}

ojson quartiles_json(const Quartiles& q) {
  return ojson{{"q1", onum(q.q1)}, {"median", onum(q.median)}, {"q3", onum(q.q3)}};
}

ojson rate_result_json(const RateExperimentResult& r) {
  ojson cells = ojson::array();
  for (const auto& c : r.cells) {
    ojson est = ojson::object();
    for (const auto& e : c.estimators)
      est[e.estimator] = ojson{{"l2_error_sq", quartiles_json(e.l2_error_sq)},
                               {"pred_error_sq", quartiles_json(e.pred_error_sq)},
                               {"failures", e.failures},
                               {"nonconverged", e.nonconverged},
                               {"flagged", e.flagged},
                               {"median_over_rate", onum(e.median_over_rate)}};
    cells.push_back(ojson{{"id", c.id},
                          {"N", c.spec.N},
                          {"d", c.spec.d},
                          {"sigma", c.spec.sigma},
                          {"target_l1", c.target_l1},
                          {"sweep_value", c.sweep_value},
                          {"minimax_rate", onum(c.rate.value)},
                          {"rate_branch", c.rate.branch},
                          {"rate_upper_bound_only", c.rate.upper_bound_only},
                          {"psi_at_target", onum(c.psi_at_target)},
                          {"trials", c.trials},
                          {"estimators", est}});
  }
  ojson slopes = ojson::object();
  for (const auto& [name, s] : r.slopes)
    slopes[name] = ojson{{"slope", onum(s.slope)}, {"std_error", onum(s.std_error)}, {"intercept", onum(s.intercept)},
                         {"cells", s.cells},       {"branch", s.branch},           {"valid", s.valid}};
  return ojson{{"cells", cells}, {"slopes", slopes}};
}

struct Context {
  ConstantsProfile profile;
  int threads = 1;
  std::vector<TrialRecord>* trials = nullptr;
};

void append_trials(Context& ctx, const std::string& exp, std::vector<TrialRecord> recs) {
  for (auto& r : recs) {
    r.cell_id = exp + "/" + r.cell_id;
    ctx.trials->push_back(std::move(r));
  }
}

RateExperimentConfig parse_rate_common(Fields& f, const std::string& path, const std::string& name, std::uint64_t seed,
                                       const Context& ctx) {
  RateExperimentConfig cfg;
  cfg.name = name;
  cfg.seed = seed;
  cfg.cells = parse_cells(f, path);
  cfg.sweep = f.get<std::string>("sweep", "N");
  cfg.trials = f.get("trials", cfg.trials);
  cfg.psi_mode = parse_psi(f);
  cfg.psi_points = f.get("psi_points", cfg.psi_points);
  cfg.constants = parse_profile(f.sub("profile"), f.at("profile"), ctx.profile);
  cfg.solver = parse_solver(f.sub("solver"), f.at("solver"));
  cfg.grid = parse_grid(f.sub("grid"), f.at("grid"));
  return cfg;
}

void failure_flag(const RateExperimentResult& r, std::vector<Flag>& flags) {
  int flagged = 0;
  for (const auto& c : r.cells)
    for (const auto& e : c.estimators) flagged += e.flagged ? 1 : 0;
  flags.push_back({"estimator_failures_below_20pct", flagged == 0, false,
                   std::to_string(flagged) + " cell/estimator pairs with more than 20% failed trials"});
}

ojson run_rate(Fields& f, const std::string& path, const std::string& name, std::uint64_t seed, Context& ctx,
               std::vector<Flag>& flags) {
  RateExperimentConfig cfg = parse_rate_common(f, path, name, seed, ctx);
  if (const json* e = f.sub("estimators")) {
    if (!e->is_array() || e->empty()) throw InputError(path + ".estimators: expected a nonempty array");
    cfg.estimators.clear();
    for (const auto& v : *e) {
      if (!v.is_string()) throw InputError(path + ".estimators: expected names");
      cfg.estimators.push_back(estimator_from_name(v.get<std::string>()));
    }
  }
  cfg.lasso_scale = f.get("lasso_scale", cfg.lasso_scale);
  const json* checks = f.sub("checks");
  std::optional<std::pair<double, double>> slope_range, rate_band, rerm_band;
  bool zero_error = false;
  if (checks) {
    Fields c(*checks, path + ".checks");
    if (c.has("slope_range")) slope_range = band(c.sub("slope_range"), c.at("slope_range"));
    if (c.has("rate_band")) rate_band = band(c.sub("rate_band"), c.at("rate_band"));
    if (c.has("rerm_vs_oracle_band")) rerm_band = band(c.sub("rerm_vs_oracle_band"), c.at("rerm_vs_oracle_band"));
    zero_error = c.get("zero_error", false);
    c.finish();
  }
  f.finish();

  const RateExperimentResult r = rate_experiment(cfg, ctx.threads);
  failure_flag(r, flags);
  if (slope_range) {
    for (const auto& [est, s] : r.slopes) {
      const bool ok = s.valid && s.slope >= slope_range->first && s.slope <= slope_range->second;
      flags.push_back({"slope_" + est, ok, false,
                       "slope " + fmt(s.slope) + " over " + std::to_string(s.cells) + " cells, band [" +
                           fmt(slope_range->first) + ", " + fmt(slope_range->second) + "]"});
    }
  }
  if (rate_band) {
    bool ok = true;
    std::string detail;
    for (const auto& c : r.cells) {
      const auto* e = c.find("oracle_erm");
      if (!e) throw InputError(path + ".checks.rate_band needs the oracle_erm estimator");
      const double ratio = e->median_over_rate;
      ok = ok && std::isfinite(ratio) && ratio >= rate_band->first && ratio <= rate_band->second;
      detail += (detail.empty() ? "" : " ") + fmt(ratio);
    }
    flags.push_back({"oracle_erm_within_rate_band", ok, false, "median/rate per cell: " + detail});
  }
  if (rerm_band) {
    bool ok = true;
    std::string detail;
    for (const auto& c : r.cells) {
      const auto* a = c.find("rerm");
      const auto* b = c.find("oracle_erm");
      if (!a || !b) throw InputError(path + ".checks.rerm_vs_oracle_band needs rerm and oracle_erm");
      const double ratio = a->l2_error_sq.median / b->l2_error_sq.median;
      ok = ok && std::isfinite(ratio) && ratio >= rerm_band->first && ratio <= rerm_band->second;
      detail += (detail.empty() ? "" : " ") + fmt(ratio);
    }
    flags.push_back({"rerm_within_oracle_band", ok, false, "rerm/oracle median per cell: " + detail});
  }
  if (zero_error) {
    // "zero" up to the solver's floating-point floor, relative to the target size
    double worst = 0.0;
    for (const auto& t : r.trials) {
      double scale = 1.0;
      for (const auto& c : r.cells)
        if (c.id == t.cell_id) scale += c.target_l1 * c.target_l1;
      worst = std::max(worst, t.failed ? INFINITY : t.l2_error_sq / scale);
    }
    flags.push_back({"zero_error", worst <= 1e-10, false, "max l2 error / (1 + |t*|_1^2) " + fmt(worst)});
  }
  ojson out = rate_result_json(r);
  append_trials(ctx, name, r.trials);
  return out;
}

ojson run_localization(Fields& f, const std::string& path, const std::string& name, std::uint64_t seed, Context& ctx,
                       std::vector<Flag>& flags) {
  RateExperimentConfig cfg = parse_rate_common(f, path, name, seed, ctx);
  cfg.estimators = {Estimator::kRerm};
  double factor = 10.0, error_band = 8.0, min_freq = 0.75;
  if (const json* checks = f.sub("checks")) {
    Fields c(*checks, path + ".checks");
    factor = c.get("factor", factor);
    error_band = c.get("error_band", error_band);
    min_freq = c.get("min_frequency", min_freq);
    c.finish();
  }
  f.finish();
  const RateExperimentResult r = rate_experiment(cfg, ctx.threads);
  const auto loc = localization_check(r, factor, error_band);
  failure_flag(r, flags);
  ojson cells = ojson::array();
  for (std::size_t i = 0; i < loc.size(); ++i) {
    const auto& l = loc[i];
    const double thr = r.cells[i].spec.sigma * std::sqrt(std::log(std::numbers::e * r.cells[i].spec.d) / r.cells[i].spec.N);
    const bool above = r.cells[i].target_l1 >= thr;
    cells.push_back(ojson{{"id", l.id}, {"trials", l.trials}, {"localized", l.localized}, {"error_band", l.error_band},
                          {"adaptation_threshold", thr}, {"above_threshold", above}});
    // cells below the adaptation threshold are report-only
    flags.push_back({"localized_" + l.id, l.localized >= min_freq, !above,
                     "|t_hat|_1 <= " + fmt(factor) + "|t*|_1, frequency " + fmt(l.localized)});
    flags.push_back({"error_band_" + l.id, l.error_band >= min_freq, !above,
                     "|t_hat - t*|^2 <= " + fmt(error_band) + " c0 r^2, frequency " + fmt(l.error_band)});
  }
  ojson out = rate_result_json(r);
  out["localization"] = cells;
  append_trials(ctx, name, r.trials);
  return out;
}

ojson run_small_ball(Fields& f, const std::string& path, const std::string& name, std::uint64_t seed, Context& ctx,
                     std::vector<Flag>& flags) {
  RateExperimentConfig cfg;
  cfg.name = name;
  cfg.seed = seed;
  cfg.sweep = "rho";
  cfg.estimators = {Estimator::kRerm};
  const int N = f.req<int>("N"), d = f.req<int>("d");
  const double sigma = f.req<double>("sigma");
  if (N < 1 || d < 1 || !(sigma >= 0.0)) throw InputError(path + ": invalid N, d or sigma");
  const auto factors = number_list(f.sub("rho_factors"), f.at("rho_factors"), {0.25, 0.5, 1.0, 2.0, 4.0});
  cfg.trials = f.get("trials", cfg.trials);
  cfg.psi_mode = parse_psi(f);
  cfg.psi_points = f.get("psi_points", cfg.psi_points);
  cfg.constants = parse_profile(f.sub("profile"), f.at("profile"), ctx.profile);
  cfg.solver = parse_solver(f.sub("solver"), f.at("solver"));
  cfg.grid = parse_grid(f.sub("grid"), f.at("grid"));
  double spike_band = 8.0;
  if (const json* checks = f.sub("checks")) {
    Fields c(*checks, path + ".checks");
    spike_band = c.get("spike_band", spike_band);
    c.finish();
  }
  f.finish();

  const double thr = sigma * std::sqrt(std::log(std::numbers::e * d) / N);
  cfg.cells.push_back(CellSpec{N, d, sigma, TargetSpec{}});
  for (double k : factors) {
    TargetSpec t;
    t.kind = TargetSpec::Kind::kSpike;
    t.l1_norm = k * thr;
    cfg.cells.push_back(CellSpec{N, d, sigma, t});
  }
  const RateExperimentResult r = rate_experiment(cfg, ctx.threads);
  failure_flag(r, flags);
  ojson rows = ojson::array();
  for (std::size_t i = 0; i < factors.size(); ++i) {
    const auto& c = r.cells[i + 1];
    const double med = c.estimators[0].l2_error_sq.median;
    const double ratio = med / c.rate.value;
    rows.push_back(ojson{{"rho_factor", factors[i]},
                         {"rho", c.target_l1},
                         {"median_error_spike", onum(med)},
                         {"rho_sq", c.target_l1 * c.target_l1},
                         {"minimax_rate", onum(c.rate.value)},
                         {"median_over_rate", onum(ratio)}});
    if (factors[i] == 1.0)
      flags.push_back({"spike_at_threshold_within_rate_band", std::isfinite(ratio) && ratio <= spike_band &&
                                                                  ratio >= 1.0 / spike_band,
                       false, "median/rate = " + fmt(ratio)});
  }
  const double zero_med = r.cells[0].estimators[0].l2_error_sq.median;
  flags.push_back({"small_ball_report", true, true, "impossibility statement; values reported only"});
  ojson out = rate_result_json(r);
  out["small_ball"] = ojson{{"threshold", thr},
                            {"threshold_sq", thr * thr},
                            {"median_error_zero_target", onum(zero_med)},
                            {"spikes", rows}};
  append_trials(ctx, name, r.trials);
  return out;
}

ojson run_rip(Fields& f, const std::string& path, std::uint64_t seed, Context& ctx, std::vector<Flag>& flags) {
  ProblemConfig p;
  p.N = f.req<int>("N");
  p.d = f.req<int>("d");
  p.seed = seed;
  const long long budget = f.get("budget", 200LL);
  f.finish();
  p.validate();
  const double sqrt_n = std::sqrt(static_cast<double>(p.N));
  const Matrix x = sqrt_n * normalize_columns(gen_design(p, ctx.threads) / sqrt_n).design;
  const RipReport rep = rip_check(x, budget, rng::derive_seed(seed, {1}), ctx.threads);
  (void)path;
  flags.push_back({"rip_pass", rep.pass, false, "singular value ratios in [" + fmt(rep.min_ratio) + ", " + fmt(rep.max_ratio) + "]"});
  return ojson{{"s", rep.s},
               {"supports_checked", rep.supports_checked},
               {"exhaustive", rep.exhaustive},
               {"min_ratio", rep.min_ratio},
               {"max_ratio", rep.max_ratio},
               {"pass", rep.pass}};
}

ojson run_fixed_design(Fields& f, const std::string& path, const std::string& name, std::uint64_t seed, Context& ctx,
                       std::vector<Flag>& flags) {
  FixedDesignConfig cfg;
  cfg.name = name;
  cfg.seed = seed;
  cfg.N = f.req<int>("N");
  cfg.d = f.req<int>("d");
  cfg.sigma = f.req<double>("sigma");
  if (cfg.N < 1 || cfg.d < 1) throw InputError(path + ": N and d must be positive");
  if (const json* t = f.sub("target")) cfg.target = parse_target(*t, f.at("target"), cfg.N, cfg.d);
  cfg.trials = f.get("trials", cfg.trials);
  cfg.design_path = f.get<std::string>("design_path", "");
  cfg.rip_budget = f.get("rip_budget", cfg.rip_budget);
  cfg.rip_override = f.get("rip_override", false);
  cfg.constants = parse_profile(f.sub("profile"), f.at("profile"), ctx.profile);
  cfg.pn_constants = parse_profile(f.sub("pn_profile"), f.at("pn_profile"), ConstantsProfile::paper_faithful());
  cfg.rx_samples = f.get("rx_samples", cfg.rx_samples);
  cfg.rx_rel_tol = f.get("rx_rel_tol", cfg.rx_rel_tol);
  cfg.pred_band = f.get("pred_band", cfg.pred_band);
  cfg.solver = parse_solver(f.sub("solver"), f.at("solver"));
  cfg.grid = parse_grid(f.sub("grid"), f.at("grid"));
  double min_freq = 0.75, pn_min = 0.95;
  if (const json* checks = f.sub("checks")) {
    Fields c(*checks, path + ".checks");
    min_freq = c.get("min_frequency", min_freq);
    pn_min = c.get("pn_min_frequency", pn_min);
    c.finish();
  }
  f.finish();
  const FixedDesignResult r = fixed_design_experiment(cfg, ctx.threads);
  int failures = 0;
  for (const auto& t : r.trials) failures += t.failed ? 1 : 0;
  flags.push_back({"estimator_failures_below_20pct", 5 * failures <= cfg.trials, false, std::to_string(failures) + " failed trials"});
  flags.push_back({"pred_error_within_band", r.within_band >= min_freq, false,
                   "pred_error_sq <= " + fmt(cfg.pred_band) + " rbar_X^2, frequency " + fmt(r.within_band)});
  flags.push_back({"bound_on_PN", r.pn_frequency >= pn_min, false, "frequency " + fmt(r.pn_frequency)});
  ojson pn = ojson::array();
  for (const auto& m : r.pn) pn.push_back(ojson{{"sup", m.sup_value}, {"bound", m.bound}, {"holds", m.holds}});
  append_trials(ctx, name, r.trials);
  return ojson{{"rip", ojson{{"s", r.rip.s}, {"supports_checked", r.rip.supports_checked}, {"exhaustive", r.rip.exhaustive},
                             {"min_ratio", r.rip.min_ratio}, {"max_ratio", r.rip.max_ratio}, {"pass", r.rip.pass},
                             {"override", cfg.rip_override}}},
               {"rank", r.rank},
               {"target_l1", r.target_l1},
               {"rbar_X_sq", r.rbar_sq},
               {"r_X", r.r_X},
               {"r_X_converged", r.r_X_converged},
               {"pred_error_sq", quartiles_json(r.pred_error_sq)},
               {"within_band", r.within_band},
               {"pn_frequency", r.pn_frequency},
               {"pn", pn}};
}

ojson run_events(Fields& f, const std::string& path, std::uint64_t seed, Context& ctx, std::vector<Flag>& flags) {
  ojson out = ojson::object();
  if (const json* j = f.sub("isomorphy")) {
    Fields g(*j, path + ".isomorphy");
    ProblemConfig p;
    p.N = g.req<int>("N");
    p.d = g.req<int>("d");
    p.seed = rng::derive_seed(seed, {1});
    const double rho = g.get("rho", 1.0);
    const int trials = g.get("trials", 1000);
    const double min_freq = g.get("min_frequency", 0.99);
    const ConstantsProfile prof = parse_profile(g.sub("profile"), g.at("profile"), ctx.profile);
    g.finish();
    p.validate();
    const double rq = fixed_point_rQ(rho, p.N, p.d, prof, rng::derive_seed(seed, {2}), ctx.threads).r;
    const IsomorphyReport rep = check_isomorphy(gen_design(p, ctx.threads), rho, rq, trials, rng::derive_seed(seed, {3}), ctx.threads);
    flags.push_back({"isomorphy", rep.frequency >= min_freq && !rep.inconclusive, false,
                     "frequency " + fmt(rep.frequency) + " over " + std::to_string(rep.trials) + " directions"});
    out["isomorphy"] = ojson{{"N", p.N}, {"d", p.d}, {"rho", rho}, {"r_Q", rq}, {"trials", rep.trials},
                             {"satisfied", rep.satisfied}, {"exhausted", rep.exhausted}, {"frequency", rep.frequency},
                             {"inconclusive", rep.inconclusive}};
  }
  if (const json* j = f.sub("multiplier")) {
    Fields g(*j, path + ".multiplier");
    const int N = g.req<int>("N"), d = g.req<int>("d");
    const double sigma = g.req<double>("sigma");
    const auto rhos = number_list(g.sub("rho"), g.at("rho"), {1.0});
    const int trials = g.get("trials", 200);
    const double min_freq = g.get("min_frequency", 0.95);
    auto eta_factors = number_list(g.sub("eta_factors"), g.at("eta_factors"), {0.5, 1.0, 2.0});
    const ConstantsProfile prof = parse_profile(g.sub("profile"), g.at("profile"), ConstantsProfile::paper_faithful());
    g.finish();
    if (trials < 1) throw InputError(path + ".multiplier.trials must be positive");
    std::sort(eta_factors.begin(), eta_factors.end());
    if (std::find(eta_factors.begin(), eta_factors.end(), 1.0) == eta_factors.end())
      throw InputError(path + ".multiplier.eta_factors must contain 1");
    // r_M for every (eta factor, rho) on one shared sample set
    const GaussianSampleSet samples(d, prof.mc_samples, rng::derive_seed(seed, {4}), ctx.threads);
    std::vector<std::vector<double>> r(eta_factors.size(), std::vector<double>(rhos.size()));
    for (std::size_t a = 0; a < eta_factors.size(); ++a) {
      ConstantsProfile pa = prof;
      pa.eta = prof.eta * eta_factors[a];
      for (std::size_t b = 0; b < rhos.size(); ++b) r[a][b] = fixed_point_rM(rhos[b], sigma, N, samples, pa).r;
    }
    std::vector<std::vector<int>> holds(eta_factors.size(), std::vector<int>(rhos.size(), 0));
    std::vector<std::vector<char>> per_trial(static_cast<std::size_t>(trials),
                                             std::vector<char>(eta_factors.size() * rhos.size()));
    parallel_for(static_cast<std::size_t>(trials), ctx.threads, [&](std::size_t k) {
      ProblemConfig p;
      p.N = N;
      p.d = d;
      p.seed = rng::derive_seed(seed, {5, k});
      const Matrix x = gen_design(p);
      const Vector xi = gen_response(x, Vector::Zero(d), sigma, p.seed);
      for (std::size_t a = 0; a < eta_factors.size(); ++a)
        for (std::size_t b = 0; b < rhos.size(); ++b)
          per_trial[k][a * rhos.size() + b] = check_multiplier(x, xi, rhos[b], r[a][b]).holds ? 1 : 0;
    });
    for (const auto& row : per_trial)
      for (std::size_t a = 0; a < eta_factors.size(); ++a)
        for (std::size_t b = 0; b < rhos.size(); ++b) holds[a][b] += row[a * rhos.size() + b];
    ojson table = ojson::array();
    bool main_ok = true, monotone = true;
    std::string detail;
    for (std::size_t b = 0; b < rhos.size(); ++b) {
      ojson freqs = ojson::array(), radii = ojson::array();
      for (std::size_t a = 0; a < eta_factors.size(); ++a) {
        const double fr = static_cast<double>(holds[a][b]) / trials;
        freqs.push_back(fr);
        radii.push_back(r[a][b]);
        if (eta_factors[a] == 1.0) {
          main_ok = main_ok && fr >= min_freq;
          detail += (detail.empty() ? "" : " ") + fmt(fr);
        }
        if (a > 0 && holds[a][b] > holds[a - 1][b]) monotone = false;
      }
      table.push_back(ojson{{"rho", rhos[b]}, {"r_M", radii}, {"frequency", freqs}});
    }
    flags.push_back({"multiplier_event", main_ok, false, "frequency per rho: " + detail});
    flags.push_back({"multiplier_monotone_in_eta", monotone, false, "frequency nonincreasing as eta grows"});
    ojson ef = ojson::array();
    for (double e : eta_factors) ef.push_back(e);
    out["multiplier"] = ojson{{"N", N}, {"d", d}, {"sigma", sigma}, {"eta", prof.eta}, {"trials", trials},
                              {"eta_factors", ef}, {"rows", table}};
  }
  if (const json* j = f.sub("decomposition")) {
    Fields g(*j, path + ".decomposition");
    const int instances = g.get("instances", 1000);
    const double tol = g.get("tol", 1e-10);
    g.finish();
    if (instances < 1) throw InputError(path + ".decomposition.instances must be positive");
    const ConstantsProfile prof = ctx.profile;
    std::vector<double> rel(static_cast<std::size_t>(instances));
    parallel_for(rel.size(), ctx.threads, [&](std::size_t i) {
      const rng::CounterStream s(rng::derive_seed(seed, {6, i}), rng::Stream::kTarget);
      double u[3];
      s.uniforms(0, u);
      ProblemConfig p;
      p.N = 5 + static_cast<int>(u[0] * 60);
      p.d = 2 + static_cast<int>(u[1] * 80);
      p.sigma = 2.0 * u[2];
      p.seed = rng::derive_seed(seed, {7, i});
      const Matrix x = gen_design(p);
      Vector t_star(p.d), t(p.d);
      s.normals(1, std::span<double>(t_star.data(), static_cast<std::size_t>(p.d)));
      s.normals(2, std::span<double>(t.data(), static_cast<std::size_t>(p.d)));
      const Vector y = gen_response(x, t_star, p.sigma, p.seed);
      const auto psi_fn = [&](double rho) { return psi(rho, std::max(p.sigma, 0.1), p.N, p.d, prof, PsiMode::kClosed, 0); };
      const LossDecomposition dec = decompose(x, y, t, t_star, psi_fn);
      const double scale = std::abs(dec.quadratic) + std::abs(dec.multiplier) + std::abs(dec.reg_diff);
      rel[i] = std::abs(dec.total - (dec.quadratic + dec.multiplier + dec.reg_diff)) / std::max(scale, 1e-300);
    });
    const double worst = *std::max_element(rel.begin(), rel.end());
    flags.push_back({"decomposition_identity", worst <= tol, false, "max relative gap " + fmt(worst)});
    out["decomposition"] = ojson{{"instances", instances}, {"max_relative_gap", worst}, {"tol", tol}};
  }
  f.finish();
  if (out.empty()) throw InputError(path + ": events experiment needs isomorphy, multiplier or decomposition");
  return out;
}

}  // namespace

json parse_config_text(const std::string& text, const std::string& source) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i + 1 < e.byte && i < text.size(); ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    throw InputError(source + ":" + std::to_string(line) + ":" + std::to_string(col) + ": malformed JSON (" +
                     e.what() + ")");
  }
}

json load_config_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open config " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str(), path);
}

std::string config_hash(const json& config) {
  const std::string s = config.dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

SuiteResult run_suite(const json& config, int threads, const std::set<std::string>& types) {
  if (threads < 1) throw InputError("threads must be at least 1");
  Fields top(config, "config");
  const auto master = top.req<long long>("seed");
  Context ctx;
  ctx.threads = threads;
  ctx.profile = parse_profile(top.sub("profile"), "config.profile", ConstantsProfile::calibrated());
  top.get<std::string>("description", "");
  const json* exps = top.sub("experiments");
  top.finish();
  if (!exps || !exps->is_array() || exps->empty()) throw InputError("config.experiments: expected a nonempty array");

  static const std::set<std::string> known{"rate", "localization", "small_ball", "rip", "fixed_design", "events"};
  SuiteResult result;
  ctx.trials = &result.trials;
  const std::string hash = config_hash(config);
  result.report["tool"] = "minimaxreg";
  result.report["version"] = kToolVersion;
  result.report["config_hash"] = hash;
  result.report["seed"] = master;
  result.report["profile"] = profile_json(ctx.profile);
  result.report["config"] = config;
  ojson experiments = ojson::array();
  std::set<std::string> names;
  int ran = 0;
  for (std::size_t i = 0; i < exps->size(); ++i) {
    const std::string path = "config.experiments[" + std::to_string(i) + "]";
    Fields f((*exps)[i], path);
    const std::string name = f.req<std::string>("name");
    const std::string type = f.req<std::string>("type");
    if (!known.count(type)) throw InputError(path + ".type: unknown experiment type '" + type + "'");
    if (!names.insert(name).second) throw InputError(path + ".name: duplicate experiment name '" + name + "'");
    const std::uint64_t seed = f.has("seed") ? static_cast<std::uint64_t>(f.req<long long>("seed"))
                                             : rng::derive_seed(static_cast<std::uint64_t>(master), {i});
    if (!types.empty() && !types.count(type)) continue;
    ++ran;
    const auto started = std::chrono::steady_clock::now();
    std::vector<Flag> flags;
    ojson body;
    try {
      if (type == "rate") body = run_rate(f, path, name, seed, ctx, flags);
      else if (type == "localization") body = run_localization(f, path, name, seed, ctx, flags);
      else if (type == "small_ball") body = run_small_ball(f, path, name, seed, ctx, flags);
      else if (type == "rip") body = run_rip(f, path, seed, ctx, flags);
      else if (type == "fixed_design") body = run_fixed_design(f, path, name, seed, ctx, flags);
      else body = run_events(f, path, seed, ctx, flags);
    } catch (const InputError& e) {
      // library validation messages don't know where in the config they came from
      const std::string msg = e.what();
      if (msg.rfind("config.", 0) == 0) throw;
      throw InputError(path + ": " + msg);
    }
    result.timings.emplace_back(
        name, std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count());
    bool pass = true;
    for (const auto& fl : flags)
      if (!fl.report_only && !fl.pass) {
        pass = false;
        result.failed_flags.push_back(name + "/" + fl.name);
      }
    result.pass = result.pass && pass;
    ojson e{{"name", name}, {"type", type}, {"seed", seed}};
    for (auto it = body.begin(); it != body.end(); ++it) e[it.key()] = it.value();
    e["flags"] = flags_json(flags);
    e["pass"] = pass;
    experiments.push_back(std::move(e));
  }
  if (ran == 0) throw InputError("config has no experiments of the requested type");
  result.report["experiments"] = experiments;
  result.report["pass"] = result.pass;
  return result;
}

std::string report_text(const SuiteResult& result) { return result.report.dump(2) + "\n"; }

std::string trials_csv(const SuiteResult& result) {
  std::string out = "# minimaxreg " + std::string(kToolVersion) + " config_hash " +
                    result.report.value("config_hash", std::string()) + "\n";
  out += "cell_id,trial,estimator,l2_error_sq,pred_error_sq,l1_norm_hat,wall_time\n";
  char buf[256];
  for (const auto& r : result.trials) {
    std::snprintf(buf, sizeof buf, "%s,%d,%s,%.17g,%.17g,%.17g,%.6f\n", r.cell_id.c_str(), r.trial, r.estimator.c_str(),
                  r.l2_error_sq, r.pred_error_sq, r.l1_norm_hat, r.wall_time);
    out += buf;
  }
  return out;
}

void write_suite_outputs(const SuiteResult& result, const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw InputError("cannot create output directory " + dir + ": " + ec.message());
  const auto write = [&](const std::string& name, const std::string& text) {
    const auto p = std::filesystem::path(dir) / name;
    std::ofstream out(p, std::ios::binary);
    out << text;
    if (!out) throw InputError("cannot write " + p.string());
  };
  write("report.json", report_text(result));
  write("trials.csv", trials_csv(result));
}

}  // namespace minimax
