#include "minimax/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <map>
#include <memory>
#include <numbers>

#include "minimax/errors.hpp"
#include "minimax/image_support.hpp"
#include "minimax/parallel.hpp"
#include "minimax/rng.hpp"

namespace minimax {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr int kDirectionAttempts = 100;

}  // namespace

LossDecomposition decompose(const Matrix& design, const Vector& responses, const Vector& t, const Vector& t_star,
                            const std::function<double(double)>& psi_fn) {
  if (responses.size() != design.rows() || t.size() != design.cols() || t_star.size() != design.cols())
    throw InputError("decompose: inconsistent shapes");
  const double n = static_cast<double>(design.rows());
  const Vector x_delta = design * (t - t_star);
  const Vector xi = responses - design * t_star;
  LossDecomposition out;
  out.quadratic = x_delta.squaredNorm() / n;
  out.multiplier = -2.0 / n * xi.dot(x_delta);
  out.reg_diff = psi_fn(t.lpNorm<1>()) - psi_fn(t_star.lpNorm<1>());
  out.total = ((responses - design * t).squaredNorm() - xi.squaredNorm()) / n + out.reg_diff;
  return out;
}

IsomorphyReport check_isomorphy(const Matrix& design, double rho, double r_q, int trials, std::uint64_t seed,
                                int threads) {
  if (trials < 1) throw InputError("check_isomorphy: trials must be positive");
  if (!(rho >= 0.0) || !(r_q >= 0.0)) throw InputError("check_isomorphy: rho and r_q must be nonnegative");
  const int d = static_cast<int>(design.cols());
  const double n = static_cast<double>(design.rows());
  // the ratio is scale free, so the floor only matters for feasibility in rho*B_1
  const double radius = std::max(r_q, 1e-6 * rho);
  const rng::CounterStream stream(seed, rng::Stream::kDirection);
  std::vector<signed char> outcome(static_cast<std::size_t>(trials), -1);
  parallel_for(outcome.size(), threads, [&](std::size_t k) {
    Vector u(d);
    for (int a = 0; a < kDirectionAttempts; ++a) {
      stream.normals(k * kDirectionAttempts + static_cast<std::size_t>(a), std::span<double>(u.data(), static_cast<std::size_t>(d)));
      u *= radius / u.norm();
      if (!(radius > 0.0) || u.lpNorm<1>() > rho) continue;
      const double ratio = (design * u).squaredNorm() / n / u.squaredNorm();
      outcome[k] = (ratio >= 0.5 && ratio <= 1.5) ? 1 : 0;
      return;
    }
  });
  IsomorphyReport rep;
  rep.trials = trials;
  for (signed char o : outcome) {
    if (o < 0) ++rep.exhausted;
    if (o == 1) ++rep.satisfied;
  }
  rep.frequency = static_cast<double>(rep.satisfied) / trials;
  rep.inconclusive = 2 * rep.exhausted > trials;
  return rep;
}

MultiplierCheck check_multiplier(const Matrix& design, const Vector& xi, double rho, double r) {
  if (xi.size() != design.rows()) throw InputError("check_multiplier: xi has wrong length");
  if (!(rho >= 0.0) || !(r >= 0.0)) throw InputError("check_multiplier: rho and r must be nonnegative");
  MultiplierCheck out;
  const Vector b = design.transpose() * xi;
  out.sup_value = 2.0 / static_cast<double>(design.rows()) * support_l1l2(b, rho, r);
  out.bound = 0.25 * r * r;
  out.holds = out.sup_value <= out.bound;
  return out;
}

const char* estimator_name(Estimator e) {
  switch (e) {
    case Estimator::kOracleErm: return "oracle_erm";
    case Estimator::kRerm: return "rerm";
    case Estimator::kLasso: return "lasso";
  }
  return "?";
}

Estimator estimator_from_name(const std::string& name) {
  if (name == "oracle_erm") return Estimator::kOracleErm;
  if (name == "rerm") return Estimator::kRerm;
  if (name == "lasso") return Estimator::kLasso;
  throw InputError("unknown estimator '" + name + "' (oracle_erm, rerm, lasso)");
}

void RateExperimentConfig::validate() const {
  if (cells.empty()) throw InputError(name + ": no cells");
  if (estimators.empty()) throw InputError(name + ": no estimators");
  if (trials < 1) throw InputError(name + ": trials must be positive");
  if (sweep != "N" && sweep != "d" && sweep != "sigma" && sweep != "rho")
    throw InputError(name + ": sweep must be N, d, sigma or rho");
  if (psi_points < 2) throw InputError(name + ": psi_points must be at least 2");
  if (!(lasso_scale >= 0.0)) throw InputError(name + ": lasso_scale must be nonnegative");
  constants.validate();
  solver.validate();
  for (const auto& c : cells) {
    ProblemConfig p;
    p.N = c.N;
    p.d = c.d;
    p.sigma = c.sigma;
    p.target = c.target;
    p.validate();
  }
}

Quartiles quartiles(std::vector<double> v) {
  Quartiles q{kNaN, kNaN, kNaN};
  if (v.empty()) return q;
  std::sort(v.begin(), v.end());
  auto at = [&](double p) {
    const double pos = p * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
  };
  q.q1 = at(0.25);
  q.median = at(0.5);
  q.q3 = at(0.75);
  return q;
}

const EstimatorSummary* CellReport::find(const std::string& estimator) const {
  for (const auto& e : estimators)
    if (e.estimator == estimator) return &e;
  return nullptr;
}

SlopeFit fit_slope(const std::vector<double>& x, const std::vector<double>& y) {
  SlopeFit f;
  f.cells = static_cast<int>(x.size());
  if (x.size() != y.size() || x.size() < 2) return f;
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (!(sxx > 0.0)) return f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  double rss = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double e = y[i] - f.intercept - f.slope * x[i];
    rss += e * e;
  }
  f.std_error = x.size() > 2 ? std::sqrt(rss / (n - 2.0) / sxx) : kNaN;
  f.valid = x.size() >= 3;
  return f;
}

const SlopeFit* RateExperimentResult::slope(const std::string& estimator) const {
  for (const auto& [name, fit] : slopes)
    if (name == estimator) return &fit;
  return nullptr;
}

std::function<double(double)> cell_psi(const CellSpec& cell, const ConstantsProfile& constants, PsiMode mode,
                                       int points, std::uint64_t seed, int threads) {
  if (mode == PsiMode::kClosed) {
    return [cell, constants](double rho) {
      return psi(rho, cell.sigma, cell.N, cell.d, constants, PsiMode::kClosed, 0);
    };
  }
  // The grid spans the kinks of r(rho): from well below sigma sqrt(log(ed)/N)
  // to past the r_M plateau at about sigma d / sqrt N.
  const double n = cell.N, dd = cell.d;
  const double lo = cell.sigma > 0.0 ? std::max(cell.sigma * std::sqrt(std::log(std::numbers::e * dd) / n) / 100.0, 1e-8)
                                     : 1e-4;
  const double hi = std::max(10.0 * std::max(cell.sigma * dd / std::sqrt(n), 1.0), 100.0 * lo);
  const ComplexityProfile prof =
      complexity_profile(cell.N, cell.d, cell.sigma, log_grid(lo, hi, points), constants, mode, seed, threads);
  auto table = std::make_shared<const TabulatedPsi>(TabulatedPsi::from_profile(prof));
  return [table](double rho) { return (*table)(rho); };
}

RateExperimentResult rate_experiment(const RateExperimentConfig& cfg, int threads) {
  cfg.validate();
  RateExperimentResult out;
  const std::size_t n_cells = cfg.cells.size();
  std::vector<std::function<double(double)>> psis(n_cells);
  for (std::size_t c = 0; c < n_cells; ++c) {
    const CellSpec& spec = cfg.cells[c];
    CellReport rep;
    rep.id = "c" + std::to_string(c);
    rep.spec = spec;
    rep.target_l1 = spec.target.norm();
    rep.sweep_value = cfg.sweep == "N" ? spec.N : cfg.sweep == "d" ? spec.d : cfg.sweep == "sigma" ? spec.sigma : rep.target_l1;
    rep.rate = minimax_rate(rep.target_l1, spec.sigma, spec.N, spec.d, cfg.constants);
    rep.trials = cfg.trials;
    psis[c] = cell_psi(spec, cfg.constants, cfg.psi_mode, cfg.psi_points, rng::derive_seed(cfg.seed, {c, 0x505349}),
                       threads);
    rep.psi_at_target = psis[c](rep.target_l1);
    out.cells.push_back(std::move(rep));
  }

  const std::size_t n_est = cfg.estimators.size();
  const std::size_t tasks = n_cells * static_cast<std::size_t>(cfg.trials);
  std::vector<TrialRecord> records(tasks * n_est);
  parallel_for(tasks, threads, [&](std::size_t task) {
    const std::size_t c = task / static_cast<std::size_t>(cfg.trials);
    const int k = static_cast<int>(task % static_cast<std::size_t>(cfg.trials));
    const CellSpec& spec = cfg.cells[c];
    ProblemConfig p;
    p.N = spec.N;
    p.d = spec.d;
    p.sigma = spec.sigma;
    p.target = spec.target;
    p.seed = rng::derive_seed(cfg.seed, {c, static_cast<std::uint64_t>(k)});
    const Dataset ds = gen_dataset(p);
    const Vector& t_star = *ds.t_star;
    for (std::size_t e = 0; e < n_est; ++e) {
      TrialRecord& r = records[task * n_est + e];
      r.cell_id = out.cells[c].id;
      r.trial = k;
      r.trial_seed = p.seed;
      r.estimator = estimator_name(cfg.estimators[e]);
      const auto start = std::chrono::steady_clock::now();
      try {
        EstimationResult est;
        switch (cfg.estimators[e]) {
          case Estimator::kOracleErm: est = constrained_erm(ds, out.cells[c].target_l1, cfg.solver); break;
          case Estimator::kRerm: est = rerm(ds, psis[c], cfg.grid, cfg.solver); break;
          case Estimator::kLasso:
            est = lasso(ds, cfg.lasso_scale * lasso_default_lambda(spec.sigma, spec.N, spec.d), cfg.solver);
            break;
        }
        const Vector diff = est.t_hat - t_star;
        r.l2_error_sq = diff.squaredNorm();
        r.pred_error_sq = (ds.design * diff).squaredNorm() / spec.N;
        r.l1_norm_hat = est.l1_norm;
        r.converged = est.converged;
        if (!std::isfinite(r.l2_error_sq) || !std::isfinite(r.pred_error_sq)) throw SolverError("non-finite error");
      } catch (const std::exception&) {
        r.failed = true;
        r.converged = false;
        r.l2_error_sq = r.pred_error_sq = r.l1_norm_hat = kNaN;
      }
      r.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    }
  });

  for (std::size_t c = 0; c < n_cells; ++c) {
    for (std::size_t e = 0; e < n_est; ++e) {
      EstimatorSummary s;
      s.estimator = estimator_name(cfg.estimators[e]);
      std::vector<double> l2, pred;
      for (int k = 0; k < cfg.trials; ++k) {
        const TrialRecord& r = records[(c * static_cast<std::size_t>(cfg.trials) + static_cast<std::size_t>(k)) * n_est + e];
        if (r.failed) {
          ++s.failures;
          continue;
        }
        if (!r.converged) ++s.nonconverged;
        l2.push_back(r.l2_error_sq);
        pred.push_back(r.pred_error_sq);
      }
      s.l2_error_sq = quartiles(l2);
      s.pred_error_sq = quartiles(pred);
      s.flagged = 5 * s.failures > cfg.trials;
      const double rate = out.cells[c].rate.value;
      s.median_over_rate = rate > 0.0 ? s.l2_error_sq.median / rate : kNaN;
      out.cells[c].estimators.push_back(s);
    }
  }

  // Slope of log median error against log sweep value over the cells that
  // share the most common rate-table branch.
  for (std::size_t e = 0; e < n_est; ++e) {
    const std::string name = estimator_name(cfg.estimators[e]);
    std::map<int, int> count;
    for (const auto& cell : out.cells) {
      const double m = cell.estimators[e].l2_error_sq.median;
      if (m > 0.0 && std::isfinite(m) && cell.sweep_value > 0.0) ++count[cell.rate.branch];
    }
    SlopeFit fit;
    if (!count.empty()) {
      int branch = count.begin()->first;
      for (const auto& [b, k] : count)
        if (k > count[branch]) branch = b;
      std::vector<double> x, y;
      for (const auto& cell : out.cells) {
        const double m = cell.estimators[e].l2_error_sq.median;
        if (m > 0.0 && std::isfinite(m) && cell.sweep_value > 0.0 && cell.rate.branch == branch) {
          x.push_back(std::log(cell.sweep_value));
          y.push_back(std::log(m));
        }
      }
      fit = fit_slope(x, y);
      fit.branch = branch;
    }
    out.slopes.emplace_back(name, fit);
  }
  out.trials = std::move(records);
  return out;
}

std::vector<LocalizationCell> localization_check(const RateExperimentResult& result, double factor, double band) {
  std::vector<LocalizationCell> out;
  for (const auto& cell : result.cells) {
    LocalizationCell lc;
    lc.id = cell.id;
    int loc = 0, inside = 0;
    for (const auto& r : result.trials) {
      if (r.cell_id != cell.id || r.estimator != "rerm" || r.failed) continue;
      ++lc.trials;
      if (r.l1_norm_hat <= factor * cell.target_l1) ++loc;
      if (r.l2_error_sq <= band * cell.psi_at_target) ++inside;
    }
    if (lc.trials > 0) {
      lc.localized = static_cast<double>(loc) / lc.trials;
      lc.error_band = static_cast<double>(inside) / lc.trials;
    }
    out.push_back(lc);
  }
  return out;
}

void FixedDesignConfig::validate() const {
  ProblemConfig p;
  p.N = N;
  p.d = d;
  p.sigma = sigma;
  p.target = target;
  p.validate();
  if (trials < 1) throw InputError(name + ": trials must be positive");
  if (rip_budget < 1) throw InputError(name + ": rip_budget must be positive");
  if (rx_samples < 1) throw InputError(name + ": rx_samples must be positive");
  if (!(rx_rel_tol > 0.0)) throw InputError(name + ": rx_rel_tol must be positive");
  if (!(pred_band > 0.0)) throw InputError(name + ": pred_band must be positive");
  constants.validate();
  pn_constants.validate();
  solver.validate();
}

FixedDesignResult fixed_design_experiment(const FixedDesignConfig& cfg, int threads) {
  cfg.validate();
  const double sqrt_n = std::sqrt(static_cast<double>(cfg.N));
  ProblemConfig p;
  p.N = cfg.N;
  p.d = cfg.d;
  p.sigma = cfg.sigma;
  p.seed = cfg.seed;
  if (!cfg.design_path.empty()) {
    p.design_kind = DesignKind::kFixed;
    p.design_path = cfg.design_path;
  }
  const Matrix a = normalize_columns(gen_design(p, threads) / sqrt_n).design;
  const Matrix x = sqrt_n * a;

  FixedDesignResult out;
  out.rip = rip_check(x, cfg.rip_budget, rng::derive_seed(cfg.seed, {1}), threads);
  if (!out.rip.pass && !cfg.rip_override)
    throw InputError(cfg.name + ": design fails the RIP check (singular value ratios in [" +
                     std::to_string(out.rip.min_ratio) + ", " + std::to_string(out.rip.max_ratio) +
                     "], need [0.5, 1.5]); set rip_override to run anyway");
  out.rank = numerical_rank(a);
  const Vector t_star = gen_target(cfg.target, cfg.d, rng::derive_seed(cfg.seed, {2}));
  out.target_l1 = t_star.lpNorm<1>();
  const auto psi_fn = [&](double rho) {
    const double rb = rbar_X(rho, cfg.N, cfg.d, out.rank, cfg.sigma, cfg.constants);
    return cfg.constants.c0_prime * rb * rb;
  };
  const double rb = rbar_X(out.target_l1, cfg.N, cfg.d, out.rank, cfg.sigma, cfg.constants);
  out.rbar_sq = rb * rb;

  ConstantsProfile pn = cfg.pn_constants;
  pn.mc_samples = cfg.rx_samples;
  pn.bisect_rel_tol = cfg.rx_rel_tol;
  const FixedPointResult rx = fixed_point_rX(out.target_l1, a, cfg.sigma, pn, rng::derive_seed(cfg.seed, {4}),
                                             cfg.solver, threads);
  out.r_X = rx.r;
  out.r_X_converged = rx.converged;

  const ImageSupport support(a);
  out.trials.resize(static_cast<std::size_t>(cfg.trials));
  out.pn.resize(out.trials.size());
  parallel_for(out.trials.size(), threads, [&](std::size_t k) {
    Dataset ds;
    ds.design = x;
    ds.sigma_known = cfg.sigma;
    const std::uint64_t seed = rng::derive_seed(cfg.seed, {3, k});
    ds.responses = gen_response(x, t_star, cfg.sigma, seed);
    const Vector xi = ds.responses - x * t_star;
    TrialRecord& r = out.trials[k];
    r.cell_id = "c0";
    r.trial = static_cast<int>(k);
    r.trial_seed = seed;
    r.estimator = "rerm";
    const auto start = std::chrono::steady_clock::now();
    try {
      const EstimationResult est = rerm(ds, psi_fn, cfg.grid, cfg.solver);
      const Vector diff = est.t_hat - t_star;
      r.l2_error_sq = diff.squaredNorm();
      r.pred_error_sq = (a * diff).squaredNorm();
      r.l1_norm_hat = est.l1_norm;
      r.converged = est.converged;
    } catch (const std::exception&) {
      r.failed = true;
      r.converged = false;
      r.l2_error_sq = r.pred_error_sq = r.l1_norm_hat = kNaN;
    }
    r.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    MultiplierCheck& m = out.pn[k];
    m.bound = 0.5 * out.r_X * out.r_X;
    m.sup_value = out.r_X > 0.0 ? 2.0 / sqrt_n * support.evaluate(xi, out.target_l1, out.r_X, cfg.solver).value : 0.0;
    m.holds = m.sup_value <= m.bound;
  });

  std::vector<double> pred;
  int within = 0, pn_ok = 0;
  for (std::size_t k = 0; k < out.trials.size(); ++k) {
    if (out.pn[k].holds) ++pn_ok;
    if (out.trials[k].failed) continue;
    pred.push_back(out.trials[k].pred_error_sq);
    if (out.trials[k].pred_error_sq <= cfg.pred_band * out.rbar_sq) ++within;
  }
  out.pred_error_sq = quartiles(pred);
  out.within_band = static_cast<double>(within) / cfg.trials;
  out.pn_frequency = static_cast<double>(pn_ok) / cfg.trials;
  return out;
}

}  // namespace minimax
