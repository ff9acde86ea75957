#include "minimax/complexity.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <string>

#include "minimax/errors.hpp"
#include "minimax/image_support.hpp"
#include "minimax/parallel.hpp"
#include "minimax/rng.hpp"

namespace minimax {

namespace {

constexpr int kBracketDoublings = 50;

void require_nonneg(double v, const char* what) {
  if (!std::isfinite(v) || v < 0.0) throw InputError(std::string(what) + " must be a finite nonnegative number");
}

void require_dims(int N, int d) {
  if (N < 1 || d < 1) throw InputError("N and d must be positive");
}

// log d with the d = 1 convention used by the branch tests.
double log_d(int d) { return std::log(static_cast<double>(std::max(d, 2))); }

struct BisectOutcome {
  double lo = 0.0;
  double hi = 0.0;
  int evaluations = 0;
};

// `excess(r) > 0` means the fixed-point inequality fails at r; excess is
// decreasing in r. Returns a bracket lo < r* <= hi with hi/lo - 1 <= rel_tol,
// bisecting in log r since r* can sit many decades below the initial hi.
BisectOutcome bisect_fixed_point(const std::function<double(double)>& excess, double hi, double rel_tol,
                                 const char* what) {
  BisectOutcome out;
  double f_hi = excess(hi);
  ++out.evaluations;
  for (int k = 0; k < kBracketDoublings && f_hi > 0.0; ++k) {
    hi *= 2.0;
    f_hi = excess(hi);
    ++out.evaluations;
  }
  if (f_hi > 0.0)
    throw SolverError(std::string(what) + ": bracket expansion failed, excess " + std::to_string(f_hi) +
                      " at r = " + std::to_string(hi));
  double lo = hi * 1e-12;
  const double f_lo = excess(lo);
  ++out.evaluations;
  if (f_lo <= 0.0) {
    out.lo = 0.0;
    out.hi = lo;
    return out;
  }
  while (hi / lo - 1.0 > rel_tol) {
    const double mid = std::sqrt(lo * hi);
    if (excess(mid) > 0.0) lo = mid;
    else hi = mid;
    ++out.evaluations;
  }
  out.lo = lo;
  out.hi = hi;
  return out;
}

}  // namespace

void ConstantsProfile::validate() const {
  auto pos = [](double v, const char* what) {
    if (!(v > 0.0) || !std::isfinite(v)) throw InputError(std::string(what) + " must be positive");
  };
  pos(Q, "Q");
  pos(eta, "eta");
  pos(c0, "c0");
  pos(eta_prime, "eta_prime");
  pos(c0_prime, "c0_prime");
  pos(C_M, "C_M");
  pos(C_Q, "C_Q");
  pos(C_X, "C_X");
  pos(bisect_rel_tol, "bisect_rel_tol");
  if (Q > 1.0) throw InputError("Q must lie in (0, 1]");
  if (eta >= 1.0) throw InputError("eta must lie in (0, 1)");
  if (eta_prime >= 1.0) throw InputError("eta_prime must lie in (0, 1)");
  if (!(zeta > 0.0 && zeta < 1.0)) throw InputError("zeta must lie in (0, 1)");
  if (!(zeta_prime > 1.0) || !std::isfinite(zeta_prime)) throw InputError("zeta_prime must exceed 1");
  if (mc_samples < 2) throw InputError("mc_samples must be at least 2");
}

ConstantsProfile ConstantsProfile::paper_faithful() {
  ConstantsProfile p;
  p.name = "paper-faithful";
  p.eta = 1.0 / (16.0 * std::numbers::sqrt2);
  p.c0 = 14.0;
  return p;
}

ConstantsProfile ConstantsProfile::calibrated() { return ConstantsProfile{}; }

ConstantsProfile ConstantsProfile::by_name(const std::string& name) {
  if (name == "paper" || name == "paper-faithful") return paper_faithful();
  if (name == "calibrated") return calibrated();
  throw InputError("unknown constants profile '" + name + "' (expected paper-faithful or calibrated)");
}

const char* method_name(FixedPointMethod m) { return m == FixedPointMethod::kMonteCarlo ? "mc" : "closed"; }

FixedPointResult fixed_point_rM(double rho, double sigma, int N, const GaussianSampleSet& samples,
                                const ConstantsProfile& constants) {
  require_nonneg(rho, "rho");
  require_nonneg(sigma, "sigma");
  require_dims(N, samples.dim());
  constants.validate();
  FixedPointResult res;
  res.rho = rho;
  if (rho == 0.0 || sigma == 0.0) return res;
  const double sqrt_n = std::sqrt(static_cast<double>(N));
  const double d = static_cast<double>(samples.dim());
  // sigma*w(r)/r is nonincreasing (w is concave with w(0) = 0), so the
  // difference below changes sign once.
  auto excess = [&](double r) { return sigma * samples.width(rho, r).value / r - constants.eta * sqrt_n * r; };
  const BisectOutcome b =
      bisect_fixed_point(excess, 2.0 * sigma * std::sqrt(d) / (constants.eta * sqrt_n), constants.bisect_rel_tol,
                         "fixed_point_rM");
  res.lo = b.lo;
  res.hi = b.hi;
  res.r = b.hi;
  res.evaluations = b.evaluations;
  const WidthEstimate w = samples.width(rho, res.r);
  res.width_at_r = w.value;
  res.width_stderr = w.std_error;
  return res;
}

FixedPointResult fixed_point_rM(double rho, double sigma, int N, int d, const ConstantsProfile& constants,
                                std::uint64_t seed, int threads) {
  require_dims(N, d);
  if (rho == 0.0 || sigma == 0.0) {
    require_nonneg(rho, "rho");
    require_nonneg(sigma, "sigma");
    FixedPointResult res;
    res.rho = rho;
    return res;
  }
  const GaussianSampleSet samples(d, constants.mc_samples, seed, threads);
  return fixed_point_rM(rho, sigma, N, samples, constants);
}

FixedPointResult fixed_point_rQ(double rho, int N, const GaussianSampleSet& samples,
                                const ConstantsProfile& constants) {
  require_nonneg(rho, "rho");
  require_dims(N, samples.dim());
  constants.validate();
  FixedPointResult res;
  res.rho = rho;
  if (rho == 0.0) return res;
  const double level = constants.Q * std::sqrt(static_cast<double>(N));
  // As r -> 0 the localized width is r*E|G|_2, so r_Q = 0 iff E|G|_2 <= Q sqrt N.
  const WidthEstimate l2 = samples.l2_mean();
  if (l2.value <= level) {
    res.width_stderr = 0.0;
    return res;
  }
  auto excess = [&](double r) { return samples.width(rho, r).value / r - level; };
  const double hi = 2.0 * rho * samples.linf_mean().value / level;
  const BisectOutcome b = bisect_fixed_point(excess, hi, constants.bisect_rel_tol, "fixed_point_rQ");
  res.lo = b.lo;
  res.hi = b.hi;
  res.r = b.hi;
  res.evaluations = b.evaluations + 1;
  const WidthEstimate w = samples.width(rho, res.r);
  res.width_at_r = w.value;
  res.width_stderr = w.std_error;
  return res;
}

FixedPointResult fixed_point_rQ(double rho, int N, int d, const ConstantsProfile& constants, std::uint64_t seed,
                                int threads) {
  require_dims(N, d);
  const GaussianSampleSet samples(d, constants.mc_samples, seed, threads);
  return fixed_point_rQ(rho, N, samples, constants);
}

double closed_rM(double rho, double sigma, int N, int d, const ConstantsProfile& constants) {
  require_nonneg(rho, "rho");
  require_nonneg(sigma, "sigma");
  require_dims(N, d);
  if (rho == 0.0 || sigma == 0.0) return 0.0;
  const double n = static_cast<double>(N);
  const double dd = static_cast<double>(d);
  const double s2 = sigma * sigma;
  const double rho2n = rho * rho * n;
  double sq = 0.0;
  if (rho2n >= s2 * dd * dd) {
    sq = s2 * dd / n;
  } else if (rho2n >= s2 * log_d(d)) {
    sq = rho * sigma * std::sqrt(std::log(std::numbers::e * sigma * dd / (rho * std::sqrt(n))) / n);
  } else {
    sq = rho * sigma * std::sqrt(std::log(std::numbers::e * dd) / n);
  }
  return std::sqrt(constants.C_M * sq);
}

bool in_transition_band(int N, int d, const ConstantsProfile& constants) {
  const double n = static_cast<double>(N);
  return n > constants.zeta * d && n < constants.zeta_prime * d;
}

double closed_rQ(double rho, int N, int d, const ConstantsProfile& constants) {
  require_nonneg(rho, "rho");
  require_dims(N, d);
  const double n = static_cast<double>(N);
  if (n >= constants.zeta_prime * d || rho == 0.0) return 0.0;
  const double lg = std::log(std::max(std::numbers::e * d / n, std::numbers::e));
  return std::sqrt(constants.C_Q * rho * rho * lg / n);
}

double psi(double rho, double sigma, int N, int d, const ConstantsProfile& constants, PsiMode mode,
           std::uint64_t seed) {
  require_nonneg(rho, "rho");
  double r = 0.0;
  if (mode == PsiMode::kClosed) {
    r = std::max(closed_rM(rho, sigma, N, d, constants), closed_rQ(rho, N, d, constants));
  } else {
    if (rho == 0.0) return 0.0;
    const GaussianSampleSet samples(d, constants.mc_samples, seed);
    r = std::max(fixed_point_rM(rho, sigma, N, samples, constants).r, fixed_point_rQ(rho, N, samples, constants).r);
  }
  return constants.c0 * r * r;
}

RateValue minimax_rate(double rho, double sigma, int N, int d, const ConstantsProfile& constants) {
  require_nonneg(rho, "rho");
  require_nonneg(sigma, "sigma");
  require_dims(N, d);
  RateValue out;
  const double n = static_cast<double>(N);
  const double dd = static_cast<double>(d);
  const double s2 = sigma * sigma;
  const double rho2 = rho * rho;
  const double lgd = log_d(d);
  if (rho == 0.0) return out;
  if (n <= lgd) {
    out.value = rho2;
    return out;
  }
  if (rho2 * n <= s2 * lgd) {
    out.value = rho2;
    return out;
  }
  auto middle = [&] {
    return constants.C_M * rho * sigma * std::sqrt(std::log(std::numbers::e * dd * dd * s2 / (rho2 * n)) / n);
  };
  if (n >= constants.zeta_prime * dd) {
    if (rho2 * n <= s2 * dd * dd) {
      out.value = middle();
      out.branch = 1;
    } else {
      out.value = constants.C_M * s2 * dd / n;
      out.branch = 2;
    }
    return out;
  }
  out.upper_bound_only = in_transition_band(N, d, constants);
  const double lg = std::log(std::max(std::numbers::e * dd / n, std::numbers::e));
  if (rho2 * n <= s2 * n * n / lg) {
    out.value = middle();
    out.branch = 1;
  } else {
    out.value = constants.C_Q * rho2 * lg / n;
    out.branch = 2;
  }
  return out;
}

double closed_rate_envelope(double rho, double sigma, int N, int d, const ConstantsProfile& constants) {
  const double r = std::max(closed_rM(rho, sigma, N, d, constants), closed_rQ(rho, N, d, constants));
  return std::min(r * r, rho * rho);
}

DerivedRadii derived_radii(double sigma, int N, int d, double t_star_l1, const ConstantsProfile& constants) {
  require_nonneg(sigma, "sigma");
  require_nonneg(t_star_l1, "t_star_l1");
  require_dims(N, d);
  constants.validate();
  DerivedRadii out;
  out.r0 = sigma / constants.eta * std::sqrt(static_cast<double>(d) / N);
  out.rho0 = out.r0 * std::sqrt(static_cast<double>(d));
  // The ratio C_M^(2)/C_M^(1) is 1 for a scalar C_M.
  out.rho_star = std::max(10.0, 8.0 / constants.eta + 1.0) * t_star_l1;
  if (out.rho_star >= 2.0 * out.rho0) {
    out.K0 = 0;
  } else if (out.rho_star == 0.0) {
    out.K0 = -1;
  } else {
    int k = 0;
    double v = out.rho_star;
    while (v < 2.0 * out.rho0) {
      v *= 2.0;
      ++k;
    }
    out.K0 = k;
  }
  return out;
}

void require_unit_columns(const Matrix& design) {
  for (Eigen::Index j = 0; j < design.cols(); ++j) {
    if (design.col(j).norm() > 1.0 + 1e-12)
      throw InputError("design column " + std::to_string(j) +
                       " has l2 norm above 1; normalize the columns (normalize_columns) first");
  }
}

double rbar_X(double rho, int N, int d, int rank, double sigma, const ConstantsProfile& constants) {
  require_nonneg(rho, "rho");
  require_nonneg(sigma, "sigma");
  require_dims(N, d);
  if (rho == 0.0 || sigma == 0.0) return 0.0;
  const double n = static_cast<double>(N);
  const double dd = static_cast<double>(d);
  double best = sigma * sigma * rank / n;
  const double arg = std::numbers::e * sigma * dd / (rho * std::sqrt(n));
  if (arg > 1.0) best = std::min(best, rho * sigma * std::sqrt(std::log(arg) / n));
  best = std::min(best, rho * sigma * std::sqrt(std::log(std::numbers::e * dd) / n));
  return std::sqrt(constants.C_X * best);
}

double rbar_X(double rho, const Matrix& design, double sigma, const ConstantsProfile& constants) {
  require_unit_columns(design);
  return rbar_X(rho, static_cast<int>(design.rows()), static_cast<int>(design.cols()), numerical_rank(design), sigma,
                constants);
}

FixedPointResult fixed_point_rX(double rho, const Matrix& design, double sigma, const ConstantsProfile& constants,
                                std::uint64_t seed, const SolverOptions& opts, int threads) {
  require_nonneg(rho, "rho");
  require_nonneg(sigma, "sigma");
  require_unit_columns(design);
  constants.validate();
  opts.validate();
  FixedPointResult res;
  res.rho = rho;
  if (rho == 0.0 || sigma == 0.0) return res;
  const int N = static_cast<int>(design.rows());
  const double sqrt_n = std::sqrt(static_cast<double>(N));
  const ImageSupport support(design);
  const auto S = static_cast<std::size_t>(constants.mc_samples);
  std::vector<Vector> dual(S);
  parallel_for(S, threads, [&](std::size_t i) {
    dual[i] = design.transpose() * gaussian_sample(N, seed, i);
  });
  bool last_converged = true;
  auto width = [&](double r) {
    std::vector<double> vals(S);
    std::vector<char> ok(S, 1);
    parallel_for(S, threads, [&](std::size_t i) {
      const FlaggedValue v = support.evaluate_dual(dual[i], rho, r, opts);
      vals[i] = v.value;
      ok[i] = v.converged ? 1 : 0;
    });
    last_converged = std::find(ok.begin(), ok.end(), 0) == ok.end();
    return summarize_samples(vals);
  };
  auto excess = [&](double r) { return sigma * width(r).value / r - constants.eta_prime * sqrt_n * r; };
  // w(r) <= r * E|g|_2 <= r sqrt N gives the initial upper bracket.
  const BisectOutcome b = bisect_fixed_point(excess, 2.0 * sigma / constants.eta_prime, constants.bisect_rel_tol,
                                             "fixed_point_rX");
  res.lo = b.lo;
  res.hi = b.hi;
  res.r = b.hi;
  res.evaluations = b.evaluations;
  const WidthEstimate w = width(res.r);
  res.width_at_r = w.value;
  res.width_stderr = w.std_error;
  // Only the solves at the returned radius decide the flag; evaluations at
  // the extreme ends of the bracket are allowed to be rough.
  res.converged = last_converged;
  return res;
}

double gelfand_theoretical(double rho, int N, int d) {
  require_nonneg(rho, "rho");
  require_dims(N, d);
  const double n = static_cast<double>(N);
  const double lg = std::log(std::max(std::numbers::e * d / n, std::numbers::e));
  return rho * std::min(1.0, std::sqrt(lg / n));
}

double gelfand_theoretical_sq(double rho, int N, int d) {
  const double g = gelfand_theoretical(rho, N, d);
  return g * g;
}

std::vector<double> log_grid(double lo, double hi, int n) {
  if (!(lo > 0.0) || !(hi >= lo) || n < 1) throw InputError("log_grid: need 0 < lo <= hi and n >= 1");
  std::vector<double> out(static_cast<std::size_t>(n));
  if (n == 1) {
    out[0] = lo;
    return out;
  }
  const double a = std::log(lo), b = std::log(hi);
  for (int i = 0; i < n; ++i) out[static_cast<std::size_t>(i)] = std::exp(a + (b - a) * i / (n - 1));
  out.front() = lo;
  out.back() = hi;
  return out;
}

ComplexityProfile complexity_profile(int N, int d, double sigma, const std::vector<double>& rho_grid,
                                     const ConstantsProfile& constants, PsiMode mode, std::uint64_t seed,
                                     int threads) {
  require_dims(N, d);
  require_nonneg(sigma, "sigma");
  constants.validate();
  for (std::size_t i = 0; i < rho_grid.size(); ++i) {
    require_nonneg(rho_grid[i], "rho");
    if (i > 0 && !(rho_grid[i] > rho_grid[i - 1])) throw InputError("rho grid must be strictly increasing");
  }
  ComplexityProfile p;
  p.N = N;
  p.d = d;
  p.sigma = sigma;
  p.rho_grid = rho_grid;
  const std::size_t n = rho_grid.size();
  p.r_M.assign(n, 0.0);
  p.r_Q.assign(n, 0.0);
  p.r.assign(n, 0.0);
  p.psi.assign(n, 0.0);
  p.r_M_rel_error.assign(n, 0.0);
  p.method.assign(n, mode == PsiMode::kClosed ? FixedPointMethod::kClosedForm : FixedPointMethod::kMonteCarlo);
  if (mode == PsiMode::kClosed) {
    for (std::size_t i = 0; i < n; ++i) {
      p.r_M[i] = closed_rM(rho_grid[i], sigma, N, d, constants);
      p.r_Q[i] = closed_rQ(rho_grid[i], N, d, constants);
    }
  } else {
    // One frozen sample set for the whole grid keeps the profile monotone.
    const GaussianSampleSet samples(d, constants.mc_samples, seed, threads);
    parallel_for(n, threads, [&](std::size_t i) {
      const FixedPointResult m = fixed_point_rM(rho_grid[i], sigma, N, samples, constants);
      p.r_M[i] = m.r;
      p.r_M_rel_error[i] = m.rel_mc_error();
      p.r_Q[i] = fixed_point_rQ(rho_grid[i], N, samples, constants).r;
    });
  }
  for (std::size_t i = 0; i < n; ++i) {
    p.r[i] = std::max(p.r_M[i], p.r_Q[i]);
    p.psi[i] = constants.c0 * p.r[i] * p.r[i];
  }
  return p;
}

TabulatedPsi::TabulatedPsi(std::vector<double> rho, std::vector<double> values)
    : rho_(std::move(rho)), psi_(std::move(values)) {
  if (rho_.empty() || rho_.size() != psi_.size()) throw InputError("TabulatedPsi: need matching nonempty tables");
  for (std::size_t i = 0; i < rho_.size(); ++i) {
    if (!(rho_[i] > 0.0) || (i > 0 && !(rho_[i] > rho_[i - 1])))
      throw InputError("TabulatedPsi: nodes must be positive and strictly increasing");
    if (!std::isfinite(psi_[i]) || psi_[i] < 0.0) throw InputError("TabulatedPsi: values must be nonnegative");
    if (i > 0) psi_[i] = std::max(psi_[i], psi_[i - 1]);
  }
}

TabulatedPsi TabulatedPsi::from_profile(const ComplexityProfile& profile) {
  std::vector<double> rho, val;
  for (std::size_t i = 0; i < profile.rho_grid.size(); ++i) {
    if (profile.rho_grid[i] <= 0.0) continue;
    rho.push_back(profile.rho_grid[i]);
    val.push_back(profile.psi[i]);
  }
  return TabulatedPsi(std::move(rho), std::move(val));
}

double TabulatedPsi::operator()(double rho) const {
  if (!(rho > 0.0)) return 0.0;
  if (rho <= rho_.front()) return psi_.front() * rho / rho_.front();
  if (rho >= rho_.back()) {
    // continue the last segment's log-log slope, capped at 2 (r_Q is at most linear in rho)
    const std::size_t n = rho_.size();
    if (n < 2 || psi_[n - 2] <= 0.0) return psi_.back();
    const double slope = std::clamp(std::log(psi_[n - 1] / psi_[n - 2]) / std::log(rho_[n - 1] / rho_[n - 2]), 0.0, 2.0);
    return psi_.back() * std::pow(rho / rho_.back(), slope);
  }
  const auto it = std::upper_bound(rho_.begin(), rho_.end(), rho);
  const std::size_t j = static_cast<std::size_t>(it - rho_.begin());
  const double a = psi_[j - 1], b = psi_[j];
  if (a <= 0.0 || b <= 0.0) {
    const double w = (rho - rho_[j - 1]) / (rho_[j] - rho_[j - 1]);
    return a + w * (b - a);
  }
  const double w = std::log(rho / rho_[j - 1]) / std::log(rho_[j] / rho_[j - 1]);
  return std::exp(std::log(a) + w * std::log(b / a));
}

}  // namespace minimax
