#include "minimax/solvers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "minimax/errors.hpp"
#include "minimax/image_support.hpp"

namespace minimax {

void Dataset::validate() const {
  if (design.rows() < 1 || design.cols() < 1) throw InputError("dataset: empty design");
  if (responses.size() != design.rows()) throw InputError("dataset: responses and design have different N");
  if (!design.allFinite() || !responses.allFinite()) throw InputError("dataset: non-finite entries");
  if (sigma_known && (!std::isfinite(*sigma_known) || *sigma_known < 0.0))
    throw InputError("dataset: sigma must be nonnegative");
  if (t_star && t_star->size() != design.cols()) throw InputError("dataset: t_star has wrong length");
}

LeastSquaresProblem::LeastSquaresProblem(const Dataset& data) : data_(&data) {
  data.validate();
  n_ = data.N();
  d_ = data.d();
  const double inv_n = 1.0 / n_;
  use_gram_ = d_ <= 2 * n_;
  if (use_gram_) gram_ = data.design.transpose() * data.design * inv_n;
  xty_ = data.design.transpose() * data.responses * inv_n;
  yy_ = data.responses.squaredNorm() * inv_n;
  lipschitz_ = 2.0 * gram_spectral_norm(data.design) * inv_n;
}

double LeastSquaresProblem::risk(const Vector& t) const {
  return (data_->responses - data_->design * t).squaredNorm() / n_;
}

double LeastSquaresProblem::risk_and_gradient(const Vector& t, Vector& grad) const {
  if (use_gram_) {
    const Vector gt = gram_ * t;
    grad = 2.0 * (gt - xty_);
    return t.dot(gt) - 2.0 * xty_.dot(t) + yy_;
  }
  const Vector resid = data_->design * t - data_->responses;
  grad = (2.0 / n_) * (data_->design.transpose() * resid);
  return resid.squaredNorm() / n_;
}

namespace {

struct ProxRun {
  Vector t;
  int iterations = 0;
  bool decreased = false;  ///< relative-decrease criterion met
};

// Accelerated proximal gradient with adaptive (function-value) restart. `prox`
// maps a gradient step onto the feasible set / applies the penalty's prox and
// `penalty` is the nonsmooth part of the objective.
template <class Prox, class Penalty, class Extra>
ProxRun accelerated(const LeastSquaresProblem& p, Vector t, const SolverOptions& opts, Prox prox, Penalty penalty,
                    Extra extra_stop) {
  ProxRun run;
  const double lip = p.lipschitz();
  if (!(lip > 0.0)) {
    run.t = std::move(t);
    run.decreased = true;
    return run;
  }
  const double step = 1.0 / lip;
  Vector grad(p.d());
  Vector y = t;
  Vector t_prev = t;
  double theta = 1.0;
  Vector g0;
  double f_prev = p.risk_and_gradient(t, g0) + penalty(t);
  const double floor = 1e-14 * std::max(p.null_risk(), std::numeric_limits<double>::min());
  int calm = 0;
  for (int it = 1; it <= opts.max_iters; ++it) {
    p.risk_and_gradient(y, grad);
    t_prev = t;
    t = y - step * grad;
    prox(t, step);
    Vector gt;
    const double f = p.risk_and_gradient(t, gt) + penalty(t);
    run.iterations = it;
    if (!std::isfinite(f)) throw SolverError("non-finite objective in accelerated gradient");
    if (f > f_prev) {
      t = t_prev;
      if (theta == 1.0) {
        run.decreased = true;
        if (extra_stop(t)) break;
      }
      y = t;
      theta = 1.0;
      continue;
    }
    const double theta_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * theta * theta));
    y = t + ((theta - 1.0) / theta_next) * (t - t_prev);
    theta = theta_next;
    if (f_prev - f <= opts.tol * std::max(std::abs(f), floor)) {
      if (++calm >= 3) {
        run.decreased = true;
        if (extra_stop(t)) break;
      }
    } else {
      calm = 0;
      run.decreased = false;
    }
    f_prev = f;
  }
  run.t = std::move(t);
  return run;
}

void check_warm(const Vector* warm, int d) {
  if (warm && warm->size() != d) throw InputError("warm start has wrong length");
}

}  // namespace

EstimationResult constrained_erm(const LeastSquaresProblem& problem, double rho, const SolverOptions& opts,
                                 const Vector* warm_start) {
  opts.validate();
  if (!std::isfinite(rho) || rho < 0.0) throw InputError("constrained_erm: rho must be nonnegative");
  check_warm(warm_start, problem.d());
  EstimationResult res;
  Vector start = warm_start ? project_l1(*warm_start, rho) : Vector::Zero(problem.d());
  if (rho == 0.0) {
    res.t_hat = Vector::Zero(problem.d());
  } else {
    std::vector<double> scratch;
    const ProxRun run = accelerated(
        problem, std::move(start), opts, [&](Vector& t, double) { project_l1_inplace(t, rho, scratch); },
        [](const Vector&) { return 0.0; }, [](const Vector&) { return true; });
    res.t_hat = run.t;
    res.iterations = run.iterations;
    res.converged = run.decreased;
  }
  res.l1_norm = res.t_hat.lpNorm<1>();
  res.objective = problem.risk(res.t_hat);
  if (!std::isfinite(res.objective)) throw SolverError("constrained_erm: non-finite objective");
  return res;
}

EstimationResult constrained_erm(const Dataset& data, double rho, const SolverOptions& opts,
                                 const Vector* warm_start) {
  const LeastSquaresProblem problem(data);
  return constrained_erm(problem, rho, opts, warm_start);
}

EstimationResult lasso(const Dataset& data, double lambda, const SolverOptions& opts, const Vector* warm_start) {
  opts.validate();
  if (!std::isfinite(lambda) || lambda < 0.0) throw InputError("lasso: lambda must be nonnegative");
  const LeastSquaresProblem problem(data);
  check_warm(warm_start, problem.d());
  auto residual = [&](const Vector& t) {
    Vector g;
    problem.risk_and_gradient(t, g);
    double worst = 0.0;
    for (Eigen::Index j = 0; j < t.size(); ++j) {
      const double v = t[j] != 0.0 ? std::abs(g[j] + lambda * (t[j] > 0 ? 1.0 : -1.0))
                                   : std::max(std::abs(g[j]) - lambda, 0.0);
      worst = std::max(worst, v);
    }
    return worst;
  };
  const double target = 10.0 * opts.tol;
  const ProxRun run = accelerated(
      problem, warm_start ? *warm_start : Vector::Zero(problem.d()), opts,
      [&](Vector& t, double step) {
        const double thr = lambda * step;
        for (Eigen::Index j = 0; j < t.size(); ++j) {
          const double m = std::abs(t[j]) - thr;
          t[j] = m > 0.0 ? std::copysign(m, t[j]) : 0.0;
        }
      },
      [&](const Vector& t) { return lambda * t.lpNorm<1>(); }, [&](const Vector& t) { return residual(t) <= target; });
  EstimationResult res;
  res.t_hat = run.t;
  res.iterations = run.iterations;
  res.l1_norm = res.t_hat.lpNorm<1>();
  res.objective = problem.risk(res.t_hat) + lambda * res.l1_norm;
  res.subgradient_residual = residual(res.t_hat);
  res.converged = run.decreased && res.subgradient_residual <= target;
  if (!std::isfinite(res.objective)) throw SolverError("lasso: non-finite objective");
  return res;
}

double lasso_default_lambda(double sigma, int N, int d) {
  if (!std::isfinite(sigma) || sigma < 0.0) throw InputError("sigma must be nonnegative");
  if (N < 1 || d < 1) throw InputError("N and d must be positive");
  return sigma * std::sqrt(std::log(std::numbers::e * d) / N);
}

double min_norm_ls_l1(const Dataset& data) {
  const Vector ls = data.design.completeOrthogonalDecomposition().solve(data.responses);
  return ls.lpNorm<1>();
}

// The reduction: for any t with |t|_1 = rho, risk(t) + Psi(rho) >= v(rho) + Psi(rho);
// conversely the minimizer of v(rho) has l1 norm rho' <= rho and Psi(rho') <= Psi(rho)
// since Psi is nondecreasing. So min over t equals min over rho of v(rho) + Psi(rho).
EstimationResult rerm(const Dataset& data, const std::function<double(double)>& psi_fn, const RermGrid& grid,
                      const SolverOptions& opts) {
  opts.validate();
  if (grid.points < 2) throw InputError("rerm: grid needs at least 2 points");
  const LeastSquaresProblem problem(data);
  const int d = problem.d();

  EstimationResult out;
  const double psi0 = psi_fn(0.0);
  const double v0 = problem.null_risk();
  RhoTraceEntry zero{0.0, v0, psi0, v0 + psi0, true};
  out.rho_trace.push_back(zero);

  double rho_max = grid.rho_max ? *grid.rho_max : 4.0 * min_norm_ls_l1(data);
  if (!(rho_max > 0.0)) {
    out.t_hat = Vector::Zero(d);
    out.objective = v0 + psi0;
    return out;
  }
  double rho_min = grid.rho_min ? *grid.rho_min : 0.0;
  if (!grid.rho_min && data.sigma_known && *data.sigma_known > 0.0)
    rho_min = lasso_default_lambda(*data.sigma_known, problem.N(), d) / 10.0;
  if (!(rho_min > 0.0) || rho_min >= rho_max) rho_min = rho_max * 1e-4;

  const int n = grid.points;
  std::vector<double> rhos(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i)
    rhos[static_cast<std::size_t>(i)] = std::exp(std::log(rho_min) + (std::log(rho_max) - std::log(rho_min)) * i / (n - 1));

  // Psi once per grid point, checked and rearranged to be nondecreasing.
  std::vector<double> psis(rhos.size());
  double running = psi0;
  for (std::size_t i = 0; i < rhos.size(); ++i) {
    const double v = psi_fn(rhos[i]);
    if (!std::isfinite(v)) throw InputError("rerm: Psi returned a non-finite value");
    if (v < running * (1.0 - grid.monotone_tol) - 1e-300)
      throw InputError("rerm: Psi is not nondecreasing on the grid (drop at rho = " + std::to_string(rhos[i]) + ")");
    running = std::max(running, v);
    psis[i] = running;
  }

  // Grid pass with ascending warm starts. Points where Psi alone already
  // exceeds the objective at t = 0 cannot win and end the pass.
  struct Point {
    double rho;
    double total;
    Vector t;
  };
  std::vector<Point> pts;
  pts.push_back({0.0, v0 + psi0, Vector::Zero(d)});
  Vector warm = Vector::Zero(d);
  int failures = 0, evaluated = 0;
  for (std::size_t i = 0; i < rhos.size(); ++i) {
    if (psis[i] >= v0 + psi0) break;
    const EstimationResult r = constrained_erm(problem, rhos[i], opts, &warm);
    ++evaluated;
    out.iterations += r.iterations;
    out.rho_trace.push_back({rhos[i], r.objective, psis[i], r.objective + psis[i], r.converged});
    if (!r.converged) {
      ++failures;
      continue;
    }
    warm = r.t_hat;
    pts.push_back({rhos[i], r.objective + psis[i], r.t_hat});
  }
  if (evaluated > 0 && failures * 5 > evaluated)
    throw SolverError("rerm: inner solver failed at " + std::to_string(failures) + " of " +
                      std::to_string(evaluated) + " grid points");
  out.failed_points = failures;

  std::size_t best = 0;
  for (std::size_t i = 1; i < pts.size(); ++i)
    if (pts[i].total < pts[best].total) best = i;

  Vector t_best = pts[best].t;
  double total_best = pts[best].total;

  // Golden-section refinement on the bracket around the best grid point.
  double a = best > 0 ? pts[best - 1].rho : 0.0;
  double b = pts[best].rho;
  if (best + 1 < pts.size()) {
    b = pts[best + 1].rho;
  } else {
    const auto next = std::upper_bound(rhos.begin(), rhos.end(), pts[best].rho);
    if (next != rhos.end()) b = *next;
  }
  if (b > a && grid.refine_iters > 0) {
    const double phi = (std::sqrt(5.0) - 1.0) / 2.0;
    auto eval = [&](double rho) {
      const EstimationResult r = constrained_erm(problem, rho, opts, &t_best);
      out.iterations += r.iterations;
      const double ps = std::max(psi_fn(rho), 0.0);
      const double tot = r.objective + ps;
      out.rho_trace.push_back({rho, r.objective, ps, tot, r.converged});
      if (r.converged && tot < total_best) {
        total_best = tot;
        t_best = r.t_hat;
      }
      return tot;
    };
    double x1 = b - phi * (b - a), x2 = a + phi * (b - a);
    double f1 = eval(x1), f2 = eval(x2);
    for (int k = 0; k < grid.refine_iters; ++k) {
      if (f1 <= f2) {
        b = x2;
        x2 = x1;
        f2 = f1;
        x1 = b - phi * (b - a);
        f1 = eval(x1);
      } else {
        a = x1;
        x1 = x2;
        f1 = f2;
        x2 = a + phi * (b - a);
        f2 = eval(x2);
      }
    }
  }
  out.t_hat = t_best;
  out.l1_norm = out.t_hat.lpNorm<1>();
  out.objective = problem.risk(out.t_hat) + psi_fn(out.l1_norm);
  out.converged = failures == 0;
  return out;
}

}  // namespace minimax
