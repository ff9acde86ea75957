#include "minimax/image_support.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "minimax/errors.hpp"
#include "minimax/projection.hpp"

namespace minimax {

double gram_spectral_norm(const Matrix& design, int iters) {
  const Eigen::Index d = design.cols();
  if (d == 0 || design.rows() == 0) return 0.0;
  // Deterministic, non-symmetric start so no column is orthogonal to it by accident.
  Vector v(d);
  for (Eigen::Index j = 0; j < d; ++j) v[j] = 1.0 + 0.5 * std::sin(1.0 + static_cast<double>(j));
  v.normalize();
  double lambda = 0.0;
  for (int it = 0; it < iters; ++it) {
    Vector w = design.transpose() * (design * v);
    const double n = w.norm();
    if (n == 0.0) return 0.0;
    lambda = v.dot(w);
    v = w / n;
  }
  // Power iteration underestimates; the Rayleigh quotient of the final
  // iterate is tighter and a small margin keeps 1/L a safe step.
  const Vector w = design.transpose() * (design * v);
  lambda = std::max(lambda, v.dot(w));
  return lambda * 1.01;
}

ImageSupport::ImageSupport(const Matrix& design) : x_(&design) {
  if (design.rows() < 1 || design.cols() < 1) throw InputError("design must be non-empty");
  if (!design.allFinite()) throw InputError("design has non-finite entries");
  use_gram_ = design.cols() <= design.rows();
  if (use_gram_) {
    gram_ = design.transpose() * design;
    Eigen::SelfAdjointEigenSolver<Matrix> es(gram_, Eigen::EigenvaluesOnly);
    lmax_ = std::max(es.eigenvalues().maxCoeff(), 0.0) * (1.0 + 1e-12);
  } else {
    lmax_ = gram_spectral_norm(design);
  }
}

Vector ImageSupport::gram_apply(const Vector& t) const {
  if (use_gram_) return gram_ * t;
  return x_->transpose() * (*x_ * t);
}

double ImageSupport::image_sq(const Vector& t) const {
  if (use_gram_) return t.dot(gram_ * t);
  return (*x_ * t).squaredNorm();
}

FlaggedValue ImageSupport::evaluate(const Vector& g, double c, double r, const SolverOptions& opts) const {
  if (g.size() != x_->rows()) throw InputError("support_image_l1l2: g has wrong length");
  if (!g.allFinite()) throw InputError("support_image_l1l2: non-finite entry in g");
  return evaluate_dual(x_->transpose() * g, c, r, opts);
}

namespace {

struct InnerResult {
  Vector t;
  double image_sq = 0.0;
  bool converged = false;
  int iterations = 0;
};

}  // namespace

FlaggedValue ImageSupport::evaluate_dual(const Vector& b, double c, double r, const SolverOptions& opts) const {
  opts.validate();
  if (!std::isfinite(c) || c < 0.0 || !std::isfinite(r) || r < 0.0)
    throw InputError("support_image_l1l2: radii must be finite and nonnegative");
  if (b.size() != x_->cols()) throw InputError("support_image_l1l2: dimension mismatch");
  FlaggedValue out;
  const double binf = b.lpNorm<Eigen::Infinity>();
  if (c == 0.0 || r == 0.0 || binf == 0.0 || lmax_ == 0.0) return out;

  // lambda = 0: the maximizer is a signed vertex of c*B_1.
  Eigen::Index jmax = 0;
  b.cwiseAbs().maxCoeff(&jmax);
  Vector vertex = Vector::Zero(b.size());
  vertex[jmax] = std::copysign(c, b[jmax]);
  const double vnorm = std::sqrt(image_sq(vertex));
  if (vnorm <= r) {
    out.value = c * binf;
    return out;
  }
  double best = c * binf * r / vnorm;
  double best_dual = c * binf;
  int total_iters = 0;
  bool all_converged = true;
  std::vector<double> scratch;
  // The duality gap is only meaningful if the inner solves are tighter than
  // the requested outer accuracy.
  const double inner_tol = std::max(opts.tol * 1e-3, 1e-15);

  // Inner problem: maximize <b,t> - lambda |Xt|^2 over c*B_1 by accelerated
  // projected gradient, warm-started from the previous multiplier's solution.
  auto inner = [&](double lambda, const Vector& start) {
    InnerResult res;
    const double lip = 2.0 * lambda * lmax_;
    const double step = 1.0 / lip;
    Vector t = start;
    Vector y = t;
    Vector t_prev = t;
    double theta = 1.0;
    auto objective = [&](const Vector& v, double q) { return lambda * q - b.dot(v); };
    double f_prev = objective(t, image_sq(t));
    int calm = 0;
    for (int it = 1; it <= opts.max_iters; ++it) {
      Vector grad = 2.0 * lambda * gram_apply(y) - b;
      t_prev = t;
      t = y - step * grad;
      project_l1_inplace(t, c, scratch);
      const double q = image_sq(t);
      const double f = objective(t, q);
      res.iterations = it;
      if (f > f_prev) {
        t = t_prev;
        if (theta == 1.0) {
          // A plain gradient step from t failed to decrease: t is optimal up to rounding.
          res.converged = true;
          break;
        }
        // Adaptive restart: drop momentum and retry from the last iterate.
        y = t;
        theta = 1.0;
        continue;
      }
      const double theta_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * theta * theta));
      y = t + ((theta - 1.0) / theta_next) * (t - t_prev);
      theta = theta_next;
      const double scale = std::max(std::abs(f), c * binf * 1e-12);
      if (f_prev - f <= inner_tol * scale) {
        if (++calm >= 3) {
          res.converged = true;
          res.t = t;
          res.image_sq = q;
          return res;
        }
      } else {
        calm = 0;
      }
      f_prev = f;
    }
    res.t = t;
    res.image_sq = image_sq(t);
    return res;
  };

  auto record = [&](double lambda, const InnerResult& res) {
    total_iters += res.iterations;
    if (!res.converged) all_converged = false;
    const double lin = b.dot(res.t);
    const double norm = std::sqrt(res.image_sq);
    const double feasible = norm <= r ? lin : lin * r / norm;
    best = std::max(best, feasible);
    best_dual = std::min(best_dual, lin - lambda * (res.image_sq - r * r));
  };

  // At lambda_hi = c|b|_inf / r^2 every maximizer satisfies |Xt| <= r, since
  // the inner value is at least 0 (t = 0) and <b,t> <= c|b|_inf.
  double hi = c * binf / (r * r);
  InnerResult at_hi = inner(hi, Vector::Zero(b.size()));
  record(hi, at_hi);
  double f_hi = at_hi.image_sq - r * r;  // <= 0
  Vector warm = at_hi.t;

  double lo = hi;
  double f_lo = f_hi;
  for (int k = 0; k < 80 && f_lo <= 0.0; ++k) {
    hi = lo;
    f_hi = f_lo;
    lo *= 0.25;
    InnerResult res = inner(lo, warm);
    record(lo, res);
    warm = res.t;
    f_lo = res.image_sq - r * r;
  }

  // Illinois regula falsi on log(lambda) for |X t_lambda|^2 = r^2, stopped
  // by the relative duality gap.
  if (f_lo > 0.0) {
    double u_lo = std::log(lo);
    double u_hi = std::log(hi);
    int side = 0;
    for (int k = 0; k < 100; ++k) {
      if (best_dual - best <= opts.tol * best) break;
      double u = (u_lo * f_hi - u_hi * f_lo) / (f_hi - f_lo);
      if (!(u > u_lo && u < u_hi)) u = 0.5 * (u_lo + u_hi);
      const double lambda = std::exp(u);
      InnerResult res = inner(lambda, warm);
      record(lambda, res);
      warm = res.t;
      const double f = res.image_sq - r * r;
      if (f > 0.0) {
        u_lo = u;
        f_lo = f;
        if (side == -1) f_hi *= 0.5;
        side = -1;
      } else {
        u_hi = u;
        f_hi = f;
        if (side == 1) f_lo *= 0.5;
        side = 1;
      }
      if (u_hi - u_lo < 1e-14) break;
    }
  }
  out.value = best;
  out.iterations = total_iters;
  out.converged = all_converged && (best_dual - best <= 10.0 * opts.tol * best);
  return out;
}

}  // namespace minimax
