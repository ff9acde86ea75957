#pragma once

#include "minimax/types.hpp"

namespace minimax {

/// Support function of c*X*B_1^d cap r*B_2^N for a fixed design. Keeps the
/// Gram matrix (when d is small enough for it to pay off) and the top
/// eigenvalue of X^T X so repeated evaluations against the same X are cheap.
class ImageSupport {
 public:
  explicit ImageSupport(const Matrix& design);

  /// sup{<g, Xt> : |t|_1 <= c, |Xt|_2 <= r}.
  FlaggedValue evaluate(const Vector& g, double c, double r, const SolverOptions& opts = {}) const;
  /// Same supremum written in terms of b = X^T g.
  FlaggedValue evaluate_dual(const Vector& b, double c, double r, const SolverOptions& opts = {}) const;

  const Matrix& design() const { return *x_; }
  double gram_norm() const { return lmax_; }

 private:
  Vector gram_apply(const Vector& t) const;
  double image_sq(const Vector& t) const;

  const Matrix* x_;
  Matrix gram_;
  bool use_gram_ = false;
  double lmax_ = 0.0;
};

/// Largest eigenvalue of X^T X by power iteration from a fixed start vector.
double gram_spectral_norm(const Matrix& design, int iters = 100);

}  // namespace minimax
