#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "minimax/projection.hpp"
#include "minimax/types.hpp"

namespace minimax {

struct Dataset {
  Matrix design;
  Vector responses;
  std::optional<double> sigma_known;
  std::optional<Vector> t_star;  ///< simulation only

  int N() const { return static_cast<int>(design.rows()); }
  int d() const { return static_cast<int>(design.cols()); }
  /// Shapes consistent, entries finite; throws InputError otherwise.
  void validate() const;
};

struct RhoTraceEntry {
  double rho = 0.0;
  double constrained_risk = 0.0;
  double psi = 0.0;
  double total = 0.0;
  bool converged = true;
};

struct EstimationResult {
  Vector t_hat;
  double l1_norm = 0.0;
  double objective = 0.0;
  bool converged = true;
  int iterations = 0;
  std::vector<RhoTraceEntry> rho_trace;  ///< RERM only
  double subgradient_residual = 0.0;     ///< LASSO only
  int failed_points = 0;                 ///< RERM grid points dropped after inner failures
};

/// Empirical risk (1/N)|Y - X t|^2 with cached X^T Y / N, |Y|^2 / N and the
/// Lipschitz constant of its gradient, shared by every solve on one dataset.
class LeastSquaresProblem {
 public:
  explicit LeastSquaresProblem(const Dataset& data);

  double risk(const Vector& t) const;  ///< direct evaluation from the residual
  /// Gradient at t; also returns the risk computed from the same products.
  double risk_and_gradient(const Vector& t, Vector& grad) const;
  double lipschitz() const { return lipschitz_; }
  int N() const { return n_; }
  int d() const { return d_; }
  const Dataset& data() const { return *data_; }
  /// |Y|^2 / N, the risk at t = 0.
  double null_risk() const { return yy_; }

 private:
  const Dataset* data_;
  int n_;
  int d_;
  bool use_gram_;
  Matrix gram_;  ///< X^T X / N when d is small relative to N
  Vector xty_;   ///< X^T Y / N
  double yy_;
  double lipschitz_;
};

/// argmin (1/N)|Y - X t|^2 over |t|_1 <= rho by accelerated projected gradient.
EstimationResult constrained_erm(const Dataset& data, double rho, const SolverOptions& opts = {},
                                 const Vector* warm_start = nullptr);
EstimationResult constrained_erm(const LeastSquaresProblem& problem, double rho, const SolverOptions& opts = {},
                                 const Vector* warm_start = nullptr);

/// argmin (1/N)|Y - X t|^2 + lambda |t|_1 by accelerated proximal gradient.
EstimationResult lasso(const Dataset& data, double lambda, const SolverOptions& opts = {},
                       const Vector* warm_start = nullptr);

/// sigma * sqrt(log(e d) / N).
double lasso_default_lambda(double sigma, int N, int d);

struct RermGrid {
  int points = 64;
  std::optional<double> rho_min;  ///< default sigma sqrt(log(ed)/N) / 10
  std::optional<double> rho_max;  ///< default 4 |min-norm least squares|_1
  int refine_iters = 30;          ///< golden-section steps on the winning bracket
  double monotone_tol = 1e-6;     ///< relative drop in Psi tolerated before rejecting it
};

/// argmin_t (1/N)|Y - X t|^2 + Psi(|t|_1), via the one-dimensional value
/// function v(rho) = min_{|t|_1 <= rho} risk(t). Psi must be nondecreasing.
EstimationResult rerm(const Dataset& data, const std::function<double(double)>& psi_fn, const RermGrid& grid = {},
                      const SolverOptions& opts = {});

/// l1 norm of the minimum-norm least-squares solution.
double min_norm_ls_l1(const Dataset& data);

}  // namespace minimax
