#pragma once

#include <Eigen/Dense>

namespace minimax {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

enum class StepRule { kFixedLipschitz, kBacktracking };

/// Iteration controls shared by every iterative routine in the library.
struct SolverOptions {
  int max_iters = 5000;
  double tol = 1e-8;  ///< relative objective decrease that stops the iteration
  StepRule step_rule = StepRule::kFixedLipschitz;

  void validate() const;
};

/// A value computed by an iterative routine together with its convergence flag.
struct FlaggedValue {
  double value = 0.0;
  bool converged = true;
  int iterations = 0;
};

}  // namespace minimax
