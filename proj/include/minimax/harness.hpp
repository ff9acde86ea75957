#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "minimax/complexity.hpp"
#include "minimax/design.hpp"
#include "minimax/solvers.hpp"

namespace minimax {

struct LossDecomposition {
  double quadratic = 0.0;
  double multiplier = 0.0;
  double reg_diff = 0.0;
  double total = 0.0;  ///< direct evaluation of the excess penalized empirical loss
};

/// Splits P_N L_t = (1/N)|Y - Xt|^2 - (1/N)|Y - Xt*|^2 + Psi(|t|_1) - Psi(|t*|_1)
/// into its quadratic, multiplier and regularization parts.
LossDecomposition decompose(const Matrix& design, const Vector& responses, const Vector& t, const Vector& t_star,
                            const std::function<double(double)>& psi_fn);

struct IsomorphyReport {
  int trials = 0;
  int satisfied = 0;
  int exhausted = 0;  ///< trials where no direction inside rho*B_1 was found
  double frequency = 0.0;
  bool inconclusive = false;
};

/// Fraction of random directions u (|u|_2 = max(r_q, floor), |u|_1 <= rho) with
/// |u|^2/2 <= |Xu|^2/N <= 3|u|^2/2.
IsomorphyReport check_isomorphy(const Matrix& design, double rho, double r_q, int trials, std::uint64_t seed,
                                int threads = 1);

struct MultiplierCheck {
  double sup_value = 0.0;  ///< exact sup of |P_N M_{t-t*}| over t - t* in rho*B_1 cap r*B_2
  double bound = 0.0;      ///< r^2 / 4
  bool holds = true;
};

MultiplierCheck check_multiplier(const Matrix& design, const Vector& xi, double rho, double r);

enum class Estimator { kOracleErm, kRerm, kLasso };
const char* estimator_name(Estimator e);
Estimator estimator_from_name(const std::string& name);

struct CellSpec {
  int N = 1;
  int d = 1;
  double sigma = 0.0;
  TargetSpec target;
};

struct RateExperimentConfig {
  std::string name = "rate";
  std::string sweep = "N";  ///< N, d, sigma or rho (= |t*|_1)
  std::vector<CellSpec> cells;
  std::vector<Estimator> estimators{Estimator::kOracleErm, Estimator::kRerm};
  int trials = 10;
  std::uint64_t seed = 1;
  ConstantsProfile constants;
  PsiMode psi_mode = PsiMode::kMonteCarlo;
  int psi_points = 32;
  double lasso_scale = 1.0;  ///< lambda = lasso_scale * sigma sqrt(log(ed)/N)
  SolverOptions solver;
  RermGrid grid;

  void validate() const;
};

struct TrialRecord {
  std::string cell_id;
  int trial = 0;
  std::uint64_t trial_seed = 0;
  std::string estimator;
  double l2_error_sq = 0.0;
  double pred_error_sq = 0.0;
  double l1_norm_hat = 0.0;
  double wall_time = 0.0;
  bool converged = true;
  bool failed = false;
};

struct Quartiles {
  double q1 = 0.0;
  double median = 0.0;
  double q3 = 0.0;
};

/// Linear-interpolation quartiles (numpy's default rule). Empty input gives NaNs.
Quartiles quartiles(std::vector<double> values);

struct EstimatorSummary {
  std::string estimator;
  Quartiles l2_error_sq;
  Quartiles pred_error_sq;
  int failures = 0;
  int nonconverged = 0;
  bool flagged = false;  ///< more than 20% of trials failed
  double median_over_rate = 0.0;
};

struct CellReport {
  std::string id;
  CellSpec spec;
  double sweep_value = 0.0;
  double target_l1 = 0.0;
  RateValue rate;              ///< minimax_rate at |t*|_1
  double psi_at_target = 0.0;  ///< Psi(|t*|_1) = c0 r^2(|t*|_1)
  int trials = 0;
  std::vector<EstimatorSummary> estimators;

  const EstimatorSummary* find(const std::string& estimator) const;
};

struct SlopeFit {
  double slope = 0.0;
  double std_error = 0.0;
  double intercept = 0.0;
  int cells = 0;
  int branch = -1;  ///< rate-table branch of the cells in the window
  bool valid = false;
};

/// Least squares fit of y on x with the slope's standard error.
SlopeFit fit_slope(const std::vector<double>& x, const std::vector<double>& y);

struct RateExperimentResult {
  std::vector<CellReport> cells;
  std::vector<TrialRecord> trials;
  std::vector<std::pair<std::string, SlopeFit>> slopes;

  const SlopeFit* slope(const std::string& estimator) const;
};

/// Paired simulations over the cells: trial k of a cell uses the same design,
/// target and noise for every estimator. Deterministic in (config, seed) for
/// any thread count.
RateExperimentResult rate_experiment(const RateExperimentConfig& cfg, int threads = 1);

/// The Psi used for RERM in a cell: tabulated Monte Carlo fixed points or the closed form.
std::function<double(double)> cell_psi(const CellSpec& cell, const ConstantsProfile& constants, PsiMode mode,
                                       int points, std::uint64_t seed, int threads = 1);

struct LocalizationCell {
  std::string id;
  int trials = 0;
  double localized = 0.0;   ///< frequency of |t_hat|_1 <= factor |t*|_1
  double error_band = 0.0;  ///< frequency of |t_hat - t*|_2^2 <= band * c0 r^2(|t*|_1)
};

std::vector<LocalizationCell> localization_check(const RateExperimentResult& result, double factor, double band);

struct FixedDesignConfig {
  std::string name = "fixed_design";
  int N = 1;
  int d = 1;
  double sigma = 0.0;
  TargetSpec target;
  int trials = 10;
  std::uint64_t seed = 1;
  std::string design_path;  ///< empty: Gaussian design from the seed, scaled by 1/sqrt(N)
  long long rip_budget = 200;
  bool rip_override = false;
  ConstantsProfile constants;     ///< c0', eta' and C_X for Psi = c0' rbar_X^2
  ConstantsProfile pn_constants;  ///< eta' used for r_X in the bound-on-PN check
  int rx_samples = 20;
  double rx_rel_tol = 1e-3;
  double pred_band = 8.0;
  SolverOptions solver;
  RermGrid grid;

  void validate() const;
};

struct FixedDesignResult {
  RipReport rip;
  int rank = 0;
  double target_l1 = 0.0;
  double rbar_sq = 0.0;  ///< rbar_X(|t*|_1)^2
  double r_X = 0.0;
  bool r_X_converged = true;
  std::vector<TrialRecord> trials;
  std::vector<MultiplierCheck> pn;  ///< bound-on-PN per trial (bound = r_X^2 / 2)
  Quartiles pred_error_sq;
  double within_band = 0.0;  ///< fraction of trials with pred_error_sq <= pred_band * rbar_sq
  double pn_frequency = 0.0;
};

FixedDesignResult fixed_design_experiment(const FixedDesignConfig& cfg, int threads = 1);

}  // namespace minimax
