#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "minimax/geometry.hpp"
#include "minimax/types.hpp"

namespace minimax {

/// Every tunable constant of the theory in one place.
struct ConstantsProfile {
  std::string name = "calibrated";
  double Q = 0.4;
  double eta = 0.5;
  double c0 = 2.0;
  double eta_prime = 0.125;
  double c0_prime = 2.0;
  double C_M = 1.0;
  double C_Q = 1.0;
  double C_X = 1.0;  ///< scalar in front of the fixed-design upper bound
  double zeta = 0.5;
  double zeta_prime = 2.0;
  int mc_samples = 1000;
  double bisect_rel_tol = 1e-6;

  void validate() const;

  /// eta = 1/(16 sqrt 2), c0 = 14: the values the proofs go through with.
  static ConstantsProfile paper_faithful();
  /// eta = 0.5, c0 = 2: constants tuned to simulation scale.
  static ConstantsProfile calibrated();
  /// "paper" / "paper-faithful" or "calibrated"; anything else is an InputError.
  static ConstantsProfile by_name(const std::string& name);
};

enum class FixedPointMethod { kMonteCarlo, kClosedForm };

const char* method_name(FixedPointMethod m);

struct FixedPointResult {
  double rho = 0.0;
  double r = 0.0;
  FixedPointMethod method = FixedPointMethod::kMonteCarlo;
  double lo = 0.0;
  double hi = 0.0;
  int evaluations = 0;
  double width_at_r = 0.0;     ///< MC width at the returned r
  double width_stderr = 0.0;   ///< its standard error
  bool converged = true;

  /// Relative Monte Carlo error of the width at r (0 when r = 0).
  double rel_mc_error() const { return width_at_r > 0.0 ? width_stderr / width_at_r : 0.0; }
};

/// Multiplier fixed point inf{r > 0 : sigma*w(rho B_1 cap r B_2) <= eta r^2 sqrt N}
/// with w estimated on `samples` (common random numbers across the bisection).
FixedPointResult fixed_point_rM(double rho, double sigma, int N, const GaussianSampleSet& samples,
                                const ConstantsProfile& constants);
FixedPointResult fixed_point_rM(double rho, double sigma, int N, int d, const ConstantsProfile& constants,
                                std::uint64_t seed, int threads = 1);

/// Quadratic fixed point inf{r > 0 : w(rho B_1 cap r B_2) <= Q r sqrt N}.
FixedPointResult fixed_point_rQ(double rho, int N, const GaussianSampleSet& samples, const ConstantsProfile& constants);
FixedPointResult fixed_point_rQ(double rho, int N, int d, const ConstantsProfile& constants, std::uint64_t seed,
                                int threads = 1);

/// Piecewise closed form of r_M (returns r_M, not its square).
double closed_rM(double rho, double sigma, int N, int d, const ConstantsProfile& constants);
/// Closed form of r_Q; inside (zeta d, zeta' d) this is only an upper bound.
double closed_rQ(double rho, int N, int d, const ConstantsProfile& constants);
/// True when N lies strictly between zeta*d and zeta'*d.
bool in_transition_band(int N, int d, const ConstantsProfile& constants);

enum class PsiMode { kMonteCarlo, kClosed };

/// c0 * max(r_M, r_Q)^2.
double psi(double rho, double sigma, int N, int d, const ConstantsProfile& constants, PsiMode mode,
           std::uint64_t seed);

struct RateValue {
  double value = 0.0;
  int branch = 0;               ///< 0: rho^2, 1: middle (logarithmic), 2: top of the table
  bool upper_bound_only = false;
};

/// Rate table for the l1 ball of radius rho, with the profile's constants.
RateValue minimax_rate(double rho, double sigma, int N, int d, const ConstantsProfile& constants);
/// min(max(closed_rM, closed_rQ)^2, rho^2).
double closed_rate_envelope(double rho, double sigma, int N, int d, const ConstantsProfile& constants);

struct DerivedRadii {
  double r0 = 0.0;
  double rho0 = 0.0;
  double rho_star = 0.0;
  int K0 = 0;  ///< -1 when rho_star = 0 < rho0 (no finite k)
};

DerivedRadii derived_radii(double sigma, int N, int d, double t_star_l1, const ConstantsProfile& constants);

/// Upper bound on the fixed-design fixed point; design columns must lie in B_2^N.
double rbar_X(double rho, const Matrix& design, double sigma, const ConstantsProfile& constants);
/// Same with the rank already known.
double rbar_X(double rho, int N, int d, int rank, double sigma, const ConstantsProfile& constants);

/// Throws InputError when a column of `design` has l2 norm above 1.
void require_unit_columns(const Matrix& design);

/// Fixed-design multiplier fixed point
/// inf{r : sigma*w(rho*A*B_1 cap r B_2^N) <= eta' r^2 sqrt N} for the column-normalized
/// operator A (so rho*A = (rho/sqrt N) X for the unnormalized design X = sqrt N * A).
FixedPointResult fixed_point_rX(double rho, const Matrix& design, double sigma, const ConstantsProfile& constants,
                                std::uint64_t seed, const SolverOptions& opts = {}, int threads = 1);

double gelfand_theoretical(double rho, int N, int d);
double gelfand_theoretical_sq(double rho, int N, int d);

struct ComplexityProfile {
  int N = 0;
  int d = 0;
  double sigma = 0.0;
  std::vector<double> rho_grid;
  std::vector<double> r_M;
  std::vector<double> r_Q;
  std::vector<double> r;
  std::vector<double> psi;
  std::vector<FixedPointMethod> method;
  std::vector<double> r_M_rel_error;  ///< relative MC error of the width at r_M (0 for closed form)
};

/// Fixed points and Psi over `rho_grid` (strictly increasing). The Monte Carlo
/// mode draws one frozen sample set from `seed` shared by every grid point.
ComplexityProfile complexity_profile(int N, int d, double sigma, const std::vector<double>& rho_grid,
                                     const ConstantsProfile& constants, PsiMode mode, std::uint64_t seed,
                                     int threads = 1);

/// n points log-spaced from lo to hi inclusive.
std::vector<double> log_grid(double lo, double hi, int n);

/// Psi tabulated on a log grid and interpolated linearly in (log rho, log Psi);
/// nondecreasing by construction (running maximum of the tabulated values).
/// Below the first node Psi is taken proportional to rho (r_M^2 is linear in
/// rho for small rho); above the last node the last segment's log-log slope
/// is continued (capped at 2), so a plateau stays flat and a linear r_Q keeps growing.
class TabulatedPsi {
 public:
  TabulatedPsi(std::vector<double> rho, std::vector<double> values);
  static TabulatedPsi from_profile(const ComplexityProfile& profile);

  double operator()(double rho) const;
  const std::vector<double>& nodes() const { return rho_; }
  const std::vector<double>& values() const { return psi_; }

 private:
  std::vector<double> rho_;
  std::vector<double> psi_;
};

}  // namespace minimax
