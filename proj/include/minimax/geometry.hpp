#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "minimax/types.hpp"

namespace minimax {

/// rho*B_1^d  intersected with  r*B_2^d.
struct L1L2Set {
  double rho = 0.0;
  double r = 0.0;
  int d = 1;
};

/// c*X*B_1^d  intersected with  r*B_2^N.
struct ImageL1L2Set {
  const Matrix* design = nullptr;
  double c = 0.0;
  double r = 0.0;
};

/// ker X  intersected with  rho*B_1^d.
struct KernelL1Set {
  const Matrix* design = nullptr;
  double rho = 0.0;
};

enum class SetKind { kL1L2, kImageL1L2, kKernelL1 };

/// Lightweight record of the set a width was computed for.
struct SetDescriptor {
  SetKind kind = SetKind::kL1L2;
  double rho = 0.0;  ///< rho for L1L2 / KernelL1, c for ImageL1L2
  double r = 0.0;
  int rows = 0;
  int cols = 0;
};

struct WidthEstimate {
  double value = 0.0;
  double std_error = 0.0;
  int samples = 0;
  SetDescriptor set;
};

struct KernelWidthEstimate {
  WidthEstimate width;
  double diameter_proxy = 0.0;  ///< 2 * max over samples of the maximizer's l2 norm
  bool converged = true;
};

/// Magnitudes of a vector sorted in decreasing order with running
/// prefix statistics. Evaluating the support function of
/// rho*B_1 cap r*B_2 from this takes O(log d).
class SortedMagnitudes {
 public:
  SortedMagnitudes() = default;
  explicit SortedMagnitudes(std::span<const double> g);

  int size() const { return static_cast<int>(mag_.size()); }
  double linf() const { return mag_.empty() ? 0.0 : mag_.front(); }
  double l1() const { return mean_.empty() ? 0.0 : mean_.back() * static_cast<double>(mean_.size()); }
  double l2() const;

  /// sup{<g,t> : |t|_1 <= rho, |t|_2 <= r}; radii are not validated here.
  double support(double rho, double r) const;

 private:
  // Right derivative of the dual objective at lambda with `active` entries above it.
  double dual_slope(double lambda, int active, double rho, double r) const;
  double dual_value(double lambda, int active, double rho, double r) const;

  // Running mean and centred sum of squares of the k+1 largest magnitudes
  // (Welford), so the dual objective is evaluated without cancellation.
  std::vector<double> mag_;
  std::vector<double> mean_;
  std::vector<double> m2_;
};

/// Exact support function of rho*B_1^d cap r*B_2^d evaluated at g, computed
/// as the infimal convolution min_{lambda>=0} rho*lambda + r*|soft(g, lambda)|_2.
double support_l1l2(std::span<const double> g, double rho, double r);
inline double support_l1l2(const Vector& g, double rho, double r) {
  return support_l1l2(std::span<const double>(g.data(), static_cast<std::size_t>(g.size())), rho, r);
}

/// Frozen set of standard Gaussian vectors in R^d, drawn from counter-based
/// streams keyed by (seed, sample index). Used as common random numbers by the
/// fixed-point solvers.
class GaussianSampleSet {
 public:
  GaussianSampleSet(int d, int samples, std::uint64_t seed, int threads = 1);

  int dim() const { return d_; }
  int samples() const { return static_cast<int>(sorted_.size()); }
  std::uint64_t seed() const { return seed_; }

  /// Monte Carlo width of rho*B_1 cap r*B_2 over the frozen samples.
  WidthEstimate width(double rho, double r) const;
  /// Mean of |G|_2 over the samples with its standard error.
  WidthEstimate l2_mean() const;
  /// Mean of |G|_inf over the samples with its standard error.
  WidthEstimate linf_mean() const;

  const SortedMagnitudes& sample(int i) const { return sorted_[static_cast<std::size_t>(i)]; }

 private:
  int d_;
  std::uint64_t seed_;
  std::vector<SortedMagnitudes> sorted_;
};

/// Standard normal vector number `index` of the width stream for `seed`.
Vector gaussian_sample(int d, std::uint64_t seed, std::uint64_t index);

/// Mean and standard error over `values` with a fixed summation order.
WidthEstimate summarize_samples(std::span<const double> values);

WidthEstimate gaussian_mean_width(const L1L2Set& set, int samples, std::uint64_t seed, int threads = 1);

/// sup{<g, Xt> : |t|_1 <= c, |Xt|_2 <= r} via the Lagrangian dual in the
/// multiplier of the l2 constraint. The value returned is the best
/// primal-feasible objective found; `converged` is false when the inner or
/// outer iteration hit opts.max_iters.
FlaggedValue support_image_l1l2(const Vector& g, const Matrix& design, double c, double r,
                                const SolverOptions& opts = {});

/// Monte Carlo width of ker X cap rho*B_1^d together with a diameter proxy.
KernelWidthEstimate kernel_section_width(const Matrix& design, double rho, int samples, std::uint64_t seed,
                                         const SolverOptions& opts = {}, int threads = 1);

/// Orthogonal projection onto ker X cap rho*B_1 by Dykstra's alternating
/// projections. `row_basis` has orthonormal columns spanning the row space of
/// X, so ker X is its orthogonal complement.
FlaggedValue project_kernel_l1(const Vector& v, const Matrix& row_basis, double rho, Vector& out,
                               int max_iters = 500, double tol = 1e-8);

/// Orthonormal basis (d x rank) of the row space of X from an SVD with the
/// standard rank threshold.
Matrix row_space_basis(const Matrix& design);

/// Numerical rank: singular values above max(N,d) * eps * sigma_max.
int numerical_rank(const Matrix& design);

}  // namespace minimax
