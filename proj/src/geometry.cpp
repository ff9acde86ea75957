#include "minimax/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <string>

#include "minimax/errors.hpp"
#include "minimax/image_support.hpp"
#include "minimax/parallel.hpp"
#include "minimax/projection.hpp"
#include "minimax/rng.hpp"

namespace minimax {

namespace {

constexpr int kKernelAscentSteps = 25;
constexpr double kKernelAscentTol = 1e-3;

void check_radius(double v, const char* what) {
  if (!std::isfinite(v) || v < 0.0) throw InputError(std::string(what) + " must be a finite nonnegative number");
}

}  // namespace

void SolverOptions::validate() const {
  if (max_iters < 1) throw InputError("max_iters must be positive");
  if (!(tol > 0.0) || !std::isfinite(tol)) throw InputError("tol must be positive");
}

SortedMagnitudes::SortedMagnitudes(std::span<const double> g) {
  mag_.resize(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (!std::isfinite(g[i])) throw InputError("support_l1l2: non-finite entry in g");
    mag_[i] = std::abs(g[i]);
  }
  std::sort(mag_.begin(), mag_.end(), std::greater<>());
  mean_.resize(mag_.size());
  m2_.resize(mag_.size());
  double mean = 0.0;
  double m2 = 0.0;
  for (std::size_t k = 0; k < mag_.size(); ++k) {
    const double a = mag_[k];
    const double delta = a - mean;
    mean += delta / static_cast<double>(k + 1);
    m2 += delta * (a - mean);
    mean_[k] = mean;
    m2_[k] = m2;
  }
}

double SortedMagnitudes::l2() const {
  if (mag_.empty()) return 0.0;
  const double n = static_cast<double>(mag_.size());
  return std::sqrt(n * mean_.back() * mean_.back() + m2_.back());
}

// With k entries above lambda, |soft(g,lambda)|_2^2 = k (lambda - m_k)^2 + M2_k.
double SortedMagnitudes::dual_value(double lambda, int active, double rho, double r) const {
  if (active == 0) return rho * lambda;
  const auto k = static_cast<std::size_t>(active - 1);
  const double dev = lambda - mean_[k];
  const double h = static_cast<double>(active) * dev * dev + m2_[k];
  return rho * lambda + r * std::sqrt(std::max(h, 0.0));
}

double SortedMagnitudes::dual_slope(double lambda, int active, double rho, double r) const {
  if (active == 0) return rho;
  const auto k = static_cast<std::size_t>(active - 1);
  const double dev = mean_[k] - lambda;
  const double h = static_cast<double>(active) * dev * dev + m2_[k];
  if (h <= 0.0) return rho;
  return rho - r * static_cast<double>(active) * dev / std::sqrt(h);
}

double SortedMagnitudes::support(double rho, double r) const {
  if (mag_.empty() || rho == 0.0 || r == 0.0 || mag_.front() == 0.0) return 0.0;
  const int d = size();

  // Entries strictly above a value: the prefix of the decreasing array.
  auto count_above = [&](double v) {
    return static_cast<int>(std::lower_bound(mag_.begin(), mag_.end(), v, std::greater<>()) - mag_.begin());
  };

  const int nonzero = count_above(0.0);
  if (dual_slope(0.0, nonzero, rho, r) >= 0.0) return r * l2();

  // The right derivative is nondecreasing in lambda, so the breakpoints where
  // it is nonnegative form a prefix 0..J of the sorted magnitudes.
  int lo = 0;      // slope at mag_[lo] >= 0 (slope at the largest entry is rho)
  int hi = d;      // sentinel: lambda = 0 has negative slope
  while (hi - lo > 1) {
    const int mid = lo + (hi - lo) / 2;
    const double a = mag_[static_cast<std::size_t>(mid)];
    if (dual_slope(a, count_above(a), rho, r) >= 0.0) lo = mid;
    else hi = mid;
  }
  const double upper = mag_[static_cast<std::size_t>(lo)];
  const double lower = hi < d ? mag_[static_cast<std::size_t>(hi)] : 0.0;
  // On (lower, upper) exactly the entries up to and including index lo are active.
  const int active = lo + 1;
  const auto k = static_cast<std::size_t>(active - 1);
  const double n = static_cast<double>(active);

  double lambda = lower;
  const double denom = n * (r * r * n - rho * rho);
  if (denom > 0.0) {
    const double x = rho * std::sqrt(std::max(m2_[k], 0.0) / denom);
    lambda = std::clamp(mean_[k] - x, lower, upper);
  }
  double best = dual_value(lambda, active, rho, r);
  best = std::min(best, dual_value(upper, active, rho, r));
  best = std::min(best, dual_value(lower, active, rho, r));
  return best;
}

double support_l1l2(std::span<const double> g, double rho, double r) {
  check_radius(rho, "rho");
  check_radius(r, "r");
  return SortedMagnitudes(g).support(rho, r);
}

WidthEstimate summarize_samples(std::span<const double> values) {
  WidthEstimate out;
  out.samples = static_cast<int>(values.size());
  if (values.empty()) return out;
  const double n = static_cast<double>(values.size());
  out.value = pairwise_sum(values.data(), values.size()) / n;
  if (values.size() > 1) {
    std::vector<double> sq(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double dv = values[i] - out.value;
      sq[i] = dv * dv;
    }
    const double var = pairwise_sum(sq.data(), sq.size()) / (n - 1.0);
    out.std_error = std::sqrt(var / n);
  }
  return out;
}

Vector gaussian_sample(int d, std::uint64_t seed, std::uint64_t index) {
  Vector g(d);
  rng::CounterStream(seed, rng::Stream::kWidth).normals(index, std::span<double>(g.data(), static_cast<std::size_t>(d)));
  return g;
}

GaussianSampleSet::GaussianSampleSet(int d, int samples, std::uint64_t seed, int threads) : d_(d), seed_(seed) {
  if (d < 1) throw InputError("dimension must be positive");
  if (samples < 2) throw InputError("samples must be at least 2");
  sorted_.resize(static_cast<std::size_t>(samples));
  parallel_for(sorted_.size(), threads, [&](std::size_t i) {
    const Vector g = gaussian_sample(d, seed, i);
    sorted_[i] = SortedMagnitudes(std::span<const double>(g.data(), static_cast<std::size_t>(d)));
  });
}

WidthEstimate GaussianSampleSet::width(double rho, double r) const {
  check_radius(rho, "rho");
  check_radius(r, "r");
  std::vector<double> vals(sorted_.size());
  for (std::size_t i = 0; i < sorted_.size(); ++i) vals[i] = sorted_[i].support(rho, r);
  WidthEstimate w = summarize_samples(vals);
  w.set = {SetKind::kL1L2, rho, r, 0, d_};
  return w;
}

WidthEstimate GaussianSampleSet::l2_mean() const {
  std::vector<double> vals(sorted_.size());
  for (std::size_t i = 0; i < sorted_.size(); ++i) vals[i] = sorted_[i].l2();
  return summarize_samples(vals);
}

WidthEstimate GaussianSampleSet::linf_mean() const {
  std::vector<double> vals(sorted_.size());
  for (std::size_t i = 0; i < sorted_.size(); ++i) vals[i] = sorted_[i].linf();
  return summarize_samples(vals);
}

WidthEstimate gaussian_mean_width(const L1L2Set& set, int samples, std::uint64_t seed, int threads) {
  check_radius(set.rho, "rho");
  check_radius(set.r, "r");
  if (set.d < 1) throw InputError("dimension must be positive");
  if (samples < 2) throw InputError("samples must be at least 2");
  std::vector<double> vals(static_cast<std::size_t>(samples));
  parallel_for(vals.size(), threads, [&](std::size_t i) {
    const Vector g = gaussian_sample(set.d, seed, i);
    vals[i] = support_l1l2(g, set.rho, set.r);
  });
  WidthEstimate w = summarize_samples(vals);
  w.set = {SetKind::kL1L2, set.rho, set.r, 0, set.d};
  return w;
}

FlaggedValue support_image_l1l2(const Vector& g, const Matrix& design, double c, double r, const SolverOptions& opts) {
  return ImageSupport(design).evaluate(g, c, r, opts);
}

int numerical_rank(const Matrix& design) {
  if (design.size() == 0) return 0;
  Eigen::BDCSVD<Matrix> svd(design);
  const auto& s = svd.singularValues();
  if (s.size() == 0 || s[0] == 0.0) return 0;
  const double thresh = static_cast<double>(std::max(design.rows(), design.cols())) *
                        std::numeric_limits<double>::epsilon() * s[0];
  int rank = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i)
    if (s[i] > thresh) ++rank;
  return rank;
}

Matrix row_space_basis(const Matrix& design) {
  Eigen::BDCSVD<Matrix> svd(design, Eigen::ComputeThinV);
  const auto& s = svd.singularValues();
  int rank = 0;
  if (s.size() > 0 && s[0] > 0.0) {
    const double thresh = static_cast<double>(std::max(design.rows(), design.cols())) *
                          std::numeric_limits<double>::epsilon() * s[0];
    for (Eigen::Index i = 0; i < s.size(); ++i)
      if (s[i] > thresh) ++rank;
  }
  return svd.matrixV().leftCols(rank);
}

FlaggedValue project_kernel_l1(const Vector& v, const Matrix& row_basis, double rho, Vector& out, int max_iters,
                               double tol) {
  check_radius(rho, "rho");
  const Eigen::Index d = v.size();
  FlaggedValue flag;
  if (rho == 0.0) {
    out = Vector::Zero(d);
    return flag;
  }
  auto to_kernel = [&](const Vector& x) -> Vector {
    if (row_basis.cols() == 0) return x;
    return x - row_basis * (row_basis.transpose() * x);
  };
  std::vector<double> scratch;
  // Dykstra: x alternates between the kernel (y) and the l1 ball (x), with
  // correction terms p, q for each set.
  Vector x = v;
  Vector p = Vector::Zero(d);
  Vector q = Vector::Zero(d);
  Vector y(d);
  Vector prev(d);
  flag.converged = false;
  for (int it = 1; it <= max_iters; ++it) {
    prev = x;
    y = to_kernel(x + p);
    p = x + p - y;
    x = y + q;
    project_l1_inplace(x, rho, scratch);
    q = y + q - x;
    flag.iterations = it;
    // x can repeat exactly for a step (same vertex of the l1 ball), so the
    // two sets' iterates must also agree
    const double scale = tol * std::max(1.0, rho);
    if ((x - prev).norm() <= scale && (x - y).norm() <= scale) {
      flag.converged = true;
      break;
    }
  }
  out = x;
  flag.value = (x - y).norm();  // distance between the last iterates of the two sets
  return flag;
}

KernelWidthEstimate kernel_section_width(const Matrix& design, double rho, int samples, std::uint64_t seed,
                                         const SolverOptions& opts, int threads) {
  check_radius(rho, "rho");
  opts.validate();
  if (samples < 2) throw InputError("samples must be at least 2");
  const int d = static_cast<int>(design.cols());
  const Matrix basis = row_space_basis(design);
  if (basis.cols() >= d) throw DomainError("kernel is trivial");

  KernelWidthEstimate est;
  std::vector<double> vals(static_cast<std::size_t>(samples), 0.0);
  std::vector<double> norms(static_cast<std::size_t>(samples), 0.0);
  std::vector<char> ok(static_cast<std::size_t>(samples), 1);
  if (rho > 0.0) {
    parallel_for(vals.size(), threads, [&](std::size_t i) {
      const Vector g = gaussian_sample(d, seed, i);
      const double gn = g.norm();
      Vector h = Vector::Zero(d);
      Vector next(d);
      double value = 0.0;
      const double step = rho / std::max(gn, 1e-300);
      bool conv = false;
      // Projected gradient ascent on <g,h> with a step of the size of the set.
      for (int it = 0; it < std::min(opts.max_iters, kKernelAscentSteps); ++it) {
        const FlaggedValue pf = project_kernel_l1(h + step * g, basis, rho, next);
        if (!pf.converged) ok[i] = 0;
        const double nv = g.dot(next);
        if (nv < value) break;
        const double gain = nv - value;
        h = next;
        value = nv;
        if (it > 0 && gain <= kKernelAscentTol * nv) {
          conv = true;
          break;
        }
      }
      if (!conv) ok[i] = 0;
      vals[i] = value;
      norms[i] = h.norm();
    });
  }
  est.width = summarize_samples(vals);
  est.width.set = {SetKind::kKernelL1, rho, 0.0, static_cast<int>(design.rows()), d};
  est.diameter_proxy = 2.0 * *std::max_element(norms.begin(), norms.end());
  est.converged = std::all_of(ok.begin(), ok.end(), [](char c) { return c != 0; });
  return est;
}

}  // namespace minimax
