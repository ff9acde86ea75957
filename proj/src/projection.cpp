#include "minimax/projection.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "minimax/errors.hpp"

namespace minimax {

void project_l1_inplace(Eigen::Ref<Vector> v, double rho, std::vector<double>& scratch) {
  if (!(rho >= 0.0)) throw InputError("project_l1: rho must be nonnegative");
  if (rho == 0.0) {
    v.setZero();
    return;
  }
  const double l1 = v.lpNorm<1>();
  if (l1 <= rho) return;

  scratch.resize(static_cast<std::size_t>(v.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i) scratch[static_cast<std::size_t>(i)] = std::abs(v[i]);
  std::sort(scratch.begin(), scratch.end(), std::greater<>());

  // Largest k with u_k > (sum_{i<=k} u_i - rho) / k.
  double cumsum = 0.0;
  double theta = 0.0;
  for (std::size_t k = 0; k < scratch.size(); ++k) {
    cumsum += scratch[k];
    const double candidate = (cumsum - rho) / static_cast<double>(k + 1);
    if (scratch[k] > candidate) theta = candidate;
    else break;
  }
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    const double m = std::abs(v[i]) - theta;
    v[i] = m > 0.0 ? std::copysign(m, v[i]) : 0.0;
  }
}

Vector project_l1(const Vector& v, double rho) {
  Vector out = v;
  std::vector<double> scratch;
  project_l1_inplace(out, rho, scratch);
  return out;
}

Vector soft_threshold(const Vector& v, double lambda) {
  Vector out(v.size());
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    const double m = std::abs(v[i]) - lambda;
    out[i] = m > 0.0 ? std::copysign(m, v[i]) : 0.0;
  }
  return out;
}

}  // namespace minimax
