#pragma once

#include "minimax/types.hpp"

namespace minimax {

/// Euclidean projection onto rho*B_1^d by sort-based thresholding, O(d log d).
Vector project_l1(const Vector& v, double rho);

/// In-place variant; `scratch` is reused between calls to avoid allocation.
void project_l1_inplace(Eigen::Ref<Vector> v, double rho, std::vector<double>& scratch);

/// Componentwise soft-thresholding sign(v) * max(|v| - lambda, 0).
Vector soft_threshold(const Vector& v, double lambda);

}  // namespace minimax
