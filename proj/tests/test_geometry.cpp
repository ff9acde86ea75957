#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"
#include "minimax/errors.hpp"
#include "minimax/geometry.hpp"
#include "oracles.hpp"

using namespace minimax;

namespace {

Vector vec(std::initializer_list<double> xs) {
  Vector v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v[i++] = x;
  return v;
}

Vector randn(std::mt19937_64& gen, int d) {
  std::normal_distribution<double> n;
  Vector v(d);
  for (int i = 0; i < d; ++i) v[i] = n(gen);
  return v;
}

}  // namespace

TEST_CASE("support_l1l2 trivial cases") {
  Vector e1 = Vector::Zero(5);
  e1[0] = 1.0;
  CHECK(support_l1l2(e1, 0.5, 1.0) == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(support_l1l2(vec({3, 4}), 10.0, 1.0) == doctest::Approx(5.0).epsilon(1e-14));
  CHECK(support_l1l2(vec({3, 4}), 1.0, 10.0) == doctest::Approx(4.0).epsilon(1e-14));
  CHECK(support_l1l2(vec({3, 4}), 0.0, 10.0) == 0.0);
  CHECK(support_l1l2(vec({0, 0}), 1.0, 1.0) == 0.0);
}

TEST_CASE("support_l1l2 at (3,4), rho=1.2, r=1 against both oracles") {
  const Vector g = vec({3, 4});
  const double grid = oracle::support_lambda_grid(g, 1.2, 1.0);
  const double mesh = oracle::support_boundary_mesh(g, 1.2, 1.0);
  CHECK(std::abs(grid - mesh) < 1e-6);
  CHECK(support_l1l2(g, 1.2, 1.0) == doctest::Approx(grid).epsilon(1e-6));
  // Both constraints bind: a + b = 1.2, a^2 + b^2 = 1.
  const double a = (1.2 - std::sqrt(0.56)) / 2, b = 1.2 - a;
  CHECK(support_l1l2(g, 1.2, 1.0) == doctest::Approx(3 * a + 4 * b).epsilon(1e-12));
}

TEST_CASE("support_l1l2 input errors") {
  CHECK_THROWS_AS(support_l1l2(vec({1, NAN}), 1.0, 1.0), InputError);
  CHECK_THROWS_AS(support_l1l2(vec({1, 2}), -1.0, 1.0), InputError);
  CHECK_THROWS_AS(support_l1l2(vec({1, 2}), 1.0, -0.1), InputError);
}

TEST_CASE("support_l1l2 matches the lambda grid on random instances") {
  std::mt19937_64 gen(11);
  std::uniform_real_distribution<double> u(0.01, 3.0);
  for (int k = 0; k < 200; ++k) {
    const int d = 2 + k % 40;
    const Vector g = randn(gen, d);
    const double rho = u(gen), r = u(gen);
    const double ref = oracle::support_lambda_grid(g, rho, r);
    CHECK(support_l1l2(g, rho, r) == doctest::Approx(ref).epsilon(1e-9));
  }
}

TEST_CASE("homogeneity and radius scaling are exact") {
  std::mt19937_64 gen(3);
  std::uniform_real_distribution<double> u(0.05, 4.0);
  for (int k = 0; k < 500; ++k) {
    const int d = 1 + k % 100;
    const Vector g = randn(gen, d);
    const double rho = u(gen), r = u(gen), a = u(gen);
    const double base = support_l1l2(g, rho, r);
    const Vector ga = a * g;
    CHECK(std::abs(support_l1l2(ga, rho, r) - a * base) <= 1e-12 * std::max(1.0, a * base));
    CHECK(std::abs(support_l1l2(g, a * rho, a * r) - a * base) <= 1e-12 * std::max(1.0, a * base));
  }
}

TEST_CASE("envelope bound with equality when a constraint is slack") {
  std::mt19937_64 gen(5);
  std::uniform_real_distribution<double> u(0.01, 5.0);
  for (int k = 0; k < 1000; ++k) {
    const int d = 1 + k % 64;
    const Vector g = randn(gen, d);
    const double rho = u(gen), r = u(gen);
    const double h = support_l1l2(g, rho, r);
    const double linf = rho * g.cwiseAbs().maxCoeff();
    const double l2 = r * g.norm();
    CHECK(h <= std::min(linf, l2) * (1 + 1e-12));
    // l2 slack: the l1 maximizer rho*sign*e_j has norm rho <= r.
    if (rho <= r) CHECK(h == doctest::Approx(linf).epsilon(1e-12));
    // l1 slack: r*g/|g| has l1 norm <= rho.
    if (r * g.lpNorm<1>() / g.norm() <= rho) CHECK(h == doctest::Approx(l2).epsilon(1e-12));
  }
}

TEST_CASE("localization identity when r >= rho") {
  std::mt19937_64 gen(8);
  std::uniform_real_distribution<double> u(0.1, 3.0);
  for (int k = 0; k < 100; ++k) {
    const Vector g = randn(gen, 50);
    const double rho = u(gen);
    const double r = rho * (1.0 + u(gen));
    CHECK(std::abs(support_l1l2(g, rho, r) - rho * g.cwiseAbs().maxCoeff()) <= 1e-9);
  }
}

TEST_CASE("monotone in both radii") {
  std::mt19937_64 gen(9);
  for (int k = 0; k < 200; ++k) {
    const Vector g = randn(gen, 30);
    double prev = 0.0;
    for (double rho = 0.1; rho < 10; rho *= 1.3) {
      const double h = support_l1l2(g, rho, 1.0);
      CHECK(h >= prev);
      prev = h;
    }
    prev = 0.0;
    for (double r = 0.05; r < 5; r *= 1.3) {
      const double h = support_l1l2(g, 2.0, r);
      CHECK(h >= prev);
      prev = h;
    }
  }
}

TEST_CASE("gaussian_mean_width closed forms") {
  CHECK(gaussian_mean_width({0.0, 1.0, 10}, 100, 1).value == 0.0);
  CHECK(gaussian_mean_width({0.0, 1.0, 10}, 100, 1).std_error == 0.0);
  const WidthEstimate w1 = gaussian_mean_width({1.0, 2.0, 1}, 10000, 7);
  CHECK(std::abs(w1.value - std::sqrt(2.0 / std::numbers::pi)) <= 3 * w1.std_error);
  const WidthEstimate w16 = gaussian_mean_width({1e6, 1.0, 16}, 10000, 7);
  const double chi16 = std::sqrt(2.0) * std::exp(std::lgamma(8.5) - std::lgamma(8.0));
  CHECK(chi16 == doctest::Approx(3.9385).epsilon(1e-4));
  CHECK(std::abs(w16.value - chi16) <= 3 * w16.std_error);
  CHECK_THROWS_AS(gaussian_mean_width({1.0, 1.0, 4}, 1, 7), InputError);
}

TEST_CASE("gaussian_mean_width is deterministic across thread counts") {
  const WidthEstimate a = gaussian_mean_width({2.0, 0.7, 300}, 500, 99, 1);
  const WidthEstimate b = gaussian_mean_width({2.0, 0.7, 300}, 500, 99, 4);
  CHECK(a.value == b.value);
  CHECK(a.std_error == b.std_error);
  GaussianSampleSet s1(300, 500, 99, 1), s3(300, 500, 99, 3);
  CHECK(s1.width(2.0, 0.7).value == a.value);
  CHECK(s3.width(2.0, 0.7).value == a.value);
}

TEST_CASE("stderr shrinks like one over root n") {
  const WidthEstimate small = gaussian_mean_width({3.0, 1.0, 64}, 400, 21);
  const WidthEstimate big = gaussian_mean_width({3.0, 1.0, 64}, 6400, 21);
  const double ratio = small.std_error / big.std_error;
  CHECK(ratio > 3.0);
  CHECK(ratio < 5.3);
}

TEST_CASE("support_image_l1l2 trivial and identity cases") {
  std::mt19937_64 gen(4);
  const Matrix eye = Matrix::Identity(6, 6);
  const Vector g = randn(gen, 6);
  CHECK(support_image_l1l2(g, eye, 0.0, 1.0).value == 0.0);
  for (double rho : {0.3, 1.0, 2.5}) {
    for (double r : {0.2, 0.9, 3.0}) {
      const FlaggedValue v = support_image_l1l2(g, eye, rho, r);
      CHECK(v.converged);
      CHECK(v.value == doctest::Approx(support_l1l2(g, rho, r)).epsilon(1e-6));
    }
  }
}

TEST_CASE("support_image_l1l2 agrees with the mesh oracle at d=3") {
  std::mt19937_64 gen(17);
  std::uniform_real_distribution<double> u(0.2, 2.0);
  for (int k = 0; k < 6; ++k) {
    Matrix x(3, 3);
    for (int i = 0; i < 9; ++i) x(i / 3, i % 3) = randn(gen, 1)[0];
    const Vector g = randn(gen, 3);
    const double c = u(gen), r = u(gen);
    const double ref = oracle::image_support_mesh(g, x, c, r);
    const FlaggedValue v = support_image_l1l2(g, x, c, r);
    CHECK(std::abs(v.value - ref) <= 1e-4 * std::max(1.0, ref));
  }
}

TEST_CASE("kernel_section_width") {
  // Kernel spanned by e_1: the section is the segment [-rho, rho] e_1.
  Matrix x = Matrix::Zero(4, 5);
  for (int i = 0; i < 4; ++i) x(i, i + 1) = 1.0;
  const KernelWidthEstimate k0 = kernel_section_width(x, 0.0, 50, 3);
  CHECK(k0.width.value == 0.0);
  const KernelWidthEstimate k = kernel_section_width(x, 1.5, 2000, 3);
  CHECK(std::abs(k.width.value - 1.5 * std::sqrt(2.0 / std::numbers::pi)) <= 3 * k.width.std_error);
  CHECK(k.diameter_proxy == doctest::Approx(3.0).epsilon(1e-6));
  CHECK_THROWS_AS(kernel_section_width(Matrix::Identity(3, 3), 1.0, 10, 1), DomainError);
}

TEST_CASE("project_kernel_l1 lands in both sets") {
  std::mt19937_64 gen(12);
  Matrix x(3, 8);
  for (int i = 0; i < 24; ++i) x(i / 8, i % 8) = randn(gen, 1)[0];
  const Matrix q = row_space_basis(x);
  CHECK(q.cols() == 3);
  CHECK(numerical_rank(x) == 3);
  const Vector v = 3.0 * randn(gen, 8);
  Vector out;
  const FlaggedValue f = project_kernel_l1(v, q, 1.0, out);
  CHECK(f.converged);
  CHECK(out.lpNorm<1>() <= 1.0 + 1e-9);
  CHECK((x * out).norm() <= 1e-6);
}
