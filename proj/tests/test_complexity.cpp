#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"
#include "minimax/complexity.hpp"
#include "minimax/errors.hpp"
#include "minimax/rng.hpp"

using namespace minimax;

namespace {

const double kE = std::numbers::e;

Matrix gaussian_matrix(int n, int d, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> g;
  Matrix x(n, d);
  for (int j = 0; j < d; ++j)
    for (int i = 0; i < n; ++i) x(i, j) = g(gen);
  return x;
}

Matrix unit_columns(Matrix x) {
  for (Eigen::Index j = 0; j < x.cols(); ++j) x.col(j) /= std::max(1.0, x.col(j).norm());
  return x;
}

}  // namespace

TEST_CASE("profiles") {
  const ConstantsProfile p = ConstantsProfile::paper_faithful();
  CHECK(p.eta == doctest::Approx(1.0 / (16.0 * std::sqrt(2.0))));
  CHECK(p.c0 == 14.0);
  CHECK(p.eta_prime == 0.125);
  CHECK(p.c0_prime == 2.0);
  CHECK(p.Q == 0.4);
  CHECK(p.zeta == 0.5);
  CHECK(p.zeta_prime == 2.0);
  const ConstantsProfile c = ConstantsProfile::calibrated();
  CHECK(c.eta == 0.5);
  CHECK(c.c0 == 2.0);
  CHECK(ConstantsProfile::by_name("paper").name == "paper-faithful");
  CHECK_THROWS_AS(ConstantsProfile::by_name("bogus"), InputError);
  ConstantsProfile bad = c;
  bad.zeta = 1.5;
  CHECK_THROWS_AS(bad.validate(), InputError);
}

TEST_CASE("fixed_point_rM scalar case and trivial inputs") {
  const ConstantsProfile p = ConstantsProfile::paper_faithful();
  CHECK(fixed_point_rM(1.0, 0.0, 100, 10, p, 1).r == 0.0);
  CHECK(fixed_point_rM(0.0, 1.0, 100, 10, p, 1).r == 0.0);
  // d = 1, huge rho: sigma*r*E|g| = eta r^2 sqrt N.
  ConstantsProfile q = p;
  q.mc_samples = 20000;
  const FixedPointResult res = fixed_point_rM(1e6, 1.0, 100, 1, q, 5);
  const double expect = std::sqrt(2.0 / std::numbers::pi) * 16.0 * std::sqrt(2.0) / 10.0;
  CHECK(expect == doctest::Approx(1.805).epsilon(1e-3));
  CHECK(std::abs(res.r - expect) <= 3.0 * res.r * res.rel_mc_error());
  CHECK(res.lo <= res.r);
  CHECK(res.r <= res.hi);
  // The fixed-point inequality holds at the returned radius.
  CHECK(1.0 * res.width_at_r <= q.eta * res.r * res.r * 10.0 * (1 + q.bisect_rel_tol));
}

TEST_CASE("fixed_point_rQ vanishes when E|G| <= Q sqrt N") {
  const ConstantsProfile p = ConstantsProfile::paper_faithful();
  const double chi4 = std::sqrt(2.0) * std::exp(std::lgamma(2.5) - std::lgamma(2.0));
  CHECK(chi4 == doctest::Approx(1.880).epsilon(1e-3));
  for (double rho : {0.01, 1.0, 100.0}) CHECK(fixed_point_rQ(rho, 100, 4, p, 3).r == 0.0);
  CHECK(fixed_point_rQ(0.0, 50, 200, p, 3).r == 0.0);
}

TEST_CASE("r_Q homogeneity under a shared seed") {
  const ConstantsProfile p = ConstantsProfile::paper_faithful();
  GaussianSampleSet s(200, p.mc_samples, 77);
  const double base = fixed_point_rQ(1.0, 50, s, p).r;
  CHECK(base > 0.0);
  for (double nu : {0.5, 2.0, 10.0}) {
    const double v = fixed_point_rQ(nu, 50, s, p).r;
    CHECK(v == doctest::Approx(nu * base).epsilon(0.02));
  }
  for (double nu : {0.5, 2.0, 10.0})
    CHECK(closed_rQ(nu, 50, 200, p) == doctest::Approx(nu * closed_rQ(1.0, 50, 200, p)).epsilon(1e-14));
}

TEST_CASE("r_M monotone, sqrt scaling in rho, growth and plateau") {
  const ConstantsProfile p = ConstantsProfile::paper_faithful();
  const int N = 64, d = 128;
  GaussianSampleSet s(d, p.mc_samples, 123);
  const DerivedRadii radii = derived_radii(1.0, N, d, 1.0, p);
  const std::vector<double> grid = log_grid(1e-3, radii.rho0 * std::min(1.0, p.eta) / 4.0, 10);
  double prev = 0.0;
  for (double rho : grid) {
    const FixedPointResult a = fixed_point_rM(rho, 1.0, N, s, p);
    const double tol = 3.0 * a.rel_mc_error();
    CHECK(a.r >= prev * (1 - 1e-6));
    prev = a.r;
    for (double nu : {1.5, 2.0, 4.0}) {
      const double up = fixed_point_rM(nu * rho, 1.0, N, s, p).r;
      CHECK(up <= std::sqrt(nu) * a.r * (1 + tol));
      const double down = fixed_point_rM(rho / nu, 1.0, N, s, p).r;
      CHECK(down >= a.r / std::sqrt(nu) * (1 - tol));
    }
    const double grown = fixed_point_rM(4.0 * rho, 1.0, N, s, p).r;
    CHECK(grown * grown > 2.0 * a.r * a.r * (1 - tol));
  }
  const double plateau = fixed_point_rM(radii.rho0, 1.0, N, s, p).r;
  for (double f : {1.0, 3.0, 100.0}) CHECK(fixed_point_rM(f * radii.rho0, 1.0, N, s, p).r == doctest::Approx(plateau).epsilon(1e-6));
}

TEST_CASE("closed_rM branches") {
  const ConstantsProfile p = ConstantsProfile::calibrated();
  CHECK(closed_rM(0.0, 1.0, 100, 1000, p) == 0.0);
  const double mid_sq = std::sqrt(0.01 * std::log(kE * 1000.0 / 10.0));
  CHECK(mid_sq == doctest::Approx(0.2367).epsilon(1e-3));
  CHECK(closed_rM(1.0, 1.0, 100, 1000, p) == doctest::Approx(std::sqrt(mid_sq)).epsilon(1e-12));
  CHECK(closed_rM(1.0, 1.0, 100, 1000, p) == doctest::Approx(0.4866).epsilon(1e-3));
  // Top branch: rho^2 N >= sigma^2 d^2.
  CHECK(closed_rM(200.0, 1.0, 100, 1000, p) == doctest::Approx(std::sqrt(1000.0 / 100.0)).epsilon(1e-12));
  // Bottom branch: rho^2 N <= sigma^2 log d.
  CHECK(closed_rM(0.1, 1.0, 100, 1000, p) ==
        doctest::Approx(std::sqrt(0.1 * std::sqrt(std::log(kE * 1000.0) / 100.0))).epsilon(1e-12));
  // d = 1 stays well-defined.
  CHECK(std::isfinite(closed_rM(0.01, 1.0, 10, 1, p)));
}

TEST_CASE("closed_rQ") {
  const ConstantsProfile p = ConstantsProfile::calibrated();
  CHECK(closed_rQ(1.0, 256, 64, p) == 0.0);
  CHECK(closed_rQ(1.0, 64, 1024, p) == doctest::Approx(std::sqrt(std::log(16.0 * kE) / 64.0)).epsilon(1e-12));
  CHECK(closed_rQ(1.0, 64, 1024, p) == doctest::Approx(0.2428).epsilon(1e-3));
  CHECK(closed_rQ(0.0, 64, 1024, p) == 0.0);
  CHECK(in_transition_band(100, 100, p));
  CHECK(!in_transition_band(40, 100, p));
  CHECK(!in_transition_band(200, 100, p));
}

TEST_CASE("closed form vs Monte Carlo ratio band (calibrated)") {
  const ConstantsProfile p = ConstantsProfile::calibrated();
  for (auto [N, d] : {std::pair{64, 256}, std::pair{1024, 64}}) {
    GaussianSampleSet s(d, p.mc_samples, 9);
    for (double rho : log_grid(0.01, 1000.0, 12)) {
      const double ratio = closed_rM(rho, 1.0, N, d, p) / fixed_point_rM(rho, 1.0, N, s, p).r;
      CHECK(ratio >= 0.2);
      CHECK(ratio <= 5.0);
      const double rq = fixed_point_rQ(rho, N, s, p).r;
      if (rq > 0.0) {
        CHECK(closed_rQ(rho, N, d, p) / rq >= 0.2);
        CHECK(closed_rQ(rho, N, d, p) / rq <= 5.0);
      }
    }
  }
}

TEST_CASE("psi") {
  const ConstantsProfile p = ConstantsProfile::calibrated();
  CHECK(psi(0.0, 1.0, 100, 50, p, PsiMode::kClosed, 1) == 0.0);
  CHECK(psi(0.0, 1.0, 100, 50, p, PsiMode::kMonteCarlo, 1) == 0.0);
  for (double rho : {0.1, 1.0, 10.0}) {
    CHECK(psi(rho, 0.0, 200, 50, p, PsiMode::kClosed, 1) == 0.0);
    // The Monte Carlo r_Q only vanishes once E|G|_2 <= Q sqrt N, i.e. N >~ 6.25 d at Q = 0.4.
    CHECK(psi(rho, 0.0, 400, 50, p, PsiMode::kMonteCarlo, 1) == 0.0);
    const double q = closed_rQ(rho, 50, 400, p);
    CHECK(psi(rho, 1.0, 50, 400, p, PsiMode::kClosed, 1) >= p.c0 * q * q * (1 - 1e-12));
  }
}

TEST_CASE("minimax_rate table") {
  const ConstantsProfile p = ConstantsProfile::calibrated();
  CHECK(minimax_rate(0.1, 1.0, 5, 1000, p).value == doctest::Approx(0.01).epsilon(1e-12));
  const RateValue mid = minimax_rate(1.0, 1.0, 100, 1000, p);
  CHECK(mid.branch == 1);
  CHECK(mid.value == doctest::Approx(std::sqrt(std::log(kE * 1e4) / 100.0)).epsilon(1e-12));
  CHECK(mid.value == doctest::Approx(0.3196).epsilon(1e-3));
  const RateValue top = minimax_rate(1e3, 1.0, 10000, 10, p);
  CHECK(top.branch == 2);
  CHECK(top.value == doctest::Approx(0.001).epsilon(1e-12));
  CHECK(minimax_rate(1.0, 1.0, 150, 100, p).upper_bound_only);
  CHECK(!minimax_rate(1.0, 1.0, 100, 1000, p).upper_bound_only);
}

TEST_CASE("minimax_rate against the closed envelope") {
  const ConstantsProfile p = ConstantsProfile::calibrated();
  std::mt19937_64 gen(31);
  std::uniform_real_distribution<double> lr(-3.0, 3.0);
  std::uniform_int_distribution<int> nd(1, 4000);
  int checked = 0;
  for (int k = 0; k < 5000; ++k) {
    const int N = nd(gen), d = nd(gen);
    if (in_transition_band(N, d, p)) continue;
    const double rho = std::pow(10.0, lr(gen)), sigma = std::pow(10.0, lr(gen) / 3);
    const RateValue mr = minimax_rate(rho, sigma, N, d, p);
    const double env = closed_rate_envelope(rho, sigma, N, d, p);
    ++checked;
    if (mr.branch == 0) {
      CHECK(mr.value == doctest::Approx(env).epsilon(1e-12));
    } else {
      CHECK(mr.value / env >= 0.5);
      CHECK(mr.value / env <= 2.0);
    }
  }
  CHECK(checked > 1000);
}

TEST_CASE("derived radii") {
  const ConstantsProfile p = ConstantsProfile::calibrated();
  const DerivedRadii z = derived_radii(0.0, 64, 16, 1.0, p);
  CHECK(z.r0 == 0.0);
  CHECK(z.rho0 == 0.0);
  CHECK(z.K0 == 0);
  ConstantsProfile q = p;
  q.eta = 0.125;
  const DerivedRadii a = derived_radii(1.0, 64, 16, 1.0, q);
  CHECK(a.r0 == doctest::Approx(4.0).epsilon(1e-14));
  CHECK(a.rho0 == doctest::Approx(16.0).epsilon(1e-14));
  const DerivedRadii b = derived_radii(1.0, 64, 16, 1.0, p);
  CHECK(b.rho_star == doctest::Approx(17.0).epsilon(1e-14));
  // 2^k * rho_star >= 2 rho0 for the minimal k.
  const DerivedRadii c = derived_radii(1.0, 64, 1024, 0.01, p);
  CHECK(std::ldexp(c.rho_star, c.K0) >= 2 * c.rho0);
  CHECK(std::ldexp(c.rho_star, c.K0 - 1) < 2 * c.rho0);
}

TEST_CASE("rbar_X") {
  const ConstantsProfile p = ConstantsProfile::calibrated();
  const Matrix eye = Matrix::Identity(256, 256);
  CHECK(rbar_X(0.0, eye, 1.0, p) == 0.0);
  CHECK(rbar_X(1e9, eye, 1.0, p) == doctest::Approx(1.0).epsilon(1e-12));
  const double third = 0.01 * std::sqrt(std::log(512.0 * kE) / 256.0);
  CHECK(third == doctest::Approx(0.0016815).epsilon(1e-4));
  CHECK(rbar_X(0.01, 256, 512, 256, 1.0, p) == doctest::Approx(std::sqrt(third)).epsilon(1e-12));
  CHECK(rbar_X(0.01, 256, 512, 256, 1.0, p) == doctest::Approx(0.0410).epsilon(1e-3));
  Matrix big = Matrix::Identity(4, 4);
  big(0, 0) = 3.0;
  CHECK_THROWS_AS(rbar_X(1.0, big, 1.0, p), InputError);
}

TEST_CASE("fixed_point_rX reduces to the l1/l2 case for the identity") {
  ConstantsProfile p = ConstantsProfile::paper_faithful();
  p.mc_samples = 200;
  p.bisect_rel_tol = 1e-6;
  const int n = 12;
  const Matrix eye = Matrix::Identity(n, n);
  CHECK(fixed_point_rX(1.0, eye, 0.0, p, 1).r == 0.0);
  ConstantsProfile m = p;
  m.eta = p.eta_prime;
  GaussianSampleSet s(n, p.mc_samples, 4);
  for (double rho : {0.05, 0.5, 5.0}) {
    const FixedPointResult x = fixed_point_rX(rho, eye, 1.0, p, 4, {5000, 1e-9});
    CHECK(x.converged);
    CHECK(x.r == doctest::Approx(fixed_point_rM(rho, 1.0, n, s, m).r).epsilon(1e-4));
  }
}

TEST_CASE("rbar_X dominates fixed_point_rX with C_X = 1/eta'^2") {
  ConstantsProfile p = ConstantsProfile::paper_faithful();
  p.mc_samples = 30;
  p.bisect_rel_tol = 1e-3;
  p.C_X = 1.0 / (p.eta_prime * p.eta_prime);
  for (auto [N, d] : {std::pair{200, 40}, std::pair{48, 96}}) {
    const Matrix a = unit_columns(gaussian_matrix(N, d, 8));
    for (double rho : log_grid(0.05, 50.0, 5)) {
      const FixedPointResult x = fixed_point_rX(rho, a, 1.0, p, 2, {3000, 1e-6});
      CHECK(x.r <= 1.1 * rbar_X(rho, a, 1.0, p));
    }
  }
}

TEST_CASE("gelfand_theoretical") {
  CHECK(gelfand_theoretical(0.0, 64, 512) == 0.0);
  CHECK(gelfand_theoretical(1.0, 64, 512) == doctest::Approx(std::sqrt(std::log(8 * kE) / 64)).epsilon(1e-12));
  CHECK(gelfand_theoretical(1.0, 64, 512) == doctest::Approx(0.2194).epsilon(1e-3));
  CHECK(gelfand_theoretical(2.0, 100, 50) == doctest::Approx(2.0 * std::sqrt(1.0 / 100)).epsilon(1e-12));
  CHECK(gelfand_theoretical_sq(1.0, 64, 512) == doctest::Approx(std::log(8 * kE) / 64).epsilon(1e-12));
}

TEST_CASE("complexity profile invariants") {
  const ConstantsProfile p = ConstantsProfile::calibrated();
  const std::vector<double> grid = log_grid(0.01, 100.0, 9);
  for (PsiMode mode : {PsiMode::kClosed, PsiMode::kMonteCarlo}) {
    const ComplexityProfile prof = complexity_profile(64, 256, 1.0, grid, p, mode, 5);
    for (std::size_t i = 0; i < grid.size(); ++i) {
      CHECK(prof.r[i] == std::max(prof.r_M[i], prof.r_Q[i]));
      CHECK(prof.psi[i] == doctest::Approx(p.c0 * prof.r[i] * prof.r[i]).epsilon(1e-14));
      if (i > 0) CHECK(prof.r_M[i] >= prof.r_M[i - 1] * (1 - 1e-6));
      CHECK(prof.r_Q[i] / grid[i] == doctest::Approx(prof.r_Q[0] / grid[0]).epsilon(0.02));
    }
  }
  const ComplexityProfile a = complexity_profile(64, 256, 1.0, grid, p, PsiMode::kMonteCarlo, 5, 1);
  const ComplexityProfile b = complexity_profile(64, 256, 1.0, grid, p, PsiMode::kMonteCarlo, 5, 3);
  CHECK(a.psi == b.psi);
  CHECK_THROWS_AS(complexity_profile(64, 256, 1.0, {1.0, 0.5}, p, PsiMode::kClosed, 5), InputError);
}

TEST_CASE("tabulated psi") {
  TabulatedPsi t({1.0, 2.0, 4.0}, {1.0, 0.9, 4.0});
  CHECK(t.values()[1] == 1.0);  // running maximum
  CHECK(t(0.0) == 0.0);
  CHECK(t(0.5) == doctest::Approx(0.5));
  CHECK(t(2.0) == doctest::Approx(1.0));
  CHECK(t(3.0) >= 1.0);
  CHECK(t(3.0) <= 4.0);
  CHECK(t(10.0) == doctest::Approx(25.0));  // slope 2 continued past the last node
  TabulatedPsi flat({1.0, 2.0, 4.0}, {1.0, 3.0, 3.0});
  CHECK(flat(100.0) == 3.0);
  double prev = 0.0;
  for (double r = 0.01; r < 10; r *= 1.1) {
    CHECK(t(r) >= prev);
    prev = t(r);
  }
}
