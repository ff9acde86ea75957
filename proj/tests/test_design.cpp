#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

#include "doctest.h"
#include "minimax/design.hpp"
#include "minimax/errors.hpp"

using namespace minimax;

namespace {

ProblemConfig gaussian(int n, int d, std::uint64_t seed) {
  ProblemConfig c;
  c.N = n;
  c.d = d;
  c.seed = seed;
  return c;
}

std::string tmp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("minimax_test_" + name)).string();
}

}  // namespace

TEST_CASE("gen_design is deterministic and thread independent") {
  const auto c = gaussian(2, 2, 42);
  CHECK(gen_design(c) == gen_design(c));
  const auto big = gaussian(50, 70, 3);
  CHECK(gen_design(big, 1) == gen_design(big, 4));
  CHECK(gen_design(big) != gen_design(gaussian(50, 70, 4)));
}

TEST_CASE("gen_design entries are standard normal") {
  const Matrix x = gen_design(gaussian(1000, 1000, 7));
  const double n = static_cast<double>(x.size());
  const double mean = x.sum() / n;
  const double var = (x.array() - mean).square().sum() / (n - 1);
  CHECK(std::abs(mean) <= 4.0 / std::sqrt(n));
  CHECK(std::abs(var - 1.0) <= 0.01);
}

TEST_CASE("isotropy proxy over 200 designs") {
  std::mt19937_64 gen(1);
  std::normal_distribution<double> nd;
  Vector t(32);
  for (int j = 0; j < 32; ++j) t[j] = nd(gen);
  double acc = 0.0;
  for (int k = 0; k < 200; ++k) acc += (gen_design(gaussian(128, 32, 1000 + k)) * t).squaredNorm() / 128.0;
  CHECK(std::abs(acc / 200 / t.squaredNorm() - 1.0) <= 0.05);
}

TEST_CASE("gen_response") {
  const Matrix x = gen_design(gaussian(30, 5, 1));
  const Vector t = Vector::LinSpaced(5, -1, 1);
  CHECK(gen_response(x, t, 0.0, 9) == x * t);
  const Matrix xl = gen_design(gaussian(10000, 2, 2));
  const Vector y0 = gen_response(xl, Vector::Zero(2), 1.5, 3);
  CHECK(std::abs(y0.mean()) <= 4 * 1.5 / 100.0);
  const Vector t2 = Vector::Ones(2);
  const Vector e = gen_response(xl, t2, 2.0, 3) - xl * t2;
  const double var = (e.array() - e.mean()).square().sum() / (e.size() - 1);
  CHECK(std::abs(var / 4.0 - 1.0) <= 0.05);
  // noise does not depend on the design stream
  CHECK((gen_response(xl, t2, 2.0, 3) - xl * t2 - (gen_response(2 * xl, t2, 2.0, 3) - 2 * xl * t2)).norm() < 1e-9);
  CHECK_THROWS_AS(gen_response(x, Vector::Zero(4), 1.0, 1), InputError);
}

TEST_CASE("gen_target kinds") {
  TargetSpec sp;
  sp.kind = TargetSpec::Kind::kSparse;
  sp.s = 8;
  sp.amplitude = 0.375;
  const Vector t = gen_target(sp, 100, 5);
  CHECK(std::abs(t.lpNorm<1>() - 3.0) <= 1e-12);
  CHECK((t.array() != 0.0).count() == 8);
  CHECK((t.array().abs() == 0.375 || t.array() == 0.0).all());
  CHECK(t == gen_target(sp, 100, 5));
  CHECK(t != gen_target(sp, 100, 6));

  TargetSpec dn;
  dn.kind = TargetSpec::Kind::kDense;
  dn.l1_norm = 2.5;
  CHECK(std::abs(gen_target(dn, 40, 1).lpNorm<1>() - 2.5) <= 1e-12);
  TargetSpec spike;
  spike.kind = TargetSpec::Kind::kSpike;
  spike.l1_norm = 0.2;
  const Vector e = gen_target(spike, 10, 1);
  CHECK(e[0] == 0.2);
  CHECK(e.lpNorm<1>() == 0.2);
  CHECK(gen_target(TargetSpec{}, 10, 1).norm() == 0.0);
  sp.s = 101;
  CHECK_THROWS_AS(gen_target(sp, 100, 1), InputError);
}

TEST_CASE("normalize_columns") {
  const auto id = normalize_columns(Matrix::Identity(3, 3));
  CHECK(id.design == Matrix::Identity(3, 3));
  CHECK(id.rescaled == 0);
  Matrix m(2, 2);
  m << 3, 0.1, 0, 0.2;
  const auto r = normalize_columns(m);
  CHECK(r.scale[0] == doctest::Approx(1.0 / 3.0));
  CHECK(r.design.col(0).norm() == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(r.design.col(1) == m.col(1));
  m.col(1).setZero();
  CHECK_THROWS_AS(normalize_columns(m), InputError);

  const Matrix g = gen_design(gaussian(512, 200, 8)) / std::sqrt(512.0);
  const auto gn = normalize_columns(g);
  for (Eigen::Index j = 0; j < 200; ++j) {
    CHECK(std::abs(g.col(j).norm() - 1.0) < 0.2);
    CHECK(gn.design.col(j).norm() <= 1.0 + 1e-15);
  }
}

TEST_CASE("rip_sparsity and rip_check") {
  CHECK(rip_sparsity(200, 40) == 40);
  CHECK(rip_sparsity(256, 512) == static_cast<int>(std::floor(256 / std::log(2 * std::exp(1.0)))));
  CHECK_THROWS_AS(rip_check(Matrix::Zero(2, 1000), 10, 1), DomainError);

  const auto id = rip_check(std::sqrt(6.0) * Matrix::Identity(6, 6), 100, 1);
  CHECK(id.exhaustive);
  CHECK(id.supports_checked == 1);
  CHECK(id.min_ratio == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(id.max_ratio == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(id.pass);

  CHECK_FALSE(rip_check(Matrix::Zero(6, 6), 100, 1).pass);

  const auto g = rip_check(gen_design(gaussian(200, 40, 11)), 100, 1);
  CHECK(g.s == 40);
  CHECK(g.exhaustive);
  CHECK(g.pass);
  CHECK(g.min_ratio >= 0.5);
  CHECK(g.max_ratio <= 1.5);
}

TEST_CASE("rip_check enumerates small families and samples large ones") {
  // N=12, d=14: s = floor(12/log(14e/12)) = 10, C(14,10) = 1001
  const Matrix x = gen_design(gaussian(12, 14, 2));
  const auto all = rip_check(x, 5000, 1);
  CHECK(all.s == 10);
  CHECK(all.exhaustive);
  CHECK(all.supports_checked == 1001);
  const auto some = rip_check(x, 50, 1, 3);
  CHECK_FALSE(some.exhaustive);
  CHECK(some.supports_checked == 50);
  CHECK(some.min_ratio >= all.min_ratio);
  CHECK(some.max_ratio <= all.max_ratio);
  const auto again = rip_check(x, 50, 1, 1);
  CHECK(again.min_ratio == some.min_ratio);
  CHECK(again.max_ratio == some.max_ratio);
}

TEST_CASE("matrix and dataset files round trip") {
  const Matrix m = gen_design(gaussian(7, 3, 4));
  const auto bin = tmp_path("m.bin");
  save_matrix_binary(m, bin);
  CHECK(load_matrix_binary(bin) == m);
  CHECK(load_matrix(bin) == m);

  Dataset ds;
  ds.design = m;
  ds.responses = Vector::LinSpaced(7, 0, 1);
  const auto csv = tmp_path("d.csv");
  save_dataset_csv(ds, csv);
  const Dataset back = load_dataset_csv(csv);
  CHECK(back.design == m);
  CHECK(back.responses == ds.responses);

  const auto mcsv = tmp_path("m.csv");
  {
    std::ofstream out(mcsv);
    out << "1,2\n3,4\n";
  }
  const Matrix small = load_matrix(mcsv);
  CHECK(small.rows() == 2);
  CHECK(small(1, 0) == 3.0);
  {
    std::ofstream out(mcsv);
    out << "1,2\n3\n";
  }
  CHECK_THROWS_AS(load_matrix_csv(mcsv), InputError);
  {
    std::ofstream out(bin, std::ios::binary);
    out << "MMXDSGN1";
  }
  CHECK_THROWS_AS(load_matrix_binary(bin), InputError);
  std::remove(bin.c_str());
  std::remove(csv.c_str());
  std::remove(mcsv.c_str());
}

TEST_CASE("fixed design config") {
  ProblemConfig c = gaussian(3, 2, 1);
  c.design_kind = DesignKind::kFixed;
  CHECK_THROWS_AS(c.validate(), InputError);
  c.fixed_design = std::make_shared<const Matrix>(Matrix::Ones(3, 2));
  CHECK(gen_design(c) == Matrix::Ones(3, 2));
  c.N = 4;
  CHECK_THROWS_AS(gen_design(c), InputError);
}
