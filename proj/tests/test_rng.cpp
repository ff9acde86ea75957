#include <cmath>
#include <vector>

#include "doctest.h"
#include "minimax/parallel.hpp"
#include "minimax/rng.hpp"

using namespace minimax;

TEST_CASE("philox known answers") {
  // Reference vectors from the Random123 distribution.
  auto z = rng::philox4x32({0, 0, 0, 0}, {0, 0});
  CHECK(z[0] == 0x6627e8d5u);
  CHECK(z[1] == 0xe169c58du);
  CHECK(z[2] == 0xbc57ac4cu);
  CHECK(z[3] == 0x9b00dbd8u);
  auto f = rng::philox4x32({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu}, {0xffffffffu, 0xffffffffu});
  CHECK(f[0] == 0x408f276du);
  CHECK(f[1] == 0x41c83b0eu);
  CHECK(f[2] == 0xa20bc7c6u);
  CHECK(f[3] == 0x6d5451fdu);
}

TEST_CASE("streams depend only on seed, stream and index") {
  rng::CounterStream a(42, rng::Stream::kNoise);
  rng::CounterStream b(42, rng::Stream::kNoise);
  rng::CounterStream c(42, rng::Stream::kDesign);
  std::vector<double> x(7), y(7), z(7);
  a.normals(3, x);
  b.normals(9, z);
  b.normals(3, y);
  CHECK(x == y);
  c.normals(3, z);
  CHECK(x != z);
}

TEST_CASE("normal moments") {
  rng::CounterStream s(2024, rng::Stream::kWidth);
  const std::size_t n = 200000;
  std::vector<double> v(n);
  s.normals(0, v);
  double m = 0, q = 0;
  for (double x : v) {
    m += x;
    q += x * x;
  }
  m /= n;
  q /= n;
  CHECK(std::abs(m) < 4.0 / std::sqrt(double(n)));
  CHECK(std::abs(q - 1.0) < 0.01);
}

TEST_CASE("uniforms lie in the open unit interval") {
  rng::CounterStream s(5, rng::Stream::kSupport);
  std::vector<double> u(10001);
  s.uniforms(1, u);
  double m = 0;
  for (double x : u) {
    CHECK(x > 0.0);
    CHECK(x < 1.0);
    m += x;
  }
  CHECK(std::abs(m / u.size() - 0.5) < 0.01);
}

TEST_CASE("derive_seed separates paths") {
  CHECK(rng::derive_seed(1, {0, 1}) != rng::derive_seed(1, {1, 0}));
  CHECK(rng::derive_seed(1, {2, 3}) == rng::derive_seed(1, {2, 3}));
  CHECK(rng::derive_seed(1, {2}) != rng::derive_seed(2, {2}));
}

TEST_CASE("parallel_for result independent of worker count") {
  std::vector<double> a(1000), b(1000);
  parallel_for(a.size(), 1, [&](std::size_t i) { a[i] = std::sin(double(i)); });
  parallel_for(b.size(), 7, [&](std::size_t i) { b[i] = std::sin(double(i)); });
  CHECK(pairwise_sum(a.data(), a.size()) == pairwise_sum(b.data(), b.size()));
}
