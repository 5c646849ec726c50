#include <cmath>
#include <cstdint>
#include <vector>

#include "doctest.h"
#include "ib/rng.hpp"

using ib::Rng;

TEST_CASE("same seed and stream reproduce the sequence exactly") {
  Rng a(42, 7);
  Rng b(42, 7);
  for (int i = 0; i < 1000; ++i) CHECK(a.next_u64() == b.next_u64());
  Rng c(42, 7);
  Rng d(42, 7);
  for (int i = 0; i < 100; ++i) CHECK(c.normal() == d.normal());
}

TEST_CASE("streams and seeds decorrelate") {
  Rng a(42, 7);
  Rng b(42, 8);
  Rng c(43, 7);
  int same_ab = 0, same_ac = 0;
  for (int i = 0; i < 64; ++i) {
    std::uint64_t x = a.next_u64();
    if (x == b.next_u64()) ++same_ab;
    Rng a2(42, 7);
    if (x == c.next_u64()) ++same_ac;
  }
  CHECK(same_ab == 0);
  CHECK(same_ac == 0);
}

TEST_CASE("derive depends on path order and values") {
  Rng a = Rng::derive(1, {Rng::kAttackInit, 3, 5});
  Rng b = Rng::derive(1, {Rng::kAttackInit, 5, 3});
  Rng c = Rng::derive(1, {Rng::kAttackNoise, 3, 5});
  std::uint64_t xa = a.next_u64();
  CHECK(xa != b.next_u64());
  CHECK(xa != c.next_u64());

  // derivation is pure: same path twice gives the same stream
  Rng d = Rng::derive(1, {Rng::kAttackInit, 3, 5});
  CHECK(d.next_u64() == xa);
}

TEST_CASE("uniform lies in [0,1) with the right moments") {
  Rng r(123, 0);
  const int n = 100000;
  double sum = 0.0, sum2 = 0.0;
  for (int i = 0; i < n; ++i) {
    double u = r.uniform();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
    sum += u;
    sum2 += u * u;
  }
  double m = sum / n;
  double var = sum2 / n - m * m;
  CHECK(std::fabs(m - 0.5) < 0.005);         // sd of mean ~ 0.0009
  CHECK(std::fabs(var - 1.0 / 12.0) < 0.003);
}

TEST_CASE("uniform chi-square goodness of fit over 16 bins") {
  Rng r(2024, 11);
  const int n = 65536, bins = 16;
  std::vector<int> count(bins, 0);
  for (int i = 0; i < n; ++i)
    ++count[static_cast<int>(r.uniform() * bins)];
  double expected = static_cast<double>(n) / bins;
  double chi2 = 0.0;
  for (int c : count) {
    double d = c - expected;
    chi2 += d * d / expected;
  }
  // chi-square critical value, 15 dof, alpha = 0.001
  CHECK(chi2 < 37.697);
}

TEST_CASE("normal moments and tail mass") {
  Rng r(7, 3);
  const int n = 200000;
  double sum = 0.0, sum2 = 0.0;
  int within196 = 0;
  for (int i = 0; i < n; ++i) {
    double z = r.normal();
    sum += z;
    sum2 += z * z;
    if (std::fabs(z) < 1.96) ++within196;
  }
  double m = sum / n;
  double var = sum2 / n - m * m;
  CHECK(std::fabs(m) < 0.01);
  CHECK(std::fabs(var - 1.0) < 0.02);
  CHECK(std::fabs(within196 / static_cast<double>(n) - 0.95) < 0.005);
}

TEST_CASE("uniform(lo,hi) covers the interval") {
  Rng r(5, 5);
  double lo = 1e9, hi = -1e9;
  for (int i = 0; i < 10000; ++i) {
    double v = r.uniform(-0.3, 0.3);
    lo = std::min(lo, v);
    hi = std::max(hi, v);
    REQUIRE(v >= -0.3);
    REQUIRE(v < 0.3);
  }
  CHECK(lo < -0.29);
  CHECK(hi > 0.29);
}

TEST_CASE("fnv1a64 matches reference vectors") {
  // reference values from the FNV-1a specification
  const unsigned char a[] = {'a'};
  CHECK(ib::fnv1a64({a, 1}) == 0xAF63DC4C8601EC8Cull);
  const unsigned char foobar[] = {'f', 'o', 'o', 'b', 'a', 'r'};
  CHECK(ib::fnv1a64({foobar, 6}) == 0x85944171F73967E8ull);
  CHECK(ib::fnv1a64({}) == 0xCBF29CE484222325ull);
}
