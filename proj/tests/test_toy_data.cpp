#include <cmath>
#include <cstdint>
#include <vector>

#include "doctest.h"
#include "ib/dataset.hpp"
#include "ib/errors.hpp"
#include "ib/rng.hpp"
#include "ib/toy_data.hpp"

using ib::Rng;
using ib::TaskKind;

TEST_CASE("mixture task respects its generating equations") {
  Rng rng(11, 0);
  const std::int64_t n = 100000;
  ib::ToySample s = ib::sample_toy_ours(n, rng);
  REQUIRE(s.x.dim(0) == n);
  REQUIRE(s.x.dim(1) == 2);
  REQUIRE(s.y.size() == static_cast<std::size_t>(n));

  std::int64_t x2_agrees = 0, ones = 0;
  double sum_abs_x1 = 0.0, sum_abs_x2 = 0.0;
  for (std::int64_t i = 0; i < n; ++i) {
    const double x1 = s.x.at(2 * i), x2 = s.x.at(2 * i + 1);
    const double yy = s.y[static_cast<std::size_t>(i)] == 1 ? 1.0 : -1.0;
    REQUIRE(s.x.at(2 * i) * yy >= 0.0);  // x1 always carries the label sign
    REQUIRE(std::fabs(x1) < 10.0);
    REQUIRE(std::fabs(x2) < 1.0);
    if (x2 * yy > 0.0) ++x2_agrees;
    ones += s.y[static_cast<std::size_t>(i)];
    sum_abs_x1 += std::fabs(x1);
    sum_abs_x2 += std::fabs(x2);
  }
  // binomial(0.9) at n=1e5: sd ~ 0.00095; label balance sd ~ 0.0016
  CHECK(std::fabs(x2_agrees / static_cast<double>(n) - 0.9) < 0.005);
  CHECK(std::fabs(ones / static_cast<double>(n) - 0.5) < 0.008);
  // |x1| ~ U(0,10): mean 5 (sd of mean ~ 0.009); |x2| ~ U(0,1): mean 0.5
  CHECK(std::fabs(sum_abs_x1 / static_cast<double>(n) - 5.0) < 0.05);
  CHECK(std::fabs(sum_abs_x2 / static_cast<double>(n) - 0.5) < 0.005);
}

TEST_CASE("correlated-gaussians task matches its spec constants") {
  const ib::ToyTsiprasSpec spec;  // d=100, p=0.95, eta=0.3
  Rng rng(12, 0);
  const std::int64_t n = 20000;
  ib::ToySample s = ib::sample_toy_tsipras(spec, n, rng);
  REQUIRE(s.x.dim(1) == spec.d + 1);

  std::int64_t x1_agrees = 0;
  double sum = 0.0, sum2 = 0.0;
  for (std::int64_t i = 0; i < n; ++i) {
    const double yy = s.y[static_cast<std::size_t>(i)] == 1 ? 1.0 : -1.0;
    const double x1 = s.x.at(i * (spec.d + 1));
    REQUIRE((x1 == 1.0 || x1 == -1.0));
    if (x1 == yy) ++x1_agrees;
    for (std::int64_t j = 1; j <= spec.d; ++j) {
      const double centered = s.x.at(i * (spec.d + 1) + j) - spec.eta * yy;
      sum += centered;
      sum2 += centered * centered;
    }
  }
  CHECK(std::fabs(x1_agrees / static_cast<double>(n) - spec.p) < 0.005);
  const double m = sum / static_cast<double>(n * spec.d);
  const double var = sum2 / static_cast<double>(n * spec.d) - m * m;
  CHECK(std::fabs(m) < 0.005);        // sd of mean ~ 0.0007
  CHECK(std::fabs(var - 1.0) < 0.01); // sd of var ~ 0.001
}

TEST_CASE("generators are deterministic in the rng state") {
  Rng a(99, 1), b(99, 1), c(100, 1);
  ib::ToySample s1 = ib::sample_toy_ours(64, a);
  ib::ToySample s2 = ib::sample_toy_ours(64, b);
  ib::ToySample s3 = ib::sample_toy_ours(64, c);
  CHECK(s1.y == s2.y);
  bool all_eq = true, any_diff = false;
  for (std::int64_t i = 0; i < s1.x.size(); ++i) {
    all_eq = all_eq && s1.x.at(i) == s2.x.at(i);
    any_diff = any_diff || s1.x.at(i) != s3.x.at(i);
  }
  CHECK(all_eq);
  CHECK(any_diff);
}

TEST_CASE("fixed evaluation sets carry task metadata and a content hash") {
  ib::LabeledDataset a = ib::make_toy_dataset(TaskKind::toy_ours, 500, 7);
  ib::LabeledDataset b = ib::make_toy_dataset(TaskKind::toy_ours, 500, 7);
  ib::LabeledDataset c = ib::make_toy_dataset(TaskKind::toy_ours, 500, 8);
  CHECK(a.num_classes == 2);
  CHECK(a.kind == TaskKind::toy_ours);
  CHECK_FALSE(a.bounded01);
  CHECK(a.n() == 500);
  CHECK(a.dim() == 2);
  CHECK(a.fingerprint == b.fingerprint);
  CHECK(a.fingerprint != c.fingerprint);
  CHECK(a.fingerprint == ib::dataset_fingerprint(a.x, a.y));

  ib::LabeledDataset t = ib::make_toy_dataset(TaskKind::toy_tsipras, 100, 7);
  CHECK(t.dim() == 101);
  CHECK(t.fingerprint != a.fingerprint);
}

TEST_CASE("head keeps the leading slice and its metadata") {
  ib::LabeledDataset a = ib::make_toy_dataset(TaskKind::toy_ours, 100, 3);
  ib::LabeledDataset h = a.head(10);
  CHECK(h.n() == 10);
  CHECK(h.dim() == 2);
  CHECK(h.num_classes == 2);
  CHECK(h.kind == TaskKind::toy_ours);
  for (std::int64_t i = 0; i < 20; ++i) CHECK(h.x.at(i) == a.x.at(i));
  for (std::size_t i = 0; i < 10; ++i) CHECK(h.y[i] == a.y[i]);
}

TEST_CASE("task names round trip and reject unknowns") {
  CHECK(ib::task_from_name("mnist") == TaskKind::mnist);
  CHECK(ib::task_from_name("toy-ours") == TaskKind::toy_ours);
  CHECK(ib::task_from_name("toy-tsipras") == TaskKind::toy_tsipras);
  CHECK(std::string(ib::task_name(TaskKind::toy_ours)) == "toy-ours");
  CHECK_THROWS_AS(ib::task_from_name("cifar"), ib::ConfigError);
}
