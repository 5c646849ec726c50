#include <algorithm>
#include <cstdint>
#include <set>
#include <vector>

#include "doctest.h"
#include "ib/dataset.hpp"
#include "ib/errors.hpp"

using ib::BatchIterator;
using ib::LabeledDataset;
using ib::TaskKind;

namespace {

// Tiny dataset whose x values encode the example index, so batches reveal
// exactly which rows they carry.
LabeledDataset indexed_dataset(std::int64_t n) {
  std::vector<double> x(static_cast<std::size_t>(n));
  std::vector<std::int32_t> y(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i) {
    x[static_cast<std::size_t>(i)] = static_cast<double>(i);
    y[static_cast<std::size_t>(i)] = static_cast<std::int32_t>(i % 2);
  }
  LabeledDataset ds;
  ds.x = ib::Tensor::from({n, 1}, std::move(x));
  ds.y = std::move(y);
  ds.num_classes = 2;
  ds.kind = TaskKind::toy_ours;  // generative kind, so resample is legal too
  ds.name = "indexed";
  return ds;
}

std::vector<std::int64_t> drain_epoch(BatchIterator& it, std::int64_t n,
                                      std::int64_t batch) {
  std::vector<std::int64_t> seen;
  while (static_cast<std::int64_t>(seen.size()) < n) {
    ib::Batch b = it.next();
    const std::int64_t want = std::min(batch, n - static_cast<std::int64_t>(seen.size()));
    REQUIRE(b.x.dim(0) == want);
    REQUIRE(static_cast<std::int64_t>(b.y.size()) == want);
    for (std::int64_t i = 0; i < b.x.dim(0); ++i)
      seen.push_back(static_cast<std::int64_t>(b.x.at(i)));
  }
  return seen;
}

}  // namespace

TEST_CASE("shuffle mode visits every example exactly once per epoch") {
  LabeledDataset ds = indexed_dataset(23);
  BatchIterator it(ds, 5, /*seed=*/1);

  auto e0 = drain_epoch(it, 23, 5);  // 4 full batches + trailing batch of 3
  CHECK(it.epochs_completed() == 1);
  CHECK(it.batches_served() == 5);
  std::set<std::int64_t> uniq(e0.begin(), e0.end());
  CHECK(uniq.size() == 23);
  CHECK(*uniq.begin() == 0);
  CHECK(*uniq.rbegin() == 22);

  // labels travel with their rows
  BatchIterator it2(ds, 5, /*seed=*/1);
  ib::Batch b = it2.next();
  for (std::int64_t i = 0; i < b.x.dim(0); ++i) {
    const auto idx = static_cast<std::int64_t>(b.x.at(i));
    CHECK(b.y[static_cast<std::size_t>(i)] == ds.y[static_cast<std::size_t>(idx)]);
  }
}

TEST_CASE("epochs reshuffle, seeds reproduce") {
  LabeledDataset ds = indexed_dataset(64);
  BatchIterator a(ds, 16, 7), b(ds, 16, 7), c(ds, 16, 8);
  auto a0 = drain_epoch(a, 64, 16);
  auto b0 = drain_epoch(b, 64, 16);
  auto c0 = drain_epoch(c, 64, 16);
  CHECK(a0 == b0);    // same seed, same order
  CHECK(a0 != c0);    // different seed, different order (64! orders; collision
                      // would indicate seeding is ignored)
  auto a1 = drain_epoch(a, 64, 16);
  CHECK(a0 != a1);    // second epoch under a fresh permutation
  std::sort(a1.begin(), a1.end());
  for (std::int64_t i = 0; i < 64; ++i) CHECK(a1[static_cast<std::size_t>(i)] == i);
}

TEST_CASE("shuffling is a permutation, not a with-replacement draw") {
  LabeledDataset ds = indexed_dataset(200);
  BatchIterator it(ds, 200, 3);
  auto seen = drain_epoch(it, 200, 200);
  std::sort(seen.begin(), seen.end());
  for (std::int64_t i = 0; i < 200; ++i) CHECK(seen[static_cast<std::size_t>(i)] == i);
}

TEST_CASE("resample mode draws fresh batches from the generator") {
  LabeledDataset ds = ib::make_toy_dataset(TaskKind::toy_ours, 4, 5);
  BatchIterator it(ds, 8, 5, /*resample=*/true);
  ib::Batch b0 = it.next();
  ib::Batch b1 = it.next();
  CHECK(b0.x.dim(0) == 8);  // batch size is free of the template's size
  CHECK(b0.x.dim(1) == 2);
  bool differ = false;
  for (std::int64_t i = 0; i < b0.x.size(); ++i)
    differ = differ || b0.x.at(i) != b1.x.at(i);
  CHECK(differ);

  // deterministic in the seed
  BatchIterator it2(ds, 8, 5, /*resample=*/true);
  ib::Batch c0 = it2.next();
  for (std::int64_t i = 0; i < b0.x.size(); ++i) CHECK(b0.x.at(i) == c0.x.at(i));
  CHECK(b0.y == c0.y);
}

TEST_CASE("file-backed data cannot be resampled") {
  LabeledDataset ds = indexed_dataset(8);
  ds.kind = TaskKind::mnist;
  CHECK_THROWS_AS(BatchIterator(ds, 4, 0, /*resample=*/true), ib::ConfigError);
}

TEST_CASE("batch size larger than the dataset serves the whole set") {
  LabeledDataset ds = indexed_dataset(5);
  BatchIterator it(ds, 100, 0);
  ib::Batch b = it.next();
  CHECK(b.x.dim(0) == 5);
  CHECK(it.epochs_completed() == 1);
}
