#include "ib/dataset.hpp"

#include <algorithm>
#include <cstring>
#include <numeric>

#include "ib/csv.hpp"
#include "ib/errors.hpp"
#include "ib/idx.hpp"
#include "ib/toy_data.hpp"

namespace ib {

const char* task_name(TaskKind k) {
  switch (k) {
    case TaskKind::mnist: return "mnist";
    case TaskKind::toy_ours: return "toy-ours";
    case TaskKind::toy_tsipras: return "toy-tsipras";
  }
  return "?";
}

TaskKind task_from_name(const std::string& name) {
  if (name == "mnist") return TaskKind::mnist;
  if (name == "toy-ours") return TaskKind::toy_ours;
  if (name == "toy-tsipras") return TaskKind::toy_tsipras;
  throw ConfigError("unknown dataset '" + name +
                    "' (expected mnist, toy-ours or toy-tsipras)");
}

LabeledDataset LabeledDataset::head(std::int64_t count) const {
  if (count < 0 || count > n())
    throw ContractError("head: count " + std::to_string(count) + " out of range");
  LabeledDataset out = *this;
  std::int64_t d = dim();
  auto src = x.f64();
  std::vector<double> v(src.begin(), src.begin() + count * d);
  out.x = Tensor::from({count, d}, std::move(v));
  out.y.assign(y.begin(), y.begin() + count);
  out.name = name + "[:" + std::to_string(count) + "]";
  return out;
}

LabeledDataset load_mnist(const std::string& dir, bool train) {
  std::string img = dir + (train ? "/train-images-idx3-ubyte" : "/t10k-images-idx3-ubyte");
  std::string lab = dir + (train ? "/train-labels-idx1-ubyte" : "/t10k-labels-idx1-ubyte");
  IdxImages xs = load_idx_images(img);
  IdxLabels ys = load_idx_labels(lab);
  if (xs.x.dim(0) != static_cast<std::int64_t>(ys.y.size()))
    throw DataError("image/label count mismatch: " + std::to_string(xs.x.dim(0)) +
                    " images vs " + std::to_string(ys.y.size()) + " labels");
  for (std::int32_t v : ys.y)
    if (v < 0 || v > 9) throw DataError(lab + ": label " + std::to_string(v) + " out of range");
  LabeledDataset ds;
  ds.x = std::move(xs.x);
  ds.y = std::move(ys.y);
  ds.num_classes = 10;
  ds.kind = TaskKind::mnist;
  ds.bounded01 = true;
  ds.name = train ? "mnist-train" : "mnist-test";
  ds.fingerprint = splitmix64(xs.file_hash ^ splitmix64(ys.file_hash));
  return ds;
}

std::uint64_t dataset_fingerprint(const Tensor& x,
                                  const std::vector<std::int32_t>& y) {
  auto v = x.f64();
  std::uint64_t h = fnv1a64({reinterpret_cast<const unsigned char*>(v.data()),
                             v.size() * sizeof(double)});
  std::uint64_t hy = fnv1a64({reinterpret_cast<const unsigned char*>(y.data()),
                              y.size() * sizeof(std::int32_t)});
  return splitmix64(h ^ splitmix64(hy));
}

namespace {

ToySample draw_toy(TaskKind kind, std::int64_t n, Rng& rng) {
  switch (kind) {
    case TaskKind::toy_ours: return sample_toy_ours(n, rng);
    case TaskKind::toy_tsipras: return sample_toy_tsipras(ToyTsiprasSpec{}, n, rng);
    default: throw ContractError("draw_toy: not a synthetic task");
  }
}

}  // namespace

LabeledDataset make_toy_dataset(TaskKind kind, std::int64_t n, std::uint64_t seed) {
  if (kind == TaskKind::mnist)
    throw ConfigError("make_toy_dataset: mnist is file-backed, not generated");
  Rng rng = Rng::derive(seed, {Rng::kDataset, 0});
  ToySample s = draw_toy(kind, n, rng);
  LabeledDataset ds;
  ds.x = std::move(s.x);
  ds.y = std::move(s.y);
  ds.num_classes = 2;
  ds.kind = kind;
  ds.bounded01 = false;
  ds.name = std::string(task_name(kind)) + "-n" + std::to_string(n) + "-s" +
            std::to_string(seed);
  ds.fingerprint = dataset_fingerprint(ds.x, ds.y);
  return ds;
}

BatchIterator::BatchIterator(const LabeledDataset& ds, std::int64_t batch_size,
                             std::uint64_t seed, bool resample)
    : ds_(&ds), batch_size_(batch_size), seed_(seed), resample_(resample) {
  if (batch_size < 1) throw ConfigError("batch size must be >= 1");
  if (resample_ && ds.kind == TaskKind::mnist)
    throw ConfigError("resample mode needs a generative task; '" + ds.name +
                      "' is file-backed");
  if (!resample_) {
    if (ds.n() < 1) throw ConfigError("empty dataset");
    reshuffle();
  }
}

void BatchIterator::reshuffle() {
  order_.resize(static_cast<std::size_t>(ds_->n()));
  std::iota(order_.begin(), order_.end(), 0);
  Rng rng = Rng::derive(seed_, {Rng::kShuffle, static_cast<std::uint64_t>(epoch_)});
  // Fisher-Yates
  for (std::size_t i = order_.size(); i > 1; --i) {
    std::size_t j = static_cast<std::size_t>(rng.next_u64() % i);
    std::swap(order_[i - 1], order_[j]);
  }
  cursor_ = 0;
}

Batch BatchIterator::next() {
  if (resample_) {
    Rng rng = Rng::derive(seed_, {Rng::kToySample, static_cast<std::uint64_t>(served_)});
    ToySample s = draw_toy(ds_->kind, batch_size_, rng);
    ++served_;
    return {std::move(s.x), std::move(s.y)};
  }
  std::int64_t n = ds_->n(), d = ds_->dim();
  std::int64_t take = std::min(batch_size_, n - cursor_);
  std::vector<double> v(static_cast<std::size_t>(take * d));
  std::vector<std::int32_t> y(static_cast<std::size_t>(take));
  auto src = ds_->x.f64();
  for (std::int64_t i = 0; i < take; ++i) {
    std::int64_t row = order_[static_cast<std::size_t>(cursor_ + i)];
    std::memcpy(v.data() + i * d, src.data() + row * d,
                static_cast<std::size_t>(d) * sizeof(double));
    y[static_cast<std::size_t>(i)] = ds_->y[static_cast<std::size_t>(row)];
  }
  cursor_ += take;
  ++served_;
  if (cursor_ >= n) {
    ++epoch_;
    reshuffle();
  }
  return {Tensor::from({take, d}, std::move(v)), std::move(y)};
}

void export_dataset_csv(const LabeledDataset& ds, const std::string& path,
                        std::int64_t limit) {
  std::int64_t n = limit < 0 ? ds.n() : std::min(limit, ds.n());
  CsvTable t;
  t.header.push_back("label");
  for (std::int64_t j = 0; j < ds.dim(); ++j)
    t.header.push_back("f" + std::to_string(j));
  auto v = ds.x.f64();
  for (std::int64_t i = 0; i < n; ++i) {
    std::vector<std::string> row;
    row.reserve(static_cast<std::size_t>(ds.dim()) + 1);
    row.push_back(format_int(ds.y[static_cast<std::size_t>(i)]));
    for (std::int64_t j = 0; j < ds.dim(); ++j)
      row.push_back(format_double(v[i * ds.dim() + j]));
    t.rows.push_back(std::move(row));
  }
  write_csv(path, t);
}

}  // namespace ib
