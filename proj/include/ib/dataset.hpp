#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ib/rng.hpp"
#include "ib/tensor.hpp"

namespace ib {

enum class TaskKind { mnist, toy_ours, toy_tsipras };

const char* task_name(TaskKind k);
TaskKind task_from_name(const std::string& name);  // ConfigError on unknown

struct LabeledDataset {
  Tensor x;  // [n, d] f64
  std::vector<std::int32_t> y;
  std::int64_t num_classes = 0;
  TaskKind kind = TaskKind::mnist;
  bool bounded01 = false;  // true for pixel data constrained to [0,1]
  std::string name;
  std::uint64_t fingerprint = 0;

  std::int64_t n() const { return x.dim(0); }
  std::int64_t dim() const { return x.dim(1); }

  // First `count` examples (attacks and diagnostics work on slices).
  LabeledDataset head(std::int64_t count) const;
};

// Loads train or test split from a directory holding the four classic IDX
// files. Validates magics, sizes, and image/label count agreement.
LabeledDataset load_mnist(const std::string& dir, bool train);

// Fixed synthetic evaluation sets (deterministic in seed).
LabeledDataset make_toy_dataset(TaskKind kind, std::int64_t n, std::uint64_t seed);

// Content hash of an (x, y) pairing, used to stamp generated datasets.
std::uint64_t dataset_fingerprint(const Tensor& x,
                                  const std::vector<std::int32_t>& y);

// Per-batch view handed to training.
struct Batch {
  Tensor x;
  std::vector<std::int32_t> y;
};

// Two modes:
//  * shuffle: a fixed dataset visited once per epoch under a per-epoch
//    permutation (partial trailing batch included);
//  * resample: every batch is a fresh draw from the task's generator —
//    synthetic tasks only, a file-backed dataset cannot be resampled.
class BatchIterator {
 public:
  BatchIterator(const LabeledDataset& ds, std::int64_t batch_size,
                std::uint64_t seed, bool resample = false);

  Batch next();
  std::int64_t epochs_completed() const { return epoch_; }
  std::int64_t batches_served() const { return served_; }

 private:
  void reshuffle();

  const LabeledDataset* ds_;
  std::int64_t batch_size_;
  std::uint64_t seed_;
  bool resample_;
  std::vector<std::int64_t> order_;
  std::int64_t cursor_ = 0;
  std::int64_t epoch_ = 0;
  std::int64_t served_ = 0;
};

// Writes "label,f0,f1,..." rows; byte-deterministic float formatting.
void export_dataset_csv(const LabeledDataset& ds, const std::string& path,
                        std::int64_t limit = -1);

}  // namespace ib
