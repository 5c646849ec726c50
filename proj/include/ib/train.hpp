#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ib/dataset.hpp"
#include "ib/losses.hpp"
#include "ib/model.hpp"

namespace ib {

enum class OptKind { adam, sgd };

struct OptimizerConfig {
  OptKind kind = OptKind::adam;
  double lr = 1e-4;
  // adam
  double beta1 = 0.5;
  double beta2 = 0.999;
  double eps = 1e-8;
  // sgd
  double momentum = 0.0;
  bool nesterov = false;
};

// lr(e) = lr0 * factor^floor(e / every_epochs); every_epochs = 0 disables.
struct LrSchedule {
  double factor = 1.0;
  std::int64_t every_epochs = 0;
};

// Linear ramp of the rate weight from `initial` to `target` over
// `ramp_epochs` epochs, constant afterwards. Disabled: the model's own
// weight (beta / exp(-rho)) applies throughout.
struct AnnealSchedule {
  bool enabled = false;
  double initial = 0.0;
  double target = 0.0;
  std::int64_t ramp_epochs = 0;
};

struct TrainConfig {
  OptimizerConfig opt;
  LrSchedule schedule;
  std::int64_t epochs = 0;      // shuffled-epochs mode
  std::int64_t iterations = 0;  // resample mode (synthetic tasks)
  std::int64_t batch_size = 100;
  bool resample = false;
  double polyak = 0.0;  // EMA decay per step; 0 disables
  AnnealSchedule anneal;
  RateEstimator estimator = RateEstimator::analytic;
  std::uint64_t seed = 0;
  std::int64_t eval_every = 1;  // epochs (or history points in resample mode)
  int eval_samples = 12;        // S for history accuracy
};

void validate_train_config(const TrainConfig& cfg);

struct HistoryRow {
  std::int64_t step = 0;  // epoch (shuffle mode) or iteration (resample mode)
  double loss = 0.0;
  double ce = 0.0;
  double rate = 0.0;
  double lr = 0.0;
  double rate_weight = 0.0;
  double eval_acc = -1.0;  // -1 when no eval set was given
};

struct TrainResult {
  Model model;                     // evaluation parameters (Polyak if enabled)
  std::vector<Tensor> raw_params;  // last raw iterate
  bool polyak_used = false;
  std::vector<HistoryRow> history;
};

// Trains `init` (which carries beta/rho/S) on `data`. Divergence (non-finite
// loss) raises NumericError naming the step and the last finite loss.
TrainResult train(const Model& init, const LabeledDataset& data,
                  const LabeledDataset* eval_data, const TrainConfig& cfg);

}  // namespace ib
