#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "ib/dataset.hpp"
#include "ib/diagnostics.hpp"
#include "ib/losses.hpp"
#include "ib/model.hpp"
#include "ib/train.hpp"

namespace ib {

enum class ToyModel { linear_det, vib };

const char* toy_model_name(ToyModel m);
ToyModel toy_model_from_name(const std::string& s);

// Recipe for the synthetic tasks: SGD(lr 0.003, momentum 0.9, Nesterov),
// batches of 1024 resampled from the generator every iteration, fixed
// 10,000-example evaluation set, S = 12 for every stochastic pass.
struct ToyRunConfig {
  TaskKind task = TaskKind::toy_ours;  // toy_ours | toy_tsipras
  ToyModel model = ToyModel::linear_det;
  int bottleneck = 0;      // 0 = task default (2 for ours, 25 for tsipras)
  double beta = 0.01;      // vib rate weight
  std::int64_t iterations = 0;  // 0 = task default (1000 ours, 200 tsipras)
  std::int64_t batch_size = 1024;
  double lr = 0.003;
  double momentum = 0.9;
  bool nesterov = true;
  std::int64_t eval_n = 10000;
  int samples = 12;
  RateEstimator estimator = RateEstimator::sampled;  // the objective as written
  std::uint64_t seed = 0;
};

ToyRunConfig resolved_toy_config(const ToyRunConfig& cfg);  // fills defaults

// Feature-space attacks specific to each generator. The toy domain is
// unbounded; no box clipping applies.

// Moves x2 across the origin: x2 -> x2 - eps * sign(x2). With eps = 1 this
// flips the sign of the short feature wherever |x2| < 1, turning the 90%
// agreeing mass into disagreeing evidence (and vice versa for the 10%).
// x1 is untouched; labels are only used for shape validation.
Tensor attack_ours_x2(const Tensor& x, std::span<const std::int32_t> y,
                      double epsilon = 1.0);

// Label-directed variant: x2 -> x2 - eps * y with y in {-1, +1}. Every
// example's x2 moves toward the wrong-class side, so an x2-only classifier
// scores 0 instead of the sign variant's 0.1. Reported alongside the sign
// variant because the two disagree only on the 10% low-density mass.
Tensor attack_ours_x2_label(const Tensor& x, std::span<const std::int32_t> y,
                            double epsilon = 1.0);

// Shifts every Gaussian feature by -2*eta*y, moving its mean from eta*y to
// -eta*y; x1 is untouched. The L-inf budget of this attack is 2*eta.
Tensor attack_tsipras_shift(const Tensor& x, std::span<const std::int32_t> y,
                            double eta);

// Draws from the generator conditioned on the low-density branch of x2
// (sign(x2) != y); x1 keeps its correct-class marginal and labels keep the
// generating y. A pre-computed adversarial set for the "ours" task.
LabeledDataset sample_low_density_adversarials(std::int64_t n,
                                               std::uint64_t seed);

// Standard normal CDF (closed-form oracle accuracies use it).
double std_normal_cdf(double z);

// Closed-form reference classifiers with their analytic clean/robust
// accuracies under the task's attack.
struct ToyOracle {
  std::string name;
  double clean_acc = 0.0;
  double robust_acc = 0.0;
  std::function<std::vector<std::int32_t>(const Tensor& x)> predict;
};

std::vector<ToyOracle> bayes_oracles(TaskKind which);

// Fraction of labels matched by a prediction rule on a dataset slice.
double oracle_accuracy(const ToyOracle& oracle, const Tensor& x,
                       std::span<const std::int32_t> y);

struct ToyReport {
  ToyRunConfig config;  // resolved
  TrainResult train;
  RobustnessReport report;  // one row per (attack, eval mode)
};

// Trains the configured model and scores it clean and attacked (plus the
// low-density set for the "ours" task) in every applicable evaluation mode.
ToyReport run_toy(const ToyRunConfig& cfg);

}  // namespace ib
