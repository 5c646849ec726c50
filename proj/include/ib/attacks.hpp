#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ib/attack_loss.hpp"
#include "ib/dataset.hpp"
#include "ib/model.hpp"

namespace ib {

// White-box L-inf attack suite. All attacks are batched over examples and
// deterministic given (seed, example id, restart): every trajectory draws
// from its own counter-based stream, so short-circuiting finished examples
// or slicing the dataset differently never changes another example's result.
struct AttackConfig {
  double epsilon = 0.0;
  double alpha = 0.0;  // pgd/mt step size
  int steps = 0;
  int restarts = 1;
  AttackLoss loss = AttackLoss::cross_entropy;
  std::optional<GradMode> grad_mode;  // default: stochastic for vib/ceb
  int samples = 12;                   // S for stochastic gradients
  std::optional<EvalMode> eval_mode;  // default: model's evaluation mode
  int eval_samples = 12;
  std::uint64_t seed = 0;
  bool stop_on_success = true;  // skip finished examples in later restarts
  bool bounded = false;         // project iterates into [lo, hi]^d
  double lo = 0.0, hi = 1.0;
};

GradMode resolved_grad_mode(const Model& m, const AttackConfig& cfg);
EvalMode resolved_eval_mode(const Model& m, const AttackConfig& cfg);
void validate_attack_config(const AttackConfig& cfg, bool needs_steps);

struct AttackOutcome {
  Tensor x_adv;  // [n, d] chosen adversarial points (f64)
  std::vector<std::uint8_t> success;
  std::vector<double> loss;  // objective value at the chosen point
  std::vector<std::int32_t> first_success_restart;  // -1 = never succeeded
  double epsilon = 0.0;
  bool bounded = false;
  double lo = 0.0, hi = 1.0;
  std::int64_t grad_evals = 0;  // per-example gradient evaluations, summed

  std::int64_t n() const { return static_cast<std::int64_t>(success.size()); }
  double success_rate() const;
};

// One signed-gradient step: x + eps * sign(grad), projected into bounds.
AttackOutcome fgs_attack(const Model& m, const Tensor& x,
                         std::span<const std::int32_t> y,
                         std::span<const std::int64_t> ids, const AttackConfig& cfg);

// Random-init projected gradient ascent. Within a restart the candidate is
// the best-objective iterate of the whole trajectory (x^0..x^T); across
// restarts the final answer is the best-objective successful candidate if
// any restart broke the example, else the best-objective candidate overall.
AttackOutcome pgd_attack(const Model& m, const Tensor& x,
                         std::span<const std::int32_t> y,
                         std::span<const std::int64_t> ids, const AttackConfig& cfg);

// Budget-aware PGD with momentum, adaptive step halving at fixed checkpoint
// fractions, and restart-from-best (cfg.loss ce or dlr; alpha is ignored,
// the step starts at 2*eps).
AttackOutcome auto_pgd_attack(const Model& m, const Tensor& x,
                              std::span<const std::int32_t> y,
                              std::span<const std::int64_t> ids,
                              const AttackConfig& cfg);

// Margin ascent cycling the target class over the non-true classes in
// ascending order as the restart index grows (restart r -> r mod (C-1)).
AttackOutcome multi_targeted_attack(const Model& m, const Tensor& x,
                                    std::span<const std::int32_t> y,
                                    std::span<const std::int64_t> ids,
                                    const AttackConfig& cfg);

struct EnsembleStageReport {
  std::string name;
  std::int64_t attacked = 0;  // examples still standing when the stage ran
  std::int64_t broke = 0;     // newly broken by this stage
  std::int64_t grad_evals = 0;
};

struct EnsembleReport {
  std::vector<EnsembleStageReport> stages;
  AttackOutcome combined;
  double robust_acc = 0.0;
  std::int64_t n = 0;
};

// APGD-CE (5 restarts, 100 steps) -> APGD-DLR (5, 100) -> MultiTargeted
// (10 restarts, 200 steps, alpha = eps/10), short-circuiting broken examples.
// Examples misclassified before any attack count as broken by stage "clean".
EnsembleReport ensemble_aa_mt(const Model& m, const Tensor& x,
                              std::span<const std::int32_t> y,
                              std::span<const std::int64_t> ids, double epsilon,
                              std::uint64_t seed, bool bounded, double lo = 0.0,
                              double hi = 1.0);

using AttackFn = std::function<AttackOutcome(
    const Model&, const Tensor&, std::span<const std::int32_t>,
    std::span<const std::int64_t>)>;

struct RobustEval {
  double standard_acc = 0.0;
  double robust_acc = 0.0;
  std::int64_t n = 0;
  AttackOutcome outcome;
};

// Runs `fn` on the first `limit` examples (all if -1), enforces the attack
// contract (L-inf radius and bounds) on the returned points, and scores
// robust accuracy under the given evaluation mode.
RobustEval robust_accuracy(const Model& m, const LabeledDataset& ds,
                           std::int64_t limit, const AttackFn& fn,
                           EvalMode eval_mode, int eval_samples,
                           std::uint64_t seed);

}  // namespace ib
