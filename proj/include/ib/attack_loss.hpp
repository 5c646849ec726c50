#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "ib/model.hpp"
#include "ib/rng.hpp"
#include "ib/tensor.hpp"

namespace ib {

// Objectives an attacker ascends. For stochastic models the "logits" feeding
// each objective are log mean class probabilities over S reparameterized
// samples, log((1/S) sum_s q(c|z_s)), computed stably via logsumexp of
// per-sample log-softmax outputs; the cross-entropy objective is therefore
// the CE of the averaged class distribution, not the average of CEs.
enum class AttackLoss { cross_entropy, dlr, margin };

const char* attack_loss_name(AttackLoss k);
AttackLoss attack_loss_from_name(const std::string& s);

// How the attacker queries the model for gradients: through the mean of the
// encoder (decode mu) or through the sample average.
enum class GradMode { mean, stochastic };

struct LossAndGrad {
  std::vector<double> loss;  // per example
  Tensor grad;               // [n, d] d(loss_i)/d(x_i), undefined if !want_grad
};

// Evaluates the per-example attack objective and (optionally) its input
// gradient. `noise` holds one stream per row for stochastic mode, advanced
// S*K normals per call so repeated calls continue each trajectory's stream.
// `targets` is required for the margin loss (z_target - z_label); `dlr`
// needs at least 3 classes.
LossAndGrad attack_loss_grad(const Model& m, const Tensor& x,
                             std::span<const std::int32_t> y, AttackLoss kind,
                             std::span<const std::int32_t> targets, GradMode gmode,
                             int S, std::span<Rng> noise, bool want_grad = true);

}  // namespace ib
