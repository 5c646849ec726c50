#include "ib/attack_loss.hpp"

#include <algorithm>
#include <cmath>

#include "ib/errors.hpp"
#include "ib/ops.hpp"
#include "ib/tape.hpp"

namespace ib {

const char* attack_loss_name(AttackLoss k) {
  switch (k) {
    case AttackLoss::cross_entropy: return "ce";
    case AttackLoss::dlr: return "dlr";
    case AttackLoss::margin: return "margin";
  }
  return "?";
}

AttackLoss attack_loss_from_name(const std::string& s) {
  if (s == "ce") return AttackLoss::cross_entropy;
  if (s == "dlr") return AttackLoss::dlr;
  if (s == "margin") return AttackLoss::margin;
  throw ConfigError("unknown attack loss '" + s + "' (ce, dlr or margin)");
}

namespace {

// Per-example objective from "logit" rows (real logits in mean mode, log mean
// probabilities in stochastic mode — both orderings match the prediction).
// `score_values` carries the same numbers detached, used only to pick the
// argsort indices, which the backward pass treats as constants.
Tensor objective_from_scores(
    const Tensor& scores, const std::vector<double>& score_values,
    std::span<const std::int32_t> y, AttackLoss kind,
    std::span<const std::int32_t> targets,
    const std::function<Tensor(std::span<const std::int32_t>)>& gather) {
  std::int64_t n = scores.dim(0), C = scores.dim(1);

  if (kind == AttackLoss::cross_entropy)
    return scale(gather(y), -1.0);

  if (kind == AttackLoss::margin) {
    if (static_cast<std::int64_t>(targets.size()) != n)
      throw ContractError("margin loss needs one target class per example");
    for (std::size_t i = 0; i < targets.size(); ++i)
      if (targets[i] == y[i])
        throw ContractError("margin loss target equals the true label");
    return sub(gather(targets), gather(y));
  }

  // dlr: (z_best_other - z_y) / (z_pi1 - z_pi3 + 1e-12)
  if (C < 3)
    throw ConfigError("dlr loss needs at least 3 classes, model has " +
                      std::to_string(C));
  std::vector<std::int32_t> best_other(static_cast<std::size_t>(n));
  std::vector<std::int32_t> pi1(static_cast<std::size_t>(n));
  std::vector<std::int32_t> pi3(static_cast<std::size_t>(n));
  std::vector<std::int32_t> order(static_cast<std::size_t>(C));
  for (std::int64_t i = 0; i < n; ++i) {
    const double* row = score_values.data() + i * C;
    for (std::int64_t c = 0; c < C; ++c) order[static_cast<std::size_t>(c)] = static_cast<std::int32_t>(c);
    std::stable_sort(order.begin(), order.end(),
                     [row](std::int32_t a, std::int32_t b) { return row[a] > row[b]; });
    pi1[static_cast<std::size_t>(i)] = order[0];
    pi3[static_cast<std::size_t>(i)] = order[2];
    std::int32_t yy = y[static_cast<std::size_t>(i)];
    for (std::int32_t c : order)
      if (c != yy) {
        best_other[static_cast<std::size_t>(i)] = c;
        break;
      }
  }
  Tensor num = sub(gather(best_other), gather(y));
  Tensor den = add_scalar(sub(gather(pi1), gather(pi3)), 1e-12);
  return div(num, den);
}

}  // namespace

LossAndGrad attack_loss_grad(const Model& m, const Tensor& x,
                             std::span<const std::int32_t> y, AttackLoss kind,
                             std::span<const std::int32_t> targets, GradMode gmode,
                             int S, std::span<Rng> noise, bool want_grad) {
  std::int64_t n = x.dim(0);
  std::int64_t C = m.arch.num_classes;
  if (static_cast<std::int64_t>(y.size()) != n)
    throw ContractError("attack_loss_grad: label count mismatch");

  Tape tape;
  Tensor xin = x.dtype() == m.arch.dtype ? x : x.astype(m.arch.dtype);
  Tensor xv = tape.var(xin);

  bool stochastic = m.arch.kind != ModelKind::det && gmode == GradMode::stochastic;

  Tensor per_example;
  if (m.arch.kind == ModelKind::det) {
    Tensor logits = det_logits(m.arch, m.params, xv);
    Tensor scores = log_softmax(logits);
    std::vector<double> vals = scores.detached().to_vector();
    auto gather = [&scores](std::span<const std::int32_t> idx) {
      return take_per_row(scores, idx);
    };
    per_example = objective_from_scores(scores, vals, y, kind, targets, gather);
  } else if (!stochastic) {
    Encoded enc = encode(m.arch, m.params, xv);
    Tensor scores = log_softmax(decode_logits(m.arch, m.params, enc.mu));
    std::vector<double> vals = scores.detached().to_vector();
    auto gather = [&scores](std::span<const std::int32_t> idx) {
      return take_per_row(scores, idx);
    };
    per_example = objective_from_scores(scores, vals, y, kind, targets, gather);
  } else {
    if (S < 1) throw ConfigError("stochastic attack gradients need S >= 1");
    if (static_cast<std::int64_t>(noise.size()) != n)
      throw ContractError("attack_loss_grad: need one noise stream per example");
    std::int64_t K = m.arch.bottleneck;
    Encoded enc = encode(m.arch, m.params, xv);
    std::vector<Tensor> sample_logprobs;  // S tensors [n, C]
    sample_logprobs.reserve(static_cast<std::size_t>(S));
    for (int s = 0; s < S; ++s) {
      std::vector<double> nz(static_cast<std::size_t>(n * K));
      for (std::int64_t i = 0; i < n; ++i)
        noise[static_cast<std::size_t>(i)].fill_normal(
            {nz.data() + i * K, static_cast<std::size_t>(K)});
      Tensor nt = Tensor::from({n, K}, std::move(nz));
      if (m.arch.dtype != DType::f64) nt = nt.astype(m.arch.dtype);
      Tensor z = gaussian_reparam_sample(enc.mu, enc.sigma, nt);
      sample_logprobs.push_back(log_softmax(decode_logits(m.arch, m.params, z)));
    }
    double logS = std::log(static_cast<double>(S));
    // log mean prob for a class-index vector, [n]
    auto gather = [&](std::span<const std::int32_t> idx) {
      std::vector<Tensor> cols;
      cols.reserve(sample_logprobs.size());
      for (const Tensor& lp : sample_logprobs) cols.push_back(take_per_row(lp, idx));
      return add_scalar(logsumexp(stack_cols(cols)), -logS);
    };
    // detached full score matrix to pick sort indices
    std::vector<double> vals(static_cast<std::size_t>(n * C));
    {
      std::vector<std::vector<double>> lps;
      lps.reserve(sample_logprobs.size());
      for (const Tensor& lp : sample_logprobs) lps.push_back(lp.detached().to_vector());
      for (std::int64_t i = 0; i < n * C; ++i) {
        double mx = lps[0][static_cast<std::size_t>(i)];
        for (int s = 1; s < S; ++s) mx = std::max(mx, lps[static_cast<std::size_t>(s)][static_cast<std::size_t>(i)]);
        double acc = 0.0;
        for (int s = 0; s < S; ++s)
          acc += std::exp(lps[static_cast<std::size_t>(s)][static_cast<std::size_t>(i)] - mx);
        vals[static_cast<std::size_t>(i)] = mx + std::log(acc) - logS;
      }
    }
    // scores tensor argument is only used for shape/gather plumbing in the
    // mean-mode paths; pass the first sample's log-probs for shape.
    per_example = objective_from_scores(sample_logprobs[0], vals, y, kind, targets, gather);
  }

  LossAndGrad out;
  out.loss = per_example.detached().to_vector();

  if (want_grad) {
    Tensor total = sum(per_example);
    tape.backward(total);
    Tensor g = tape.grad(xv);
    out.grad = g.dtype() == DType::f64 ? g : g.astype(DType::f64);
  }
  return out;
}

}  // namespace ib
