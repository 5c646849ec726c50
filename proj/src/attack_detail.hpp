#pragma once

// Internals shared by the attack translation units. Not installed.

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <span>
#include <vector>

#include "ib/attacks.hpp"
#include "ib/errors.hpp"
#include "ib/tensor.hpp"

namespace ib::detail {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Gathers the rows `idx` of x into a fresh [na, d] f64 tensor.
inline Tensor gather_rows(std::span<const double> x, std::int64_t d,
                          std::span<const std::int64_t> idx) {
  const auto na = static_cast<std::int64_t>(idx.size());
  Tensor out = Tensor::zeros({na, d});
  auto o = out.mut_f64();
  for (std::int64_t j = 0; j < na; ++j)
    std::memcpy(o.data() + j * d, x.data() + idx[j] * d,
                sizeof(double) * static_cast<std::size_t>(d));
  return out;
}

// L-inf ball around per-row centers, intersected with an optional box.
struct Ball {
  std::span<const double> center;  // [na, d], row j = original example
  double eps;
  bool bounded;
  double lo, hi;

  double project(std::int64_t j, std::int64_t d, std::int64_t k, double v) const {
    const double c = center[j * d + k];
    v = std::clamp(v, c - eps, c + eps);
    if (bounded) v = std::clamp(v, lo, hi);
    return v;
  }
};

// Per-example merge of one restart's candidate into the running answer:
// prefer successful candidates (best objective among them), otherwise the
// best-objective candidate seen so far.
struct Chosen {
  std::vector<double> x;  // [n, d]
  std::vector<std::uint8_t> success;
  std::vector<double> loss;                 // objective at the chosen point
  std::vector<double> best_fail_loss;       // best objective among failures
  std::vector<std::int32_t> first_success;  // restart index, -1 = none

  Chosen(std::int64_t n, std::int64_t d, std::span<const double> x0)
      : x(x0.begin(), x0.end()),
        success(static_cast<std::size_t>(n), 0),
        loss(static_cast<std::size_t>(n), kNegInf),
        best_fail_loss(static_cast<std::size_t>(n), kNegInf),
        first_success(static_cast<std::size_t>(n), -1) {}

  void merge(std::int64_t i, std::int64_t d, int restart, bool succ, double l,
             const double* cand) {
    const auto u = static_cast<std::size_t>(i);
    if (succ && first_success[u] < 0)
      first_success[u] = restart;
    bool take = false;
    if (succ) {
      take = !success[u] || l > loss[u];
      success[u] = 1;
    } else if (!success[u]) {
      take = l > best_fail_loss[u];
      if (take) best_fail_loss[u] = l;
    }
    if (take) {
      loss[u] = l;
      std::memcpy(x.data() + i * d, cand,
                  sizeof(double) * static_cast<std::size_t>(d));
    }
  }

  AttackOutcome finish(std::int64_t n, std::int64_t d, const AttackConfig& cfg,
                       std::int64_t grad_evals) && {
    AttackOutcome out;
    out.x_adv = Tensor::from({n, d}, std::move(x));
    out.success = std::move(success);
    out.loss = std::move(loss);
    out.first_success_restart = std::move(first_success);
    out.epsilon = cfg.epsilon;
    out.bounded = cfg.bounded;
    out.lo = cfg.lo;
    out.hi = cfg.hi;
    out.grad_evals = grad_evals;
    return out;
  }
};

inline void check_batch(const Tensor& x, std::span<const std::int32_t> y,
                        std::span<const std::int64_t> ids) {
  if (x.rank() != 2)
    throw ConfigError("attack input must be [n, d], got rank " +
                      std::to_string(x.rank()));
  const auto n = static_cast<std::size_t>(x.dim(0));
  if (y.size() != n || ids.size() != n)
    throw ConfigError("attack labels/ids must match the batch size");
}

// Restart r attacks the (r mod (C-1))-th smallest class id != y.
inline std::vector<std::int32_t> mt_targets(std::span<const std::int32_t> y,
                                            std::span<const std::int64_t> active,
                                            int num_classes, int restart) {
  if (num_classes < 2)
    throw ConfigError("targeted attacks need at least 2 classes");
  const int slot = restart % (num_classes - 1);
  std::vector<std::int32_t> t(active.size());
  for (std::size_t j = 0; j < active.size(); ++j) {
    const std::int32_t label = y[static_cast<std::size_t>(active[j])];
    auto c = static_cast<std::int32_t>(slot);
    if (c >= label) ++c;
    t[j] = c;
  }
  return t;
}

}  // namespace ib::detail
