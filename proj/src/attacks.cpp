#include "ib/attacks.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "attack_detail.hpp"
#include "ib/errors.hpp"

namespace ib {

using detail::Ball;
using detail::Chosen;
using detail::kNegInf;

double AttackOutcome::success_rate() const {
  if (success.empty()) return 0.0;
  std::int64_t hits = 0;
  for (auto s : success) hits += s;
  return static_cast<double>(hits) / static_cast<double>(success.size());
}

GradMode resolved_grad_mode(const Model& m, const AttackConfig& cfg) {
  if (cfg.grad_mode) return *cfg.grad_mode;
  return m.arch.kind == ModelKind::det ? GradMode::mean : GradMode::stochastic;
}

EvalMode resolved_eval_mode(const Model& m, const AttackConfig& cfg) {
  if (cfg.eval_mode) return *cfg.eval_mode;
  return m.default_eval();
}

void validate_attack_config(const AttackConfig& cfg, bool needs_steps) {
  if (!(cfg.epsilon >= 0.0) || !std::isfinite(cfg.epsilon))
    throw ConfigError("attack epsilon must be finite and >= 0, got " +
                      std::to_string(cfg.epsilon));
  if (cfg.restarts < 1)
    throw ConfigError("attack restarts must be >= 1, got " +
                      std::to_string(cfg.restarts));
  if (cfg.samples < 1 || cfg.eval_samples < 1)
    throw ConfigError("attack sample counts must be >= 1");
  if (needs_steps) {
    if (cfg.steps < 1)
      throw ConfigError("attack steps must be >= 1, got " +
                        std::to_string(cfg.steps));
    if (!(cfg.alpha > 0.0) || !std::isfinite(cfg.alpha))
      throw ConfigError("attack step size must be finite and > 0, got " +
                        std::to_string(cfg.alpha));
  }
  if (cfg.bounded && !(cfg.lo < cfg.hi))
    throw ConfigError("attack bounds must satisfy lo < hi");
}

AttackOutcome fgs_attack(const Model& m, const Tensor& x,
                         std::span<const std::int32_t> y,
                         std::span<const std::int64_t> ids,
                         const AttackConfig& cfg) {
  validate_attack_config(cfg, /*needs_steps=*/false);
  detail::check_batch(x, y, ids);
  const std::int64_t n = x.dim(0), d = x.dim(1);
  const Tensor x0 = x.detached().astype(DType::f64);
  const auto xv = x0.f64();
  const GradMode gmode = resolved_grad_mode(m, cfg);
  const EvalMode emode = resolved_eval_mode(m, cfg);

  std::vector<Rng> noise;
  noise.reserve(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i)
    noise.push_back(Rng::derive(cfg.seed, {Rng::kAttackNoise,
                                           static_cast<std::uint64_t>(ids[i]), 0}));

  LossAndGrad lg = attack_loss_grad(m, x0, y, cfg.loss, {}, gmode, cfg.samples,
                                    noise, /*want_grad=*/true);
  const auto g = lg.grad.f64();

  Chosen chosen(n, d, xv);
  std::vector<double> cand(xv.begin(), xv.end());
  Ball ball{xv, cfg.epsilon, cfg.bounded, cfg.lo, cfg.hi};
  for (std::int64_t i = 0; i < n; ++i)
    for (std::int64_t k = 0; k < d; ++k) {
      const double gg = g[i * d + k];
      const double step = gg > 0.0 ? cfg.epsilon : (gg < 0.0 ? -cfg.epsilon : 0.0);
      cand[static_cast<std::size_t>(i * d + k)] =
          ball.project(i, d, k, xv[i * d + k] + step);
    }

  Tensor xa = Tensor::from({n, d}, std::move(cand));
  Tensor probs = predict_probs(m, xa, emode, cfg.eval_samples, cfg.seed, ids);
  auto pred = argmax_rows(probs);
  LossAndGrad final_loss = attack_loss_grad(m, xa, y, cfg.loss, {}, gmode,
                                            cfg.samples, noise, /*want_grad=*/false);
  const auto av = xa.f64();
  for (std::int64_t i = 0; i < n; ++i)
    chosen.merge(i, d, 0, pred[static_cast<std::size_t>(i)] != y[i],
                 final_loss.loss[static_cast<std::size_t>(i)], av.data() + i * d);
  return std::move(chosen).finish(n, d, cfg, n);
}

AttackOutcome pgd_attack(const Model& m, const Tensor& x,
                         std::span<const std::int32_t> y,
                         std::span<const std::int64_t> ids,
                         const AttackConfig& cfg) {
  validate_attack_config(cfg, /*needs_steps=*/true);
  detail::check_batch(x, y, ids);
  const std::int64_t n = x.dim(0), d = x.dim(1);
  const Tensor x0 = x.detached().astype(DType::f64);
  const auto xv = x0.f64();
  const GradMode gmode = resolved_grad_mode(m, cfg);
  const EvalMode emode = resolved_eval_mode(m, cfg);
  const bool targeted = cfg.loss == AttackLoss::margin;

  Chosen chosen(n, d, xv);
  std::int64_t grad_evals = 0;

  for (int r = 0; r < cfg.restarts; ++r) {
    std::vector<std::int64_t> active;
    for (std::int64_t i = 0; i < n; ++i)
      if (!(cfg.stop_on_success && chosen.success[static_cast<std::size_t>(i)]))
        active.push_back(i);
    if (active.empty()) break;
    const auto na = static_cast<std::int64_t>(active.size());

    std::vector<std::int32_t> ya(static_cast<std::size_t>(na));
    std::vector<std::int64_t> ida(static_cast<std::size_t>(na));
    std::vector<Rng> noise;
    noise.reserve(static_cast<std::size_t>(na));
    for (std::int64_t j = 0; j < na; ++j) {
      ya[static_cast<std::size_t>(j)] = y[static_cast<std::size_t>(active[j])];
      ida[static_cast<std::size_t>(j)] = ids[static_cast<std::size_t>(active[j])];
      noise.push_back(Rng::derive(
          cfg.seed, {Rng::kAttackNoise,
                     static_cast<std::uint64_t>(ida[static_cast<std::size_t>(j)]),
                     static_cast<std::uint64_t>(r)}));
    }
    std::vector<std::int32_t> targets;
    if (targeted)
      targets = detail::mt_targets(y, active,
                                   static_cast<int>(m.arch.num_classes), r);

    Tensor xc = detail::gather_rows(xv, d, active);  // restart-local centers
    const auto cv = xc.f64();
    Ball ball{cv, cfg.epsilon, cfg.bounded, cfg.lo, cfg.hi};

    std::vector<double> xa(cv.begin(), cv.end());
    for (std::int64_t j = 0; j < na; ++j) {
      Rng init = Rng::derive(
          cfg.seed, {Rng::kAttackInit,
                     static_cast<std::uint64_t>(ida[static_cast<std::size_t>(j)]),
                     static_cast<std::uint64_t>(r)});
      for (std::int64_t k = 0; k < d; ++k) {
        const double v = cv[j * d + k] + init.uniform(-cfg.epsilon, cfg.epsilon);
        xa[static_cast<std::size_t>(j * d + k)] = ball.project(j, d, k, v);
      }
    }

    std::vector<double> best_l(static_cast<std::size_t>(na), kNegInf);
    std::vector<double> best_x(static_cast<std::size_t>(na * d));

    for (int t = 0; t <= cfg.steps; ++t) {
      const bool last = t == cfg.steps;
      Tensor xt = Tensor::from({na, d}, xa);
      LossAndGrad lg = attack_loss_grad(m, xt, ya, cfg.loss, targets, gmode,
                                        cfg.samples, noise, /*want_grad=*/!last);
      if (!last) grad_evals += na;
      for (std::int64_t j = 0; j < na; ++j)
        if (lg.loss[static_cast<std::size_t>(j)] >
            best_l[static_cast<std::size_t>(j)]) {
          best_l[static_cast<std::size_t>(j)] = lg.loss[static_cast<std::size_t>(j)];
          std::memcpy(best_x.data() + j * d, xa.data() + j * d,
                      sizeof(double) * static_cast<std::size_t>(d));
        }
      if (last) break;
      const auto g = lg.grad.f64();
      for (std::int64_t j = 0; j < na; ++j)
        for (std::int64_t k = 0; k < d; ++k) {
          const double gg = g[j * d + k];
          const double step = gg > 0.0 ? cfg.alpha : (gg < 0.0 ? -cfg.alpha : 0.0);
          xa[static_cast<std::size_t>(j * d + k)] =
              ball.project(j, d, k, xa[static_cast<std::size_t>(j * d + k)] + step);
        }
    }

    Tensor xb = Tensor::from({na, d}, best_x);
    Tensor probs = predict_probs(m, xb, emode, cfg.eval_samples, cfg.seed, ida);
    auto pred = argmax_rows(probs);
    for (std::int64_t j = 0; j < na; ++j)
      chosen.merge(active[static_cast<std::size_t>(j)], d, r,
                   pred[static_cast<std::size_t>(j)] != ya[static_cast<std::size_t>(j)],
                   best_l[static_cast<std::size_t>(j)], best_x.data() + j * d);
  }
  return std::move(chosen).finish(n, d, cfg, grad_evals);
}

RobustEval robust_accuracy(const Model& m, const LabeledDataset& ds,
                           std::int64_t limit, const AttackFn& fn,
                           EvalMode eval_mode, int eval_samples,
                           std::uint64_t seed) {
  const std::int64_t total = ds.x.dim(0);
  const std::int64_t n = (limit < 0 || limit > total) ? total : limit;
  if (n < 1) throw ConfigError("robust_accuracy needs at least one example");
  LabeledDataset head = ds.head(n);
  const Tensor x = head.x.detached().astype(DType::f64);
  std::vector<std::int64_t> ids(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i) ids[static_cast<std::size_t>(i)] = i;

  RobustEval ev;
  ev.n = n;
  {
    Tensor probs = predict_probs(m, x, eval_mode, eval_samples, seed, ids);
    auto pred = argmax_rows(probs);
    std::int64_t ok = 0;
    for (std::int64_t i = 0; i < n; ++i)
      ok += pred[static_cast<std::size_t>(i)] == head.y[static_cast<std::size_t>(i)];
    ev.standard_acc = static_cast<double>(ok) / static_cast<double>(n);
  }

  ev.outcome = fn(m, x, head.y, ids);
  const std::int64_t d = x.dim(1);
  if (ev.outcome.x_adv.shape() != x.shape())
    throw ContractError("attack returned a batch of the wrong shape");
  const auto xv = x.f64();
  const auto av = ev.outcome.x_adv.f64();
  const double tol = 1e-12;
  for (std::int64_t i = 0; i < n; ++i)
    for (std::int64_t k = 0; k < d; ++k) {
      const double delta = std::abs(av[i * d + k] - xv[i * d + k]);
      if (delta > ev.outcome.epsilon + tol)
        throw ContractError("attack violated the L-inf budget on example " +
                            std::to_string(i) + ": |delta| = " +
                            std::to_string(delta) + " > " +
                            std::to_string(ev.outcome.epsilon));
      if (ev.outcome.bounded &&
          (av[i * d + k] < ev.outcome.lo - tol || av[i * d + k] > ev.outcome.hi + tol))
        throw ContractError("attack left the valid input range on example " +
                            std::to_string(i));
    }

  Tensor probs = predict_probs(m, ev.outcome.x_adv, eval_mode, eval_samples,
                               seed, ids);
  auto pred = argmax_rows(probs);
  std::int64_t ok = 0;
  for (std::int64_t i = 0; i < n; ++i)
    ok += pred[static_cast<std::size_t>(i)] == head.y[static_cast<std::size_t>(i)];
  ev.robust_acc = static_cast<double>(ok) / static_cast<double>(n);
  return ev;
}

}  // namespace ib
