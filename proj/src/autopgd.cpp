#include <algorithm>
#include <cmath>
#include <cstring>
#include <vector>

#include "attack_detail.hpp"
#include "ib/attacks.hpp"
#include "ib/errors.hpp"

namespace ib {

using detail::Ball;
using detail::Chosen;
using detail::kNegInf;

namespace {

constexpr double kMomentum = 0.75;  // weight of the gradient step vs inertia
constexpr double kRho = 0.75;       // required fraction of improving steps

// Checkpoint iterations: p_0 = 0, p_1 = 0.22,
// p_{j+1} = p_j + max(p_j - p_{j-1} - 0.03, 0.06), w_j = ceil(p_j * T).
std::vector<int> checkpoints(int steps) {
  std::vector<int> w;
  double p_prev = 0.0, p = 0.22;
  while (p < 1.0) {
    const int wj = static_cast<int>(std::ceil(p * steps));
    if (wj > 0 && wj < steps && (w.empty() || wj > w.back())) w.push_back(wj);
    const double p_next = p + std::max(p - p_prev - 0.03, 0.06);
    p_prev = p;
    p = p_next;
  }
  return w;
}

}  // namespace

AttackOutcome auto_pgd_attack(const Model& m, const Tensor& x,
                              std::span<const std::int32_t> y,
                              std::span<const std::int64_t> ids,
                              const AttackConfig& cfg) {
  {
    AttackConfig probe = cfg;
    probe.alpha = 1.0;  // alpha is unused: the step starts at 2 * epsilon
    validate_attack_config(probe, /*needs_steps=*/true);
  }
  if (cfg.loss == AttackLoss::margin)
    throw ConfigError("auto_pgd supports cross_entropy and dlr objectives");
  detail::check_batch(x, y, ids);
  const std::int64_t n = x.dim(0), d = x.dim(1);
  const Tensor x0 = x.detached().astype(DType::f64);
  const auto xv = x0.f64();
  const GradMode gmode = resolved_grad_mode(m, cfg);
  const EvalMode emode = resolved_eval_mode(m, cfg);
  const std::vector<int> ckpts = checkpoints(cfg.steps);

  Chosen chosen(n, d, xv);
  std::int64_t grad_evals = 0;

  for (int r = 0; r < cfg.restarts; ++r) {
    std::vector<std::int64_t> active;
    for (std::int64_t i = 0; i < n; ++i)
      if (!(cfg.stop_on_success && chosen.success[static_cast<std::size_t>(i)]))
        active.push_back(i);
    if (active.empty()) break;
    const auto na = static_cast<std::int64_t>(active.size());
    const auto nd = static_cast<std::size_t>(na * d);

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

    Tensor xc = detail::gather_rows(xv, d, active);
    const auto cv = xc.f64();
    Ball ball{cv, cfg.epsilon, cfg.bounded, cfg.lo, cfg.hi};

    std::vector<double> xcur(cv.begin(), cv.end());
    for (std::int64_t j = 0; j < na; ++j) {
      Rng init = Rng::derive(
          cfg.seed, {Rng::kAttackInit,
                     static_cast<std::uint64_t>(ida[static_cast<std::size_t>(j)]),
                     static_cast<std::uint64_t>(r)});
      for (std::int64_t k = 0; k < d; ++k) {
        const double v = cv[j * d + k] + init.uniform(-cfg.epsilon, cfg.epsilon);
        xcur[static_cast<std::size_t>(j * d + k)] = ball.project(j, d, k, v);
      }
    }

    // Per-example controller state.
    std::vector<double> xprev(xcur);
    std::vector<double> xbest(nd), gbest(nd);
    std::vector<double> eta(static_cast<std::size_t>(na), 2.0 * cfg.epsilon);
    std::vector<double> fbest(static_cast<std::size_t>(na), kNegInf);
    std::vector<double> fprev(static_cast<std::size_t>(na), kNegInf);
    std::vector<double> eta_ckpt(eta), fbest_ckpt(fbest);
    std::vector<int> improved(static_cast<std::size_t>(na), 0);
    int last_ckpt = 0;
    std::size_t next_ckpt = 0;

    for (int t = 0; t < cfg.steps; ++t) {
      Tensor xt = Tensor::from({na, d}, xcur);
      LossAndGrad lg = attack_loss_grad(m, xt, ya, cfg.loss, {}, gmode,
                                        cfg.samples, noise, /*want_grad=*/true);
      grad_evals += na;
      std::vector<double> grad = lg.grad.to_vector();
      for (std::int64_t j = 0; j < na; ++j) {
        const auto u = static_cast<std::size_t>(j);
        const double f = lg.loss[u];
        if (t > 0 && f > fprev[u]) ++improved[u];
        fprev[u] = f;
        if (f > fbest[u]) {
          fbest[u] = f;
          std::memcpy(xbest.data() + j * d, xcur.data() + j * d,
                      sizeof(double) * static_cast<std::size_t>(d));
          std::memcpy(gbest.data() + j * d, grad.data() + j * d,
                      sizeof(double) * static_cast<std::size_t>(d));
        }
      }

      if (next_ckpt < ckpts.size() && t == ckpts[next_ckpt]) {
        const int window = t - last_ckpt;
        for (std::int64_t j = 0; j < na; ++j) {
          const auto u = static_cast<std::size_t>(j);
          const bool few_improvements =
              improved[u] < kRho * static_cast<double>(window);
          const bool stalled =
              eta[u] == eta_ckpt[u] && fbest[u] == fbest_ckpt[u];
          if (few_improvements || stalled) {
            eta[u] *= 0.5;
            // Restart from the best point; reuse its gradient for the next
            // step and kill the inertia term.
            std::memcpy(xcur.data() + j * d, xbest.data() + j * d,
                        sizeof(double) * static_cast<std::size_t>(d));
            std::memcpy(xprev.data() + j * d, xbest.data() + j * d,
                        sizeof(double) * static_cast<std::size_t>(d));
            std::memcpy(grad.data() + j * d, gbest.data() + j * d,
                        sizeof(double) * static_cast<std::size_t>(d));
            fprev[u] = fbest[u];
          }
          improved[u] = 0;
          eta_ckpt[u] = eta[u];
          fbest_ckpt[u] = fbest[u];
        }
        last_ckpt = t;
        ++next_ckpt;
      }

      for (std::int64_t j = 0; j < na; ++j) {
        const auto u = static_cast<std::size_t>(j);
        for (std::int64_t k = 0; k < d; ++k) {
          const auto uk = static_cast<std::size_t>(j * d + k);
          const double gg = grad[uk];
          const double sgn = gg > 0.0 ? 1.0 : (gg < 0.0 ? -1.0 : 0.0);
          const double z = ball.project(j, d, k, xcur[uk] + eta[u] * sgn);
          double next = t == 0 ? z
                               : xcur[uk] + kMomentum * (z - xcur[uk]) +
                                     (1.0 - kMomentum) * (xcur[uk] - xprev[uk]);
          next = ball.project(j, d, k, next);
          xprev[uk] = xcur[uk];
          xcur[uk] = next;
        }
      }
    }

    {
      Tensor xt = Tensor::from({na, d}, xcur);
      LossAndGrad lg = attack_loss_grad(m, xt, ya, cfg.loss, {}, gmode,
                                        cfg.samples, noise, /*want_grad=*/false);
      for (std::int64_t j = 0; j < na; ++j) {
        const auto u = static_cast<std::size_t>(j);
        if (lg.loss[u] > fbest[u]) {
          fbest[u] = lg.loss[u];
          std::memcpy(xbest.data() + j * d, xcur.data() + j * d,
                      sizeof(double) * static_cast<std::size_t>(d));
        }
      }
    }

    Tensor xb = Tensor::from({na, d}, xbest);
    Tensor probs = predict_probs(m, xb, emode, cfg.eval_samples, cfg.seed, ida);
    auto pred = argmax_rows(probs);
    for (std::int64_t j = 0; j < na; ++j)
      chosen.merge(active[static_cast<std::size_t>(j)], d, r,
                   pred[static_cast<std::size_t>(j)] != ya[static_cast<std::size_t>(j)],
                   fbest[static_cast<std::size_t>(j)], xbest.data() + j * d);
  }
  return std::move(chosen).finish(n, d, cfg, grad_evals);
}

}  // namespace ib
