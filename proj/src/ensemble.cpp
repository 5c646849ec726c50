#include <cstring>
#include <utility>
#include <vector>

#include "attack_detail.hpp"
#include "ib/attacks.hpp"
#include "ib/errors.hpp"

namespace ib {

namespace {

// Stage recipe of the ensemble; targeted margin ascent runs last because it
// is the expensive half of the budget.
struct StageSpec {
  const char* name;
  AttackLoss loss;
  int restarts;
  int steps;
  bool alpha_is_tenth_eps;  // MT step; the APGD stages ignore alpha
};

constexpr StageSpec kStages[] = {
    {"apgd_ce", AttackLoss::cross_entropy, 5, 100, false},
    {"apgd_dlr", AttackLoss::dlr, 5, 100, false},
    {"multitargeted", AttackLoss::margin, 10, 200, true},
};

}  // namespace

EnsembleReport ensemble_aa_mt(const Model& m, const Tensor& x,
                              std::span<const std::int32_t> y,
                              std::span<const std::int64_t> ids, double epsilon,
                              std::uint64_t seed, bool bounded, double lo,
                              double hi) {
  detail::check_batch(x, y, ids);
  const std::int64_t n = x.dim(0), d = x.dim(1);
  const Tensor x0 = x.detached().astype(DType::f64);
  const auto xv = x0.f64();
  const EvalMode emode = m.default_eval();
  constexpr int kEvalSamples = 12;

  EnsembleReport report;
  report.n = n;
  report.combined.x_adv = x0.clone();
  report.combined.success.assign(static_cast<std::size_t>(n), 0);
  report.combined.loss.assign(static_cast<std::size_t>(n), 0.0);
  report.combined.first_success_restart.assign(static_cast<std::size_t>(n), -1);
  report.combined.epsilon = epsilon;
  report.combined.bounded = bounded;
  report.combined.lo = lo;
  report.combined.hi = hi;

  // Stage 0: examples the model already misclassifies need no attack.
  {
    EnsembleStageReport st;
    st.name = "clean";
    st.attacked = n;
    Tensor probs = predict_probs(m, x0, emode, kEvalSamples, seed, ids);
    auto pred = argmax_rows(probs);
    for (std::int64_t i = 0; i < n; ++i)
      if (pred[static_cast<std::size_t>(i)] != y[static_cast<std::size_t>(i)]) {
        report.combined.success[static_cast<std::size_t>(i)] = 1;
        ++st.broke;
      }
    report.stages.push_back(st);
  }

  auto adv = report.combined.x_adv.mut_f64();
  int sr_base = 0;
  for (std::size_t si = 0; si < std::size(kStages); ++si) {
    const StageSpec& spec = kStages[si];
    std::vector<std::int64_t> standing;
    for (std::int64_t i = 0; i < n; ++i)
      if (!report.combined.success[static_cast<std::size_t>(i)])
        standing.push_back(i);
    EnsembleStageReport st;
    st.name = spec.name;
    st.attacked = static_cast<std::int64_t>(standing.size());
    if (standing.empty()) {
      report.stages.push_back(st);
      sr_base += spec.restarts;
      continue;
    }

    const auto na = static_cast<std::int64_t>(standing.size());
    Tensor xs = detail::gather_rows(xv, d, standing);
    std::vector<std::int32_t> ys(static_cast<std::size_t>(na));
    std::vector<std::int64_t> idsub(static_cast<std::size_t>(na));
    for (std::int64_t j = 0; j < na; ++j) {
      ys[static_cast<std::size_t>(j)] = y[static_cast<std::size_t>(standing[j])];
      idsub[static_cast<std::size_t>(j)] =
          ids[static_cast<std::size_t>(standing[j])];
    }

    AttackConfig cfg;
    cfg.epsilon = epsilon;
    cfg.alpha = spec.alpha_is_tenth_eps ? epsilon / 10.0 : 1.0;
    cfg.steps = spec.steps;
    cfg.restarts = spec.restarts;
    cfg.loss = spec.loss;
    cfg.seed = splitmix64(seed ^ (si + 1));
    cfg.stop_on_success = true;
    cfg.bounded = bounded;
    cfg.lo = lo;
    cfg.hi = hi;

    AttackOutcome out = spec.loss == AttackLoss::margin
                            ? multi_targeted_attack(m, xs, ys, idsub, cfg)
                            : auto_pgd_attack(m, xs, ys, idsub, cfg);
    st.grad_evals = out.grad_evals;
    report.combined.grad_evals += out.grad_evals;
    const auto av = out.x_adv.f64();
    for (std::int64_t j = 0; j < na; ++j) {
      const auto i = static_cast<std::size_t>(standing[j]);
      if (out.success[static_cast<std::size_t>(j)]) {
        report.combined.success[i] = 1;
        report.combined.loss[i] = out.loss[static_cast<std::size_t>(j)];
        report.combined.first_success_restart[i] =
            sr_base + out.first_success_restart[static_cast<std::size_t>(j)];
        std::memcpy(adv.data() + standing[j] * d, av.data() + j * d,
                    sizeof(double) * static_cast<std::size_t>(d));
        ++st.broke;
      }
    }
    report.stages.push_back(st);
    sr_base += spec.restarts;
  }

  std::int64_t broken = 0;
  for (auto s : report.combined.success) broken += s;
  report.robust_acc =
      1.0 - static_cast<double>(broken) / static_cast<double>(n);
  return report;
}

}  // namespace ib
