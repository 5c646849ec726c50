#include "ib/diagnostics.hpp"

#include <algorithm>
#include <cmath>

#include "ib/errors.hpp"

namespace ib {

void RobustnessReport::add_row(const ReportRow& row) {
  if (row.n_examples < 1)
    throw ConfigError("report row needs a positive example count");
  if (row.standard_acc < 0.0 || row.standard_acc > 1.0 ||
      row.robust_acc < 0.0 || row.robust_acc > 1.0)
    throw ContractError("report row accuracies must lie in [0, 1]");
  const double slack = 2.0 / std::sqrt(static_cast<double>(row.n_examples));
  if (row.robust_acc > row.standard_acc + slack)
    warnings.push_back("robust accuracy " + std::to_string(row.robust_acc) +
                       " exceeds standard accuracy " +
                       std::to_string(row.standard_acc) + " by more than 2/sqrt(n) for " +
                       row.model_id + "/" + row.attack);
  rows.push_back(row);
}

RobustnessReport collapse_filter(const RobustnessReport& report,
                                 std::vector<Exclusion>* excluded) {
  RobustnessReport out;
  out.findings = report.findings;
  out.warnings = report.warnings;
  for (const ReportRow& row : report.rows) {
    if (row.num_classes < 2)
      throw ConfigError("collapse_filter needs num_classes on every row");
    const double threshold = 2.0 / static_cast<double>(row.num_classes);
    if (row.standard_acc <= threshold) {
      if (excluded)
        excluded->push_back(
            {row.model_id, row.seed, row.standard_acc, threshold});
      continue;
    }
    out.rows.push_back(row);
  }
  return out;
}

RestartCurve restart_curve(const Model& m, const LabeledDataset& ds,
                           std::int64_t limit, const AttackConfig& pgd_cfg,
                           const std::vector<int>& restart_counts) {
  if (restart_counts.empty())
    throw ConfigError("restart_curve needs at least one restart count");
  for (std::size_t i = 0; i < restart_counts.size(); ++i) {
    if (restart_counts[i] < 1)
      throw ConfigError("restart counts must be >= 1");
    if (i > 0 && restart_counts[i] <= restart_counts[i - 1])
      throw ConfigError("restart counts must be strictly ascending");
  }

  AttackConfig cfg = pgd_cfg;
  cfg.restarts = restart_counts.back();
  cfg.stop_on_success = true;  // nested seed-sets; the curve needs only the
                               // first successful restart per example
  const EvalMode emode = resolved_eval_mode(m, cfg);
  RobustEval ev = robust_accuracy(
      m, ds, limit,
      [&cfg](const Model& mm, const Tensor& x, std::span<const std::int32_t> y,
             std::span<const std::int64_t> ids) {
        return pgd_attack(mm, x, y, ids, cfg);
      },
      emode, cfg.eval_samples, cfg.seed);

  RestartCurve curve;
  curve.restart_counts = restart_counts;
  curve.standard_acc = ev.standard_acc;
  curve.n = ev.n;
  const auto& fsr = ev.outcome.first_success_restart;
  for (int count : restart_counts) {
    std::int64_t broken = 0;
    for (auto r : fsr) broken += (r >= 0 && r < count);
    curve.robust_acc.push_back(
        1.0 - static_cast<double>(broken) / static_cast<double>(ev.n));
  }
  curve.outcome = std::move(ev.outcome);
  return curve;
}

GrayCheckResult gray_image_check(const Model& m, const LabeledDataset& ds,
                                 std::int64_t limit, EvalMode eval_mode,
                                 int eval_samples, std::uint64_t seed) {
  const std::int64_t total = ds.x.dim(0);
  const std::int64_t n = (limit < 0 || limit > total) ? total : limit;
  if (n < 1) throw ConfigError("gray_image_check needs at least one example");
  LabeledDataset head = ds.head(n);
  const auto xv = head.x.detached().astype(DType::f64).f64();
  for (double v : xv)
    if (!(v >= 0.0 && v <= 1.0))
      throw DataError("gray_image_check needs inputs in [0, 1]; found " +
                      std::to_string(v));

  const std::int64_t d = head.x.dim(1);
  GrayCheckResult res;
  res.chance = 1.0 / static_cast<double>(ds.num_classes);

  // Constant input => one shared prediction. Evaluate the single gray row
  // with one fixed noise stream (id 0) so the stochastic check stays
  // deterministic, then score every label against that prediction.
  Tensor gray = Tensor::full({1, d}, 0.5);
  Tensor probs = predict_probs(m, gray, eval_mode, eval_samples, seed,
                               /*id_base=*/0);
  res.gray_prediction = argmax_rows(probs)[0];
  std::int64_t hits = 0;
  for (std::int64_t i = 0; i < n; ++i)
    hits += head.y[static_cast<std::size_t>(i)] == res.gray_prediction;
  res.oracle_acc = static_cast<double>(hits) / static_cast<double>(n);

  AttackConfig cfg;
  cfg.epsilon = 0.5;
  cfg.eval_mode = eval_mode;
  cfg.eval_samples = eval_samples;
  cfg.seed = seed;
  cfg.bounded = true;
  cfg.lo = 0.0;
  cfg.hi = 1.0;
  RobustEval ev = robust_accuracy(
      m, head, n,
      [&cfg](const Model& mm, const Tensor& x, std::span<const std::int32_t> y,
             std::span<const std::int64_t> ids) {
        return fgs_attack(mm, x, y, ids, cfg);
      },
      eval_mode, eval_samples, seed);
  res.fgs_acc = ev.robust_acc;
  res.threshold = std::max(res.oracle_acc, res.chance) + 0.05;
  res.flagged = res.fgs_acc >= res.threshold;
  return res;
}

}  // namespace ib
