#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "ib/attacks.hpp"
#include "ib/dataset.hpp"
#include "ib/model.hpp"

namespace ib {

// One scored (model, attack, evaluation) combination.
struct ReportRow {
  std::string model_id;
  std::uint64_t seed = 0;
  std::string attack;
  double epsilon = 0.0;
  int restarts = 1;
  std::string eval_mode;
  double standard_acc = 0.0;
  double robust_acc = 0.0;
  std::int64_t n_examples = 0;
  int num_classes = 0;
};

// A named diagnostic finding with its supporting numbers.
struct Finding {
  std::string name;
  bool flagged = false;
  std::map<std::string, double> numbers;  // ordered => deterministic output
};

struct RobustnessReport {
  std::vector<ReportRow> rows;
  std::vector<Finding> findings;
  std::vector<std::string> warnings;

  // Appends the row; records a warning when robust accuracy exceeds standard
  // accuracy by more than 2/sqrt(n) (possible under stochastic evaluation,
  // suspicious beyond that margin).
  void add_row(const ReportRow& row);
};

struct Exclusion {
  std::string model_id;
  std::uint64_t seed = 0;
  double standard_acc = 0.0;
  double threshold = 0.0;
};

// Drops rows whose standard accuracy is at or below 2x chance (chance =
// 1/num_classes): runs that collapsed to random guessing say nothing about
// robustness. Findings and warnings pass through untouched.
RobustnessReport collapse_filter(const RobustnessReport& report,
                                 std::vector<Exclusion>* excluded = nullptr);

// Robust accuracy as a function of the PGD restart budget. One attack run at
// the largest count; smaller counts are read off the per-example index of the
// first successful restart, so the curve is exactly non-increasing.
struct RestartCurve {
  std::vector<int> restart_counts;
  std::vector<double> robust_acc;
  double standard_acc = 0.0;
  std::int64_t n = 0;
  AttackOutcome outcome;  // at the largest restart count
};

RestartCurve restart_curve(const Model& m, const LabeledDataset& ds,
                           std::int64_t limit, const AttackConfig& pgd_cfg,
                           const std::vector<int>& restart_counts);

// Solid-gray sanity check: with eps = 0.5 every pixel of a [0,1] input can
// reach 0.5, so the all-gray image is a valid attack and any gradient attack
// should do at least as well. A gradient attack scoring 5 points above
// max(oracle accuracy, chance) means the gradient search is being defeated
// by the loss surface, not the model's robustness.
struct GrayCheckResult {
  double oracle_acc = 0.0;  // accuracy when every input is all-0.5
  double fgs_acc = 0.0;     // FGS eps=0.5 robust accuracy
  double chance = 0.0;      // 1/num_classes
  double threshold = 0.0;   // max(oracle_acc, chance) + 0.05
  std::int32_t gray_prediction = -1;
  bool flagged = false;
};

GrayCheckResult gray_image_check(const Model& m, const LabeledDataset& ds,
                                 std::int64_t limit, EvalMode eval_mode,
                                 int eval_samples, std::uint64_t seed);

}  // namespace ib
