#include "ib/attacks.hpp"

namespace ib {

// MultiTargeted is PGD ascent on the targeted margin (z_target - z_label),
// with the target class cycling over the non-true classes as the restart
// index grows. The shared PGD driver already derives per-restart targets
// whenever the objective is `margin`.
AttackOutcome multi_targeted_attack(const Model& m, const Tensor& x,
                                    std::span<const std::int32_t> y,
                                    std::span<const std::int64_t> ids,
                                    const AttackConfig& cfg) {
  AttackConfig c = cfg;
  c.loss = AttackLoss::margin;
  return pgd_attack(m, x, y, ids, c);
}

}  // namespace ib
