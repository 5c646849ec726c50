#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

#include "doctest.h"
#include "ib/attacks.hpp"
#include "ib/dataset.hpp"
#include "ib/errors.hpp"
#include "ib/model.hpp"

using ib::AttackConfig;
using ib::AttackOutcome;
using ib::LabeledDataset;
using ib::Model;
using ib::Tensor;

namespace {

// Exactly-linear two-class model on (x1, x2): logits = (-x1, +x1), x2 unused.
// The ReLU pair z = (relu(x1), relu(-x1)) with decoder rows (-1,1) / (1,-1)
// reproduces the identity relu(a) - relu(-a) = a, so the closed-form FGS
// behaviour is: label 1 flips iff x1 - eps <= 0 (ties prefer class 0) and
// label 0 flips iff x1 + eps > 0.
Model linear_x1_model() {
  Model m;
  m.arch.kind = ib::ModelKind::det;
  m.arch.input_dim = 2;
  m.arch.bottleneck = 2;
  m.arch.num_classes = 2;
  m.params = ib::init_params(m.arch, ib::InitScheme::zeros, 0);
  auto wk = m.params[0].mut_f64();   // [2, 2]: z_j = sum_i x_i wk[i, j]
  wk[0] = 1.0;
  wk[1] = -1.0;
  auto wdec = m.params[2].mut_f64();  // [2, 2]: l_c = sum_j z_j wdec[j, c]
  wdec[0] = -1.0;
  wdec[1] = 1.0;
  wdec[2] = 1.0;
  wdec[3] = -1.0;
  return m;
}

std::vector<std::int64_t> iota_ids(std::int64_t n) {
  std::vector<std::int64_t> ids(static_cast<std::size_t>(n));
  std::iota(ids.begin(), ids.end(), 0);
  return ids;
}

ib::AttackFn wrap_fgs(const AttackConfig& cfg) {
  return [cfg](const Model& m, const Tensor& x, std::span<const std::int32_t> y,
               std::span<const std::int64_t> ids) {
    return ib::fgs_attack(m, x, y, ids, cfg);
  };
}

Model small_vib() {
  Model m;
  m.arch.kind = ib::ModelKind::vib;
  m.arch.input_dim = 2;
  m.arch.hidden = {4};
  m.arch.bottleneck = 2;
  m.arch.num_classes = 2;
  m.beta = 0.01;
  m.samples = 3;
  m.params = ib::init_params(m.arch, ib::InitScheme::xavier_uniform, 1);
  return m;
}

}  // namespace

TEST_CASE("fgs on the linear model matches its closed form") {
  Model m = linear_x1_model();
  LabeledDataset ds = ib::make_toy_dataset(ib::TaskKind::toy_ours, 400, 7);
  const double eps = 5.2;

  AttackConfig cfg;
  cfg.epsilon = eps;
  ib::RobustEval ev = ib::robust_accuracy(m, ds, -1, wrap_fgs(cfg),
                                          ib::EvalMode::mean, 1, 0);

  CHECK(ev.standard_acc == 1.0);  // sign(x1) always equals the label

  std::int64_t robust = 0;
  const auto xv = ds.x.f64();
  for (std::int64_t i = 0; i < 400; ++i) {
    const double x1 = xv[2 * i];
    if (ds.y[static_cast<std::size_t>(i)] == 1)
      robust += x1 - eps > 0.0;
    else
      robust += x1 + eps <= 0.0;
  }
  CHECK(ev.robust_acc == static_cast<double>(robust) / 400.0);
  CHECK(ev.outcome.success_rate() == doctest::Approx(1.0 - ev.robust_acc));

  // x1 always moves by exactly eps toward the boundary; x2 has zero gradient
  // and must not move at all.
  const auto av = ev.outcome.x_adv.f64();
  for (std::int64_t i = 0; i < 400; ++i) {
    const double want = ds.y[static_cast<std::size_t>(i)] == 1 ? -eps : eps;
    CHECK(av[2 * i] == xv[2 * i] + want);
    CHECK(av[2 * i + 1] == xv[2 * i + 1]);
  }
}

TEST_CASE("bounded fgs clips every coordinate to the box") {
  Model m = linear_x1_model();
  const std::int64_t n = 3;
  Tensor x = Tensor::from({n, 2}, std::vector<double>{0.05, 0.95, 0.5, 0.02, 0.98, 0.4});
  std::vector<std::int32_t> y = {1, 1, 0};
  auto ids = iota_ids(n);

  AttackConfig cfg;
  cfg.epsilon = 0.3;
  cfg.bounded = true;
  cfg.lo = 0.0;
  cfg.hi = 1.0;
  AttackOutcome out = ib::fgs_attack(m, x, y, ids, cfg);

  const auto xv = x.f64();
  const auto av = out.x_adv.f64();
  for (std::int64_t i = 0; i < n; ++i) {
    const double step = y[static_cast<std::size_t>(i)] == 1 ? -0.3 : 0.3;
    const double want = std::clamp(xv[2 * i] + step, 0.0, 1.0);
    CHECK(av[2 * i] == want);
    CHECK(av[2 * i + 1] == xv[2 * i + 1]);
    CHECK(av[2 * i] >= 0.0);
    CHECK(av[2 * i] <= 1.0);
  }
}

TEST_CASE("pgd drives the vulnerable coordinate into the ball corner") {
  Model m = linear_x1_model();
  Tensor x = Tensor::from({1, 2}, std::vector<double>{0.15, 0.5});
  std::vector<std::int32_t> y = {1};
  auto ids = iota_ids(1);

  AttackConfig cfg;
  cfg.epsilon = 0.2;  // the corner x1 = -0.05 crosses the decision boundary
  cfg.alpha = 0.06;
  cfg.steps = 20;
  cfg.restarts = 2;
  AttackOutcome out = ib::pgd_attack(m, x, y, ids, cfg);

  const auto av = out.x_adv.f64();
  CHECK(av[0] == 0.15 - 0.2);  // projection lands exactly on center - eps
  CHECK(std::abs(av[1] - 0.5) <= 0.2);
  CHECK(out.success[0] == 1);
  CHECK(out.first_success_restart[0] == 0);
  CHECK(out.epsilon == 0.2);
}

TEST_CASE("pgd short-circuits finished examples and accounts gradient calls") {
  Model m = linear_x1_model();
  LabeledDataset ds = ib::make_toy_dataset(ib::TaskKind::toy_ours, 10, 3);
  auto ids = iota_ids(10);

  AttackConfig cfg;
  cfg.epsilon = 10.0;  // larger than any |x1| in the corpus: everyone breaks
  cfg.alpha = 3.0;
  cfg.steps = 7;  // 21 of travel covers the worst random init in the ball
  cfg.restarts = 3;
  AttackOutcome out = ib::pgd_attack(m, ds.x, ds.y, ids, cfg);
  for (auto s : out.success) CHECK(s == 1);
  for (auto r : out.first_success_restart) CHECK(r == 0);
  CHECK(out.grad_evals == 10 * 7);  // restart 0 only

  AttackConfig all = cfg;
  all.stop_on_success = false;
  AttackOutcome out2 = ib::pgd_attack(m, ds.x, ds.y, ids, all);
  CHECK(out2.grad_evals == 3 * 10 * 7);
  for (auto r : out2.first_success_restart) CHECK(r == 0);
}

TEST_CASE("per-example streams make pgd invariant to batch slicing") {
  Model m = linear_x1_model();
  LabeledDataset ds = ib::make_toy_dataset(ib::TaskKind::toy_ours, 6, 11);
  auto ids = iota_ids(6);

  AttackConfig cfg;
  cfg.epsilon = 0.5;
  cfg.alpha = 0.1;
  cfg.steps = 5;
  cfg.restarts = 2;
  cfg.stop_on_success = false;
  cfg.seed = 99;
  AttackOutcome full = ib::pgd_attack(m, ds.x, ds.y, ids, cfg);

  // rows 1 and 4 attacked alone, keeping their original ids
  const auto xv = ds.x.f64();
  Tensor xs = Tensor::from({2, 2}, std::vector<double>{xv[2], xv[3], xv[8], xv[9]});
  std::vector<std::int32_t> ys = {ds.y[1], ds.y[4]};
  std::vector<std::int64_t> sub_ids = {1, 4};
  AttackOutcome part = ib::pgd_attack(m, xs, ys, sub_ids, cfg);

  const auto fa = full.x_adv.f64();
  const auto pa = part.x_adv.f64();
  CHECK(pa[0] == fa[2]);
  CHECK(pa[1] == fa[3]);
  CHECK(pa[2] == fa[8]);
  CHECK(pa[3] == fa[9]);
  CHECK(part.loss[0] == full.loss[1]);
  CHECK(part.loss[1] == full.loss[4]);
}

TEST_CASE("attacks on stochastic models replay bit-identically per seed") {
  Model m = small_vib();
  LabeledDataset ds = ib::make_toy_dataset(ib::TaskKind::toy_ours, 8, 5);
  auto ids = iota_ids(8);

  AttackConfig cfg;
  cfg.epsilon = 0.3;
  cfg.alpha = 0.1;
  cfg.steps = 3;
  cfg.restarts = 2;
  cfg.samples = 3;
  cfg.eval_samples = 5;
  cfg.seed = 21;
  AttackOutcome a = ib::pgd_attack(m, ds.x, ds.y, ids, cfg);
  AttackOutcome b = ib::pgd_attack(m, ds.x, ds.y, ids, cfg);
  const auto av = a.x_adv.f64();
  const auto bv = b.x_adv.f64();
  REQUIRE(av.size() == bv.size());
  for (std::size_t i = 0; i < av.size(); ++i) CHECK(av[i] == bv[i]);
  CHECK(a.loss == b.loss);

  AttackConfig other = cfg;
  other.seed = 22;
  AttackOutcome c = ib::pgd_attack(m, ds.x, ds.y, ids, other);
  bool differs = false;
  for (std::size_t i = 0; i < a.loss.size(); ++i)
    differs = differs || a.loss[i] != c.loss[i];
  CHECK(differs);
}

TEST_CASE("success flags line up with first_success_restart") {
  Model m = linear_x1_model();
  LabeledDataset ds = ib::make_toy_dataset(ib::TaskKind::toy_ours, 50, 13);
  auto ids = iota_ids(50);
  AttackConfig cfg;
  cfg.epsilon = 4.5;  // mid-range: some examples break, some survive
  AttackOutcome out = ib::fgs_attack(m, ds.x, ds.y, ids, cfg);
  bool saw_success = false, saw_failure = false;
  for (std::size_t i = 0; i < out.success.size(); ++i) {
    if (out.success[i]) {
      saw_success = true;
      CHECK(out.first_success_restart[i] == 0);
    } else {
      saw_failure = true;
      CHECK(out.first_success_restart[i] == -1);
    }
    CHECK(std::isfinite(out.loss[i]));
  }
  CHECK(saw_success);
  CHECK(saw_failure);
}

TEST_CASE("attack configs are validated") {
  Model m = linear_x1_model();
  Tensor x = Tensor::from({1, 2}, std::vector<double>{0.5, 0.5});
  std::vector<std::int32_t> y = {1};
  auto ids = iota_ids(1);

  AttackConfig cfg;
  cfg.epsilon = -0.1;
  CHECK_THROWS_AS(ib::fgs_attack(m, x, y, ids, cfg), ib::ConfigError);

  cfg = AttackConfig{};
  cfg.epsilon = 0.1;
  cfg.restarts = 0;
  CHECK_THROWS_AS(ib::fgs_attack(m, x, y, ids, cfg), ib::ConfigError);

  cfg = AttackConfig{};
  cfg.epsilon = 0.1;
  cfg.alpha = 0.01;
  cfg.steps = 0;  // pgd needs steps
  CHECK_THROWS_AS(ib::pgd_attack(m, x, y, ids, cfg), ib::ConfigError);

  cfg = AttackConfig{};
  cfg.epsilon = 0.1;
  cfg.steps = 5;
  cfg.alpha = 0.0;  // and a positive step size
  CHECK_THROWS_AS(ib::pgd_attack(m, x, y, ids, cfg), ib::ConfigError);

  cfg = AttackConfig{};
  cfg.epsilon = 0.1;
  cfg.samples = 0;
  CHECK_THROWS_AS(ib::fgs_attack(m, x, y, ids, cfg), ib::ConfigError);

  cfg = AttackConfig{};
  cfg.epsilon = 0.1;
  cfg.bounded = true;
  cfg.lo = 1.0;
  cfg.hi = 0.0;
  CHECK_THROWS_AS(ib::fgs_attack(m, x, y, ids, cfg), ib::ConfigError);

  std::vector<std::int32_t> bad_y = {1, 0};  // label count != batch
  cfg = AttackConfig{};
  cfg.epsilon = 0.1;
  CHECK_THROWS_AS(ib::fgs_attack(m, x, bad_y, ids, cfg), ib::ConfigError);
}

TEST_CASE("robust_accuracy enforces the attack contract") {
  Model m = linear_x1_model();
  LabeledDataset ds;
  ds.x = Tensor::from({2, 2}, std::vector<double>{0.8, 0.8, 0.8, 0.8});
  ds.y = {1, 1};
  ds.num_classes = 2;
  ds.kind = ib::TaskKind::toy_ours;
  ds.name = "tiny";

  SUBCASE("budget violation") {
    auto fn = [](const Model&, const Tensor& x, std::span<const std::int32_t>,
                 std::span<const std::int64_t>) {
      AttackOutcome out;
      std::vector<double> v(x.f64().begin(), x.f64().end());
      for (auto& e : v) e += 0.5;  // twice the declared budget
      out.x_adv = Tensor::from(x.shape(), std::move(v));
      out.success.assign(2, 1);
      out.loss.assign(2, 0.0);
      out.first_success_restart.assign(2, 0);
      out.epsilon = 0.25;
      return out;
    };
    CHECK_THROWS_AS(
        ib::robust_accuracy(m, ds, -1, fn, ib::EvalMode::mean, 1, 0),
        ib::ContractError);
  }

  SUBCASE("bounds violation") {
    auto fn = [](const Model&, const Tensor& x, std::span<const std::int32_t>,
                 std::span<const std::int64_t>) {
      AttackOutcome out;
      std::vector<double> v(x.f64().begin(), x.f64().end());
      for (auto& e : v) e += 0.5;  // inside the budget but above hi = 1
      out.x_adv = Tensor::from(x.shape(), std::move(v));
      out.success.assign(2, 1);
      out.loss.assign(2, 0.0);
      out.first_success_restart.assign(2, 0);
      out.epsilon = 1.0;
      out.bounded = true;
      out.lo = 0.0;
      out.hi = 1.0;
      return out;
    };
    CHECK_THROWS_AS(
        ib::robust_accuracy(m, ds, -1, fn, ib::EvalMode::mean, 1, 0),
        ib::ContractError);
  }

  SUBCASE("wrong batch shape") {
    auto fn = [](const Model&, const Tensor&, std::span<const std::int32_t>,
                 std::span<const std::int64_t>) {
      AttackOutcome out;
      out.x_adv = Tensor::zeros({1, 2});
      out.success.assign(1, 0);
      out.loss.assign(1, 0.0);
      out.first_success_restart.assign(1, -1);
      out.epsilon = 1.0;
      return out;
    };
    CHECK_THROWS_AS(
        ib::robust_accuracy(m, ds, -1, fn, ib::EvalMode::mean, 1, 0),
        ib::ContractError);
  }
}

TEST_CASE("robust_accuracy honors the example limit") {
  Model m = linear_x1_model();
  LabeledDataset ds = ib::make_toy_dataset(ib::TaskKind::toy_ours, 40, 17);
  AttackConfig cfg;
  cfg.epsilon = 0.1;
  ib::RobustEval ev =
      ib::robust_accuracy(m, ds, 7, wrap_fgs(cfg), ib::EvalMode::mean, 1, 0);
  CHECK(ev.n == 7);
  CHECK(ev.outcome.n() == 7);
  CHECK(ev.outcome.x_adv.dim(0) == 7);
}

TEST_CASE("zero-epsilon fgs returns the clean points") {
  Model m = linear_x1_model();
  LabeledDataset ds = ib::make_toy_dataset(ib::TaskKind::toy_ours, 12, 19);
  auto ids = iota_ids(12);
  AttackConfig cfg;
  cfg.epsilon = 0.0;
  AttackOutcome out = ib::fgs_attack(m, ds.x, ds.y, ids, cfg);
  const auto xv = ds.x.f64();
  const auto av = out.x_adv.f64();
  for (std::size_t i = 0; i < av.size(); ++i) CHECK(av[i] == xv[i]);
  CHECK(out.success_rate() == 0.0);  // the model is perfect on clean data
}
