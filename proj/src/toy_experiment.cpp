#include "ib/toy_experiment.hpp"

#include <cmath>
#include <utility>

#include "ib/errors.hpp"
#include "ib/toy_data.hpp"

namespace ib {

const char* toy_model_name(ToyModel m) {
  return m == ToyModel::linear_det ? "linear_det" : "vib";
}

ToyModel toy_model_from_name(const std::string& s) {
  if (s == "linear_det") return ToyModel::linear_det;
  if (s == "vib") return ToyModel::vib;
  throw ConfigError("unknown toy model '" + s + "' (linear_det, vib)");
}

ToyRunConfig resolved_toy_config(const ToyRunConfig& cfg) {
  ToyRunConfig r = cfg;
  if (r.task != TaskKind::toy_ours && r.task != TaskKind::toy_tsipras)
    throw ConfigError("run_toy handles the synthetic tasks only");
  const bool ours = r.task == TaskKind::toy_ours;
  if (r.bottleneck == 0) r.bottleneck = ours ? 2 : 25;
  if (r.iterations == 0) r.iterations = ours ? 1000 : 200;
  if (r.bottleneck < 1) throw ConfigError("toy bottleneck must be >= 1");
  if (r.iterations < 1) throw ConfigError("toy iterations must be >= 1");
  if (r.batch_size < 1) throw ConfigError("toy batch size must be >= 1");
  if (r.eval_n < 1) throw ConfigError("toy eval size must be >= 1");
  if (r.samples < 1) throw ConfigError("toy sample count must be >= 1");
  if (r.beta < 0.0) throw ConfigError("toy beta must be >= 0");
  return r;
}

Tensor attack_ours_x2(const Tensor& x, std::span<const std::int32_t> y,
                      double epsilon) {
  if (x.rank() != 2 || x.dim(1) != 2)
    throw ConfigError("attack_ours_x2 expects [n, 2] inputs, got " +
                      shape_str(x.shape()));
  if (y.size() != static_cast<std::size_t>(x.dim(0)))
    throw ConfigError("attack_ours_x2: label count does not match inputs");
  if (!(epsilon >= 0.0) || !std::isfinite(epsilon))
    throw ConfigError("attack_ours_x2 epsilon must be finite and >= 0");
  Tensor out = x.detached().astype(DType::f64).clone();
  auto v = out.mut_f64();
  const std::int64_t n = x.dim(0);
  for (std::int64_t i = 0; i < n; ++i) {
    double& x2 = v[static_cast<std::size_t>(2 * i + 1)];
    x2 -= epsilon * (x2 > 0.0 ? 1.0 : (x2 < 0.0 ? -1.0 : 0.0));
  }
  return out;
}

Tensor attack_ours_x2_label(const Tensor& x, std::span<const std::int32_t> y,
                            double epsilon) {
  if (x.rank() != 2 || x.dim(1) != 2)
    throw ConfigError("attack_ours_x2_label expects [n, 2] inputs, got " +
                      shape_str(x.shape()));
  if (y.size() != static_cast<std::size_t>(x.dim(0)))
    throw ConfigError("attack_ours_x2_label: label count does not match inputs");
  if (!(epsilon >= 0.0) || !std::isfinite(epsilon))
    throw ConfigError("attack_ours_x2_label epsilon must be finite and >= 0");
  Tensor out = x.detached().astype(DType::f64).clone();
  auto v = out.mut_f64();
  const std::int64_t n = x.dim(0);
  for (std::int64_t i = 0; i < n; ++i) {
    const double s = y[static_cast<std::size_t>(i)] == 1 ? 1.0 : -1.0;
    v[static_cast<std::size_t>(2 * i + 1)] -= epsilon * s;
  }
  return out;
}

Tensor attack_tsipras_shift(const Tensor& x, std::span<const std::int32_t> y,
                            double eta) {
  if (x.rank() != 2 || x.dim(1) < 2)
    throw ConfigError("attack_tsipras_shift expects [n, d+1] inputs with d >= 1");
  if (y.size() != static_cast<std::size_t>(x.dim(0)))
    throw ConfigError("attack_tsipras_shift: label count does not match inputs");
  if (!std::isfinite(eta) || eta < 0.0)
    throw ConfigError("attack_tsipras_shift eta must be finite and >= 0");
  Tensor out = x.detached().astype(DType::f64).clone();
  auto v = out.mut_f64();
  const std::int64_t n = x.dim(0), dim = x.dim(1);
  for (std::int64_t i = 0; i < n; ++i) {
    const double s = y[static_cast<std::size_t>(i)] == 1 ? 1.0 : -1.0;
    for (std::int64_t j = 1; j < dim; ++j)
      v[static_cast<std::size_t>(i * dim + j)] -= 2.0 * eta * s;
  }
  return out;
}

LabeledDataset sample_low_density_adversarials(std::int64_t n,
                                               std::uint64_t seed) {
  if (n < 1) throw ConfigError("low-density set needs n >= 1");
  Rng rng = Rng::derive(seed, {Rng::kDataset, 1});
  std::vector<double> x(static_cast<std::size_t>(n) * 2);
  std::vector<std::int32_t> y(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i) {
    const double s = rng.uniform() < 0.5 ? -1.0 : 1.0;
    const double x1 = s * rng.uniform(0.0, 10.0);
    const double x2 = -s * rng.uniform(0.0, 1.0);  // disagreeing branch only
    x[static_cast<std::size_t>(2 * i)] = x1;
    x[static_cast<std::size_t>(2 * i + 1)] = x2;
    y[static_cast<std::size_t>(i)] = s > 0 ? 1 : 0;
  }
  LabeledDataset ds;
  ds.x = Tensor::from({n, 2}, std::move(x));
  ds.y = std::move(y);
  ds.num_classes = 2;
  ds.kind = TaskKind::toy_ours;
  ds.bounded01 = false;
  ds.name = "toy_ours_low_density-n" + std::to_string(n) + "-s" +
            std::to_string(seed);
  ds.fingerprint = dataset_fingerprint(ds.x, ds.y);
  return ds;
}

double std_normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

namespace {

std::vector<std::int32_t> predict_sign_col(const Tensor& x, std::int64_t col) {
  const std::int64_t n = x.dim(0), d = x.dim(1);
  const auto v = x.f64();
  std::vector<std::int32_t> p(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i)
    p[static_cast<std::size_t>(i)] = v[i * d + col] > 0.0 ? 1 : 0;
  return p;
}

std::vector<std::int32_t> predict_avg_rest(const Tensor& x) {
  const std::int64_t n = x.dim(0), d = x.dim(1);
  const auto v = x.f64();
  std::vector<std::int32_t> p(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i) {
    double sum = 0.0;
    for (std::int64_t j = 1; j < d; ++j) sum += v[i * d + j];
    p[static_cast<std::size_t>(i)] = sum > 0.0 ? 1 : 0;
  }
  return p;
}

}  // namespace

std::vector<ToyOracle> bayes_oracles(TaskKind which) {
  const ToyTsiprasSpec spec;
  std::vector<ToyOracle> out;
  switch (which) {
    case TaskKind::toy_ours:
      // x1 = y*U(0,10) always carries the label; the attack leaves it alone.
      out.push_back({"sign_x1", 1.0, 1.0,
                     [](const Tensor& x) { return predict_sign_col(x, 0); }});
      // sign(x2) agrees with y w.p. 0.9; the unit shift flips the decision
      // on both branches, so exactly the 10% disagreeing mass survives.
      out.push_back({"sign_x2", 0.9, 0.1,
                     [](const Tensor& x) { return predict_sign_col(x, 1); }});
      return out;
    case TaskKind::toy_tsipras: {
      out.push_back({"sign_x1", spec.p, spec.p,
                     [](const Tensor& x) { return predict_sign_col(x, 0); }});
      // Mean of d iid N(eta*y, 1) features is N(eta*y, 1/d):
      // clean accuracy Phi(eta*sqrt(d)); the 2*eta shift mirrors the mean.
      const double z = spec.eta * std::sqrt(static_cast<double>(spec.d));
      out.push_back({"avg_features", std_normal_cdf(z), std_normal_cdf(-z),
                     [](const Tensor& x) { return predict_avg_rest(x); }});
      return out;
    }
    case TaskKind::mnist: break;
  }
  throw ConfigError("bayes_oracles covers the synthetic tasks only");
}

double oracle_accuracy(const ToyOracle& oracle, const Tensor& x,
                       std::span<const std::int32_t> y) {
  auto pred = oracle.predict(x);
  if (pred.size() != y.size())
    throw ContractError("oracle returned the wrong number of predictions");
  std::int64_t ok = 0;
  for (std::size_t i = 0; i < y.size(); ++i) ok += pred[i] == y[i];
  return static_cast<double>(ok) / static_cast<double>(y.size());
}

namespace {

double accuracy_on(const Model& m, const Tensor& x,
                   std::span<const std::int32_t> y, EvalMode mode, int S,
                   std::uint64_t seed) {
  Tensor probs = predict_probs(m, x, mode, S, seed, /*id_base=*/0);
  auto pred = argmax_rows(probs);
  std::int64_t ok = 0;
  for (std::size_t i = 0; i < y.size(); ++i) ok += pred[i] == y[i];
  return static_cast<double>(ok) / static_cast<double>(y.size());
}

}  // namespace

ToyReport run_toy(const ToyRunConfig& raw) {
  const ToyRunConfig cfg = resolved_toy_config(raw);
  const bool ours = cfg.task == TaskKind::toy_ours;
  const std::int64_t input_dim = ours ? 2 : ToyTsiprasSpec{}.d + 1;

  Architecture arch;
  arch.kind = cfg.model == ToyModel::linear_det ? ModelKind::det : ModelKind::vib;
  arch.input_dim = input_dim;
  arch.bottleneck = cfg.model == ToyModel::vib ? cfg.bottleneck : 0;
  arch.num_classes = 2;

  Model init;
  init.arch = arch;
  init.beta = cfg.model == ToyModel::vib ? cfg.beta : 0.0;
  init.samples = cfg.samples;
  if (cfg.model == ToyModel::linear_det) {
    init.params = init_params(arch, InitScheme::zeros, cfg.seed);
  } else {
    // Xavier encoder, zero-initialized linear decoder.
    init.params = init_params(arch, InitScheme::xavier_uniform, cfg.seed);
    const ParamLayout layout = param_layout(arch);
    init.params[static_cast<std::size_t>(layout.wdec)] =
        Tensor::zeros(init.params[static_cast<std::size_t>(layout.wdec)].shape());
    init.params[static_cast<std::size_t>(layout.bdec)] =
        Tensor::zeros(init.params[static_cast<std::size_t>(layout.bdec)].shape());
  }

  // The template dataset seeds the resampling generator; batches are fresh
  // draws each iteration.
  LabeledDataset task_template = make_toy_dataset(cfg.task, 1, cfg.seed);
  TrainConfig tc;
  tc.opt.kind = OptKind::sgd;
  tc.opt.lr = cfg.lr;
  tc.opt.momentum = cfg.momentum;
  tc.opt.nesterov = cfg.nesterov;
  tc.iterations = cfg.iterations;
  tc.batch_size = cfg.batch_size;
  tc.resample = true;
  tc.seed = cfg.seed;
  tc.eval_samples = cfg.samples;
  tc.estimator = cfg.estimator;

  ToyReport out;
  out.config = cfg;
  out.train = train(init, task_template, nullptr, tc);
  const Model& m = out.train.model;

  LabeledDataset eval = make_toy_dataset(cfg.task, cfg.eval_n, cfg.seed);
  const std::string model_id =
      std::string(task_name(cfg.task)) + "-" + toy_model_name(cfg.model);

  Tensor x_attacked = ours ? attack_ours_x2(eval.x, eval.y, 1.0)
                           : attack_tsipras_shift(eval.x, eval.y,
                                                  ToyTsiprasSpec{}.eta);
  const char* attack_name = ours ? "x2_shift" : "gauss_shift";
  const double attack_eps = ours ? 1.0 : 2.0 * ToyTsiprasSpec{}.eta;
  Tensor x_label;
  LabeledDataset low_density;
  if (ours) {
    x_label = attack_ours_x2_label(eval.x, eval.y, 1.0);
    low_density = sample_low_density_adversarials(cfg.eval_n, cfg.seed);
  }

  std::vector<EvalMode> modes;
  if (cfg.model == ToyModel::vib)
    modes = {EvalMode::stochastic, EvalMode::mean};
  else
    modes = {EvalMode::mean};

  for (EvalMode mode : modes) {
    const double clean =
        accuracy_on(m, eval.x, eval.y, mode, cfg.samples, cfg.seed);
    ReportRow row;
    row.model_id = model_id;
    row.seed = cfg.seed;
    row.attack = attack_name;
    row.epsilon = attack_eps;
    row.restarts = 1;
    row.eval_mode = eval_mode_name(mode);
    row.standard_acc = clean;
    row.robust_acc =
        accuracy_on(m, x_attacked, eval.y, mode, cfg.samples, cfg.seed);
    row.n_examples = cfg.eval_n;
    row.num_classes = 2;
    out.report.add_row(row);
    if (ours) {
      ReportRow lab = row;
      lab.attack = "x2_shift_label";
      lab.robust_acc =
          accuracy_on(m, x_label, eval.y, mode, cfg.samples, cfg.seed);
      out.report.add_row(lab);
      ReportRow ld = row;
      ld.attack = "low_density";
      ld.epsilon = 0.0;
      ld.robust_acc = accuracy_on(m, low_density.x, low_density.y, mode,
                                  cfg.samples, cfg.seed);
      out.report.add_row(ld);
    }
  }
  return out;
}

}  // namespace ib
