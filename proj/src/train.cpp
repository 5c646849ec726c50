#include "ib/train.hpp"

#include <cmath>

#include "ib/errors.hpp"
#include "ib/ops.hpp"
#include "ib/tape.hpp"

namespace ib {

void validate_train_config(const TrainConfig& cfg) {
  if (cfg.opt.lr <= 0.0) throw ConfigError("train: lr must be > 0");
  if (cfg.opt.kind == OptKind::adam) {
    if (cfg.opt.beta1 < 0.0 || cfg.opt.beta1 >= 1.0 || cfg.opt.beta2 < 0.0 ||
        cfg.opt.beta2 >= 1.0)
      throw ConfigError("train: adam betas must lie in [0,1)");
    if (cfg.opt.eps <= 0.0) throw ConfigError("train: adam eps must be > 0");
  } else {
    if (cfg.opt.momentum < 0.0 || cfg.opt.momentum >= 1.0)
      throw ConfigError("train: momentum must lie in [0,1)");
    if (cfg.opt.nesterov && cfg.opt.momentum == 0.0)
      throw ConfigError("train: nesterov needs momentum > 0");
  }
  if (cfg.batch_size < 1) throw ConfigError("train: batch size must be >= 1");
  if (cfg.polyak < 0.0 || cfg.polyak >= 1.0)
    throw ConfigError("train: polyak decay must lie in [0,1)");
  if (cfg.resample) {
    if (cfg.iterations < 1)
      throw ConfigError("train: resample mode needs iterations >= 1");
    if (cfg.epochs != 0)
      throw ConfigError("train: epochs and resample iterations are exclusive");
  } else {
    if (cfg.epochs < 1) throw ConfigError("train: epochs must be >= 1");
    if (cfg.iterations != 0)
      throw ConfigError("train: iterations only apply to resample mode");
  }
  if (cfg.schedule.every_epochs < 0 || cfg.schedule.factor <= 0.0)
    throw ConfigError("train: bad lr schedule");
  if (cfg.anneal.enabled && cfg.anneal.ramp_epochs < 1)
    throw ConfigError("train: anneal ramp must be >= 1 epoch");
  if (cfg.eval_every < 1) throw ConfigError("train: eval_every must be >= 1");
  if (cfg.eval_samples < 1) throw ConfigError("train: eval_samples must be >= 1");
}

namespace {

struct OptimizerState {
  std::vector<Tensor> m;  // adam first moment / sgd velocity
  std::vector<Tensor> v;  // adam second moment
  std::int64_t t = 0;
};

void step_one(const OptimizerConfig& opt, double lr, std::span<double> p,
              std::span<const double> g, std::span<double> m, std::span<double> v,
              std::int64_t t) {
  if (opt.kind == OptKind::adam) {
    double bc1 = 1.0 - std::pow(opt.beta1, static_cast<double>(t));
    double bc2 = 1.0 - std::pow(opt.beta2, static_cast<double>(t));
    for (std::size_t k = 0; k < p.size(); ++k) {
      m[k] = opt.beta1 * m[k] + (1.0 - opt.beta1) * g[k];
      v[k] = opt.beta2 * v[k] + (1.0 - opt.beta2) * g[k] * g[k];
      p[k] -= lr * (m[k] / bc1) / (std::sqrt(v[k] / bc2) + opt.eps);
    }
  } else {
    for (std::size_t k = 0; k < p.size(); ++k) {
      m[k] = opt.momentum * m[k] + g[k];
      double step = opt.nesterov ? g[k] + opt.momentum * m[k] : m[k];
      p[k] -= lr * step;
    }
  }
}

void apply_step(const OptimizerConfig& opt, double lr, std::vector<Tensor>& params,
                const std::vector<Tensor>& grads, OptimizerState& st) {
  ++st.t;
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!grads[i].defined()) continue;  // parameter unused by this loss
    if (params[i].dtype() == DType::f64) {
      step_one(opt, lr, params[i].mut_f64(), grads[i].f64(), st.m[i].mut_f64(),
               st.v[i].mut_f64(), st.t);
    } else {
      // optimizer state and arithmetic stay in f64 even for f32 models
      Tensor pi = params[i].astype(DType::f64);
      Tensor gi = grads[i].astype(DType::f64);
      step_one(opt, lr, pi.mut_f64(), gi.f64(), st.m[i].mut_f64(), st.v[i].mut_f64(),
               st.t);
      params[i] = pi.astype(DType::f32);
    }
  }
}

double rate_weight_at(const Model& m, const TrainConfig& cfg, std::int64_t epoch) {
  if (!cfg.anneal.enabled) return m.rate_weight();
  if (epoch >= cfg.anneal.ramp_epochs) return cfg.anneal.target;
  double f = static_cast<double>(epoch) / static_cast<double>(cfg.anneal.ramp_epochs);
  return cfg.anneal.initial + f * (cfg.anneal.target - cfg.anneal.initial);
}

}  // namespace

TrainResult train(const Model& init, const LabeledDataset& data,
                  const LabeledDataset* eval_data, const TrainConfig& cfg) {
  validate_train_config(cfg);
  validate_model(init);
  if (data.num_classes != init.arch.num_classes)
    throw ConfigError("train: dataset has " + std::to_string(data.num_classes) +
                      " classes, model expects " +
                      std::to_string(init.arch.num_classes));

  Model work = init;
  for (auto& p : work.params) p = p.clone();

  OptimizerState st;
  for (const auto& p : work.params) {
    st.m.push_back(Tensor::zeros(p.shape()));
    st.v.push_back(Tensor::zeros(p.shape()));
  }

  bool polyak_on = cfg.polyak > 0.0;
  std::vector<Tensor> ema;
  if (polyak_on)
    for (const auto& p : work.params) ema.push_back(p.astype(DType::f64).clone());

  BatchIterator batches(data, cfg.batch_size, cfg.seed, cfg.resample);

  std::int64_t iters_per_epoch =
      cfg.resample ? 1 : (data.n() + cfg.batch_size - 1) / cfg.batch_size;
  std::int64_t total_iters =
      cfg.resample ? cfg.iterations : cfg.epochs * iters_per_epoch;

  TrainResult result;
  result.polyak_used = polyak_on;

  double last_finite_loss = std::nan("");
  double ep_loss = 0.0, ep_ce = 0.0, ep_rate = 0.0;
  std::int64_t ep_batches = 0;

  auto eval_model = [&](const Model& shell) {
    Model m = shell;
    if (polyak_on) {
      m.params.clear();
      for (const auto& e : ema)
        m.params.push_back(init.arch.dtype == DType::f64 ? e : e.astype(DType::f32));
    }
    return m;
  };

  auto record_history = [&](std::int64_t step, double lr, double rw) {
    HistoryRow row;
    row.step = step;
    row.loss = ep_loss / std::max<std::int64_t>(ep_batches, 1);
    row.ce = ep_ce / std::max<std::int64_t>(ep_batches, 1);
    row.rate = ep_rate / std::max<std::int64_t>(ep_batches, 1);
    row.lr = lr;
    row.rate_weight = rw;
    if (eval_data) {
      Model m = eval_model(work);
      row.eval_acc = accuracy(m, *eval_data, m.default_eval(), cfg.eval_samples,
                              splitmix64(cfg.seed ^ static_cast<std::uint64_t>(step)));
    }
    result.history.push_back(row);
    ep_loss = ep_ce = ep_rate = 0.0;
    ep_batches = 0;
  };

  std::int64_t history_stride =
      cfg.resample ? std::max<std::int64_t>(cfg.iterations / 10, 1) * cfg.eval_every : 0;

  for (std::int64_t it = 0; it < total_iters; ++it) {
    std::int64_t epoch = cfg.resample ? it : it / iters_per_epoch;
    double lr = cfg.opt.lr;
    if (cfg.schedule.every_epochs > 0)
      lr *= std::pow(cfg.schedule.factor,
                     static_cast<double>(epoch / cfg.schedule.every_epochs));
    double rw = rate_weight_at(work, cfg, epoch);

    Batch b = batches.next();
    Tensor xb = init.arch.dtype == DType::f64 ? b.x : b.x.astype(DType::f32);

    LossParts parts;
    std::vector<Tensor> grads(work.params.size());
    {
      Tape tape;
      std::vector<Tensor> attached;
      attached.reserve(work.params.size());
      for (const auto& p : work.params) attached.push_back(tape.var(p));
      Rng noise = Rng::derive(cfg.seed, {Rng::kTrainNoise, static_cast<std::uint64_t>(it)});
      Tensor loss = model_loss(work, attached, xb, b.y, rw, work.samples,
                               cfg.estimator, noise, &parts);
      if (!std::isfinite(parts.total)) {
        std::string last = std::isnan(last_finite_loss)
                               ? std::string("none")
                               : std::to_string(last_finite_loss);
        throw NumericError("training diverged at epoch " + std::to_string(epoch) +
                           ", iteration " + std::to_string(it) +
                           " (loss not finite; last finite loss " + last + ")");
      }
      last_finite_loss = parts.total;
      tape.backward(loss);
      for (std::size_t i = 0; i < attached.size(); ++i)
        if (tape.has_grad(attached[i])) grads[i] = tape.grad(attached[i]);
    }

    apply_step(cfg.opt, lr, work.params, grads, st);

    if (polyak_on) {
      for (std::size_t i = 0; i < ema.size(); ++i) {
        auto e = ema[i].mut_f64();
        Tensor pf = work.params[i].dtype() == DType::f64
                        ? work.params[i]
                        : work.params[i].astype(DType::f64);
        auto p = pf.f64();
        for (std::size_t k = 0; k < e.size(); ++k)
          e[k] = cfg.polyak * e[k] + (1.0 - cfg.polyak) * p[k];
      }
    }

    ep_loss += parts.total;
    ep_ce += parts.ce;
    ep_rate += parts.rate;
    ++ep_batches;

    bool at_end = it + 1 == total_iters;
    if (cfg.resample) {
      if (at_end || (it + 1) % history_stride == 0)
        record_history(it + 1, lr, rw);
    } else if ((it + 1) % iters_per_epoch == 0) {
      if (at_end || (epoch + 1) % cfg.eval_every == 0)
        record_history(epoch, lr, rw);
    }
  }

  result.raw_params = work.params;
  result.model = eval_model(work);
  return result;
}

}  // namespace ib
