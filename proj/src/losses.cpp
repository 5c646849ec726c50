#include "ib/losses.hpp"

#include "ib/errors.hpp"
#include "ib/ops.hpp"

namespace ib {

const char* rate_estimator_name(RateEstimator e) {
  return e == RateEstimator::analytic ? "analytic" : "sampled";
}

RateEstimator rate_estimator_from_name(const std::string& s) {
  if (s == "analytic") return RateEstimator::analytic;
  if (s == "sampled") return RateEstimator::sampled;
  throw ConfigError("unknown rate estimator '" + s + "' (analytic or sampled)");
}

namespace {

Tensor draw_noise(std::int64_t n, std::int64_t K, DType dt, Rng& rng) {
  std::vector<double> v(static_cast<std::size_t>(n * K));
  rng.fill_normal(v);
  Tensor t = Tensor::from({n, K}, std::move(v));
  return dt == DType::f64 ? t : t.astype(dt);
}

void check_labels(std::span<const std::int32_t> y, std::int64_t n) {
  if (static_cast<std::int64_t>(y.size()) != n)
    throw ContractError("loss: " + std::to_string(y.size()) + " labels for " +
                        std::to_string(n) + " rows");
}

}  // namespace

Tensor det_loss(const Architecture& arch, std::span<const Tensor> params,
                const Tensor& x, std::span<const std::int32_t> y, LossParts* parts) {
  check_labels(y, x.dim(0));
  Tensor lp = take_per_row(log_softmax(det_logits(arch, params, x)), y);
  Tensor ce = scale(mean(lp), -1.0);
  if (parts) {
    parts->ce = ce.at(0);
    parts->rate = 0.0;
    parts->total = parts->ce;
  }
  return ce;
}

namespace {

// Shared by vib and ceb: sigma is the encoder's sigma head for vib and
// constant 1 for ceb; rate_fn builds the rate term from the samples.
Tensor bottleneck_loss(const Architecture& arch, std::span<const Tensor> params,
                       const Tensor& x, std::span<const std::int32_t> y,
                       double rate_weight, int S, RateEstimator estimator,
                       Rng& noise_rng, LossParts* parts) {
  check_labels(y, x.dim(0));
  if (S < 1) throw ConfigError("loss: need S >= 1 samples");
  std::int64_t n = x.dim(0);
  std::int64_t K = arch.bottleneck;

  Encoded enc = encode(arch, params, x);

  Tensor ce_acc;
  Tensor sampled_rate_acc;
  for (int s = 0; s < S; ++s) {
    Tensor noise = draw_noise(n, K, x.dtype(), noise_rng);
    Tensor z = gaussian_reparam_sample(enc.mu, enc.sigma, noise);
    Tensor lp = take_per_row(log_softmax(decode_logits(arch, params, z)), y);
    Tensor term = mean(lp);
    ce_acc = ce_acc.defined() ? add(ce_acc, term) : term;

    if (estimator == RateEstimator::sampled) {
      Tensor per_row;
      if (arch.kind == ModelKind::vib) {
        // log p(z|x) - log q(z) = sum_k [ 0.5 z^2 - log sigma - 0.5 noise^2 ]
        Tensor inner = sub(scale(square(z), 0.5),
                           add(log(enc.sigma), scale(square(noise), 0.5)));
        per_row = row_sum(inner);
      } else {
        // sigma = 1: log p(z|x) - log q(z|y) = 0.5 (||z - mu_y||^2 - ||noise||^2)
        Tensor mu_y = take_rows(params[static_cast<std::size_t>(
                                    param_layout(arch).backward)],
                                y);
        Tensor diff = sub(z, mu_y);
        per_row = scale(sub(row_sum(square(diff)), row_sum(square(noise))), 0.5);
      }
      Tensor rterm = mean(per_row);
      sampled_rate_acc =
          sampled_rate_acc.defined() ? add(sampled_rate_acc, rterm) : rterm;
    }
  }
  Tensor ce = scale(ce_acc, -1.0 / static_cast<double>(S));

  Tensor rate;
  if (estimator == RateEstimator::analytic) {
    if (arch.kind == ModelKind::vib) {
      // 0.5 * mean_n sum_k (mu^2 + sigma^2 - 1 - 2 log sigma)
      Tensor inner = sub(add(square(enc.mu), square(enc.sigma)),
                         add_scalar(scale(log(enc.sigma), 2.0), 1.0));
      rate = scale(mean(row_sum(inner)), 0.5);
    } else {
      Tensor mu_y = take_rows(
          params[static_cast<std::size_t>(param_layout(arch).backward)], y);
      rate = scale(mean(row_sum(square(sub(enc.mu, mu_y)))), 0.5);
    }
  } else {
    rate = scale(sampled_rate_acc, 1.0 / static_cast<double>(S));
  }

  Tensor total = add(ce, scale(rate, rate_weight));
  if (parts) {
    parts->ce = ce.at(0);
    parts->rate = rate.at(0);
    parts->total = total.at(0);
  }
  return total;
}

}  // namespace

Tensor vib_loss(const Architecture& arch, std::span<const Tensor> params,
                const Tensor& x, std::span<const std::int32_t> y,
                double rate_weight, int S, RateEstimator estimator, Rng& noise,
                LossParts* parts) {
  if (arch.kind != ModelKind::vib) throw ContractError("vib_loss: wrong model kind");
  return bottleneck_loss(arch, params, x, y, rate_weight, S, estimator, noise, parts);
}

Tensor ceb_loss(const Architecture& arch, std::span<const Tensor> params,
                const Tensor& x, std::span<const std::int32_t> y,
                double rate_weight, int S, RateEstimator estimator, Rng& noise,
                LossParts* parts) {
  if (arch.kind != ModelKind::ceb) throw ContractError("ceb_loss: wrong model kind");
  return bottleneck_loss(arch, params, x, y, rate_weight, S, estimator, noise, parts);
}

Tensor model_loss(const Model& m, std::span<const Tensor> params, const Tensor& x,
                  std::span<const std::int32_t> y, double rate_weight, int S,
                  RateEstimator estimator, Rng& noise, LossParts* parts) {
  switch (m.arch.kind) {
    case ModelKind::det: return det_loss(m.arch, params, x, y, parts);
    case ModelKind::vib:
      return vib_loss(m.arch, params, x, y, rate_weight, S, estimator, noise, parts);
    case ModelKind::ceb:
      return ceb_loss(m.arch, params, x, y, rate_weight, S, estimator, noise, parts);
  }
  throw ContractError("model_loss: unknown kind");
}

}  // namespace ib
