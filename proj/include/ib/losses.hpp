#pragma once

#include <span>

#include "ib/dataset.hpp"
#include "ib/model.hpp"
#include "ib/rng.hpp"
#include "ib/tensor.hpp"

namespace ib {

enum class RateEstimator { analytic, sampled };

const char* rate_estimator_name(RateEstimator e);
RateEstimator rate_estimator_from_name(const std::string& s);

struct LossParts {
  double total = 0.0;
  double ce = 0.0;
  double rate = 0.0;
};

// Training objectives. Parameters may be attached (training) or the input may
// be (attacks); the same graph serves both. The classification term averages
// -log q(y|z_s) over the S drawn samples; the rate term is either the closed
// Gaussian form or the single-sample Monte Carlo estimator
// (1/S) sum_s [log p(z_s|x) - log q(z_s)] under the same samples.
//
// rate_weight multiplies the rate term (beta for vib, exp(-rho) for ceb);
// `noise` supplies the reparameterization draws, advanced S*n*K normals.

Tensor det_loss(const Architecture& arch, std::span<const Tensor> params,
                const Tensor& x, std::span<const std::int32_t> y,
                LossParts* parts = nullptr);

Tensor vib_loss(const Architecture& arch, std::span<const Tensor> params,
                const Tensor& x, std::span<const std::int32_t> y,
                double rate_weight, int S, RateEstimator estimator, Rng& noise,
                LossParts* parts = nullptr);

Tensor ceb_loss(const Architecture& arch, std::span<const Tensor> params,
                const Tensor& x, std::span<const std::int32_t> y,
                double rate_weight, int S, RateEstimator estimator, Rng& noise,
                LossParts* parts = nullptr);

// Dispatches on arch.kind with the model's configured rate weight.
Tensor model_loss(const Model& m, std::span<const Tensor> params, const Tensor& x,
                  std::span<const std::int32_t> y, double rate_weight, int S,
                  RateEstimator estimator, Rng& noise, LossParts* parts = nullptr);

}  // namespace ib
