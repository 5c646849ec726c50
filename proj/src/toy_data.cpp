#include "ib/toy_data.hpp"

#include "ib/errors.hpp"

namespace ib {

ToySample sample_toy_ours(std::int64_t n, Rng& rng) {
  std::vector<double> x(static_cast<std::size_t>(n) * 2);
  std::vector<std::int32_t> y(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i) {
    double s = rng.uniform() < 0.5 ? -1.0 : 1.0;
    double x1 = s * rng.uniform(0.0, 10.0);
    double agree = rng.uniform() < 0.9 ? 1.0 : -1.0;
    double x2 = s * agree * rng.uniform(0.0, 1.0);
    x[static_cast<std::size_t>(2 * i)] = x1;
    x[static_cast<std::size_t>(2 * i + 1)] = x2;
    y[static_cast<std::size_t>(i)] = s > 0 ? 1 : 0;
  }
  return {Tensor::from({n, 2}, std::move(x)), std::move(y)};
}

ToySample sample_toy_tsipras(const ToyTsiprasSpec& spec, std::int64_t n, Rng& rng) {
  if (spec.d < 1) throw ContractError("toy task: d must be >= 1");
  std::int64_t dim = spec.d + 1;
  std::vector<double> x(static_cast<std::size_t>(n * dim));
  std::vector<std::int32_t> y(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i) {
    double s = rng.uniform() < 0.5 ? -1.0 : 1.0;
    double* row = x.data() + i * dim;
    row[0] = rng.uniform() < spec.p ? s : -s;
    for (std::int64_t j = 1; j < dim; ++j)
      row[j] = spec.eta * s + rng.normal();
    y[static_cast<std::size_t>(i)] = s > 0 ? 1 : 0;
  }
  return {Tensor::from({n, dim}, std::move(x)), std::move(y)};
}

}  // namespace ib
