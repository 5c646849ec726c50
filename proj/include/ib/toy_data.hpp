#pragma once

#include <cstdint>
#include <vector>

#include "ib/rng.hpp"
#include "ib/tensor.hpp"

namespace ib {

// Two-class synthetic tasks. Labels are stored as {0,1}; the underlying
// sign variable is y in {-1,+1} with -1 -> class 0, +1 -> class 1.

// Mixture task, 2 features:
//   x1 = y * U(0, 10)                      (always agrees with y in sign)
//   x2 = s * U(0, 1), s = y w.p. 0.9, else -y
struct ToyOursSpec {};

// Correlated-Gaussians task, d+1 features:
//   x1 = +y w.p. p, else -y
//   x_j ~ N(eta * y, 1) for j = 2..d+1, iid
struct ToyTsiprasSpec {
  std::int64_t d = 100;
  double p = 0.95;
  double eta = 0.3;
};

struct ToySample {
  Tensor x;  // [n, dim]
  std::vector<std::int32_t> y;
};

ToySample sample_toy_ours(std::int64_t n, Rng& rng);
ToySample sample_toy_tsipras(const ToyTsiprasSpec& spec, std::int64_t n, Rng& rng);

}  // namespace ib
