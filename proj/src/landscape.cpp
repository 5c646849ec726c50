#include "ib/landscape.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "ib/attacks.hpp"
#include "ib/errors.hpp"

namespace ib {

namespace {

// Scales to unit L-inf length; false if the vector is exactly zero.
bool normalize_linf(std::vector<double>& v) {
  double m = 0.0;
  for (double a : v) m = std::max(m, std::abs(a));
  if (m == 0.0) return false;
  for (double& a : v) a /= m;
  return true;
}

double cosine(const std::vector<double>& a, const std::vector<double>& b) {
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) return 1.0;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

std::vector<double> random_unit_dir(Rng& rng, std::size_t d) {
  std::vector<double> v(d);
  do {
    rng.fill_uniform(v, -1.0, 1.0);
  } while (!normalize_linf(v));
  return v;
}

}  // namespace

double landscape_point_loss(const Model& m, const Tensor& x, std::int32_t y,
                            GradMode gmode, int samples, std::uint64_t seed) {
  Tensor row = x.rank() == 1 ? x.reshaped({1, x.dim(0)}) : x;
  if (row.rank() != 2 || row.dim(0) != 1)
    throw ConfigError("landscape_point_loss evaluates a single example");
  const std::int32_t yy[1] = {y};
  std::vector<Rng> noise{Rng::derive(seed, {Rng::kLandscape, 1})};
  LossAndGrad lg = attack_loss_grad(m, row, yy, AttackLoss::cross_entropy, {},
                                    gmode, samples, noise, /*want_grad=*/false);
  return lg.loss[0];
}

LandscapeGrid loss_landscape(const Model& m, const Tensor& x, std::int32_t y,
                             double epsilon, const LandscapeConfig& cfg) {
  if (!(epsilon > 0.0) || !std::isfinite(epsilon))
    throw ConfigError("landscape epsilon must be finite and > 0");
  if (cfg.resolution < 2)
    throw ConfigError("landscape resolution must be >= 2");
  if (!(cfg.extent > 0.0))
    throw ConfigError("landscape extent must be > 0");
  Tensor x0 = (x.rank() == 1 ? x.reshaped({1, x.dim(0)}) : x)
                  .detached()
                  .astype(DType::f64);
  if (x0.rank() != 2 || x0.dim(0) != 1)
    throw ConfigError("loss_landscape takes a single example");
  const std::int64_t d = x0.dim(1);
  if (d < 2) throw ConfigError("loss_landscape needs input dimension >= 2");
  if (y < 0 || y >= m.arch.num_classes)
    throw ConfigError("landscape label out of range");
  const auto xv = x0.f64();
  if (cfg.bounded)
    for (double v : xv)
      if (v < cfg.lo || v > cfg.hi)
        throw DataError("loss_landscape input lies outside its own bounds");

  const GradMode gmode = cfg.mode;

  LandscapeGrid grid;
  grid.epsilon = epsilon;
  grid.extent = cfg.extent;
  grid.resolution = cfg.resolution;
  grid.ball_vertices = {{epsilon, epsilon},
                        {epsilon, -epsilon},
                        {-epsilon, -epsilon},
                        {-epsilon, epsilon}};

  // Worst-case direction from a single-restart PGD run.
  {
    AttackConfig acfg;
    acfg.epsilon = epsilon;
    acfg.alpha = epsilon / 10.0;
    acfg.steps = cfg.pgd_steps;
    acfg.restarts = 1;
    acfg.loss = AttackLoss::cross_entropy;
    acfg.samples = cfg.samples;
    acfg.eval_samples = cfg.samples;
    acfg.seed = cfg.seed;
    acfg.bounded = cfg.bounded;
    acfg.lo = cfg.lo;
    acfg.hi = cfg.hi;
    const std::int32_t yy[1] = {y};
    const std::int64_t ids[1] = {0};
    AttackOutcome out = pgd_attack(m, x0, yy, ids, acfg);
    const auto av = out.x_adv.f64();
    grid.d1.resize(static_cast<std::size_t>(d));
    for (std::int64_t k = 0; k < d; ++k)
      grid.d1[static_cast<std::size_t>(k)] = av[k] - xv[k];
  }

  Rng dir_rng = Rng::derive(cfg.seed, {Rng::kLandscape, 0});
  if (!normalize_linf(grid.d1)) {
    grid.fallback_random = true;
    grid.d1 = random_unit_dir(dir_rng, static_cast<std::size_t>(d));
  }
  constexpr int kMaxDraws = 10000;
  int draws = 0;
  do {
    grid.d2 = random_unit_dir(dir_rng, static_cast<std::size_t>(d));
    if (++draws > kMaxDraws)
      throw NumericError(
          "loss_landscape could not draw a direction with |cosine| < 0.1");
  } while (std::abs(cosine(grid.d1, grid.d2)) >= 0.1);

  grid.offsets.resize(static_cast<std::size_t>(cfg.resolution));
  const double half = cfg.extent * epsilon;
  for (int i = 0; i < cfg.resolution; ++i)
    grid.offsets[static_cast<std::size_t>(i)] =
        -half + (2.0 * half) * static_cast<double>(i) /
                    static_cast<double>(cfg.resolution - 1);
  // Keep the exact origin on odd-resolution grids.
  if (cfg.resolution % 2 == 1)
    grid.offsets[static_cast<std::size_t>(cfg.resolution / 2)] = 0.0;

  grid.loss.resize(static_cast<std::size_t>(cfg.resolution) *
                   static_cast<std::size_t>(cfg.resolution));
  std::vector<double> point(static_cast<std::size_t>(d));
  for (int i = 0; i < cfg.resolution; ++i)
    for (int j = 0; j < cfg.resolution; ++j) {
      const double u = grid.offsets[static_cast<std::size_t>(i)];
      const double v = grid.offsets[static_cast<std::size_t>(j)];
      for (std::int64_t k = 0; k < d; ++k) {
        double p = xv[k] + u * grid.d1[static_cast<std::size_t>(k)] +
                   v * grid.d2[static_cast<std::size_t>(k)];
        if (cfg.bounded) p = std::clamp(p, cfg.lo, cfg.hi);
        point[static_cast<std::size_t>(k)] = p;
      }
      grid.loss[static_cast<std::size_t>(i) *
                    static_cast<std::size_t>(cfg.resolution) +
                static_cast<std::size_t>(j)] =
          landscape_point_loss(m, Tensor::from({1, d}, point), y, gmode,
                               cfg.samples, cfg.seed);
    }
  return grid;
}

}  // namespace ib
