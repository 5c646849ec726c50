#pragma once

#include <cstdint>
#include <vector>

#include "ib/attack_loss.hpp"
#include "ib/model.hpp"
#include "ib/tensor.hpp"

namespace ib {

struct LandscapeConfig {
  int resolution = 51;   // grid points per axis (odd keeps (0,0) on the grid)
  double extent = 1.5;   // half-width of the grid in units of epsilon
  std::uint64_t seed = 0;
  GradMode mode = GradMode::mean;  // surface loss; stochastic also supported
  int samples = 12;      // S for stochastic loss surfaces
  bool bounded = true;   // clip grid points into [lo, hi]
  double lo = 0.0, hi = 1.0;
  int pgd_steps = 40;    // budget for finding the worst-case direction
};

// Cross-entropy surface on the 2-plane spanned by the PGD worst-case
// direction and a near-orthogonal random direction, both unit L-inf.
struct LandscapeGrid {
  std::vector<double> d1, d2;    // directions, |.|_inf = 1
  std::vector<double> offsets;   // shared u/v axis, resolution values
  std::vector<double> loss;      // [res, res] row-major, loss[i*res+j] = f(u_i, v_j)
  double epsilon = 0.0;
  double extent = 0.0;
  int resolution = 0;
  bool fallback_random = false;  // PGD produced no perturbation; d1 is random
  // Trace of the projected epsilon-ball boundary in plane coordinates,
  // max(|u|, |v|) = epsilon: corners in order (+e,+e), (+e,-e), (-e,-e), (-e,+e).
  std::vector<std::pair<double, double>> ball_vertices;
};

// Evaluates one point with the fixed landscape noise stream; the grid is
// built from this same call, so grid cells are reproducible individually.
double landscape_point_loss(const Model& m, const Tensor& x, std::int32_t y,
                            GradMode gmode, int samples, std::uint64_t seed);

// x is one example, [d] or [1, d]; epsilon > 0. The surface records
// cross-entropy under cfg.mode (default: through the encoder mean). In
// stochastic mode the loss is the log of the sample-averaged class
// probability, with one noise stream shared by every grid point so the
// surface reflects input variation only.
LandscapeGrid loss_landscape(const Model& m, const Tensor& x, std::int32_t y,
                             double epsilon, const LandscapeConfig& cfg);

}  // namespace ib
