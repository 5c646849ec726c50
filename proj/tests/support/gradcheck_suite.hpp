#pragma once

// Randomized finite-difference gradient sweep over the whole op set. Shared
// by the unit tests and the acceptance gate: one implementation, two callers.
//
// Each scenario builds a scalar loss from one or more differentiable inputs;
// the tape gradient for every input is compared against a central difference
// at h = 1e-6. Samplers keep inputs away from non-differentiable kinks (relu
// and clip corners) and away from div-by-zero, where the comparison would be
// meaningless.

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "finite_diff.hpp"
#include "ib/ops.hpp"
#include "ib/rng.hpp"
#include "ib/tape.hpp"
#include "ib/tensor.hpp"

namespace testsupport {

struct GradScenario {
  std::string name;
  // Shapes of the differentiable inputs for a given size draw.
  std::function<std::vector<ib::Shape>(ib::Rng&)> shapes;
  // Samples one value for input `which`.
  std::function<double(ib::Rng&, std::size_t which)> sample;
  // Builds the scalar loss from inputs (attached or detached alike).
  std::function<ib::Tensor(std::vector<ib::Tensor>&, ib::Rng&)> build;
};

struct GradCheckResult {
  int configs = 0;
  double worst = 0.0;
  std::string worst_case;
};

inline std::vector<GradScenario> grad_scenarios() {
  using ib::Rng;
  using ib::Shape;
  using ib::Tensor;
  auto unit = [](Rng& r, std::size_t) { return r.uniform(-2.0, 2.0); };
  auto nC = [](Rng& r) {
    std::int64_t n = 1 + static_cast<std::int64_t>(r.next_u32() % 5);
    std::int64_t C = 2 + static_cast<std::int64_t>(r.next_u32() % 6);
    return std::pair{n, C};
  };

  std::vector<GradScenario> out;

  out.push_back({"add_broadcast",
                 [nC](Rng& r) {
                   auto [n, C] = nC(r);
                   return std::vector<Shape>{{n, C}, {C}};
                 },
                 unit,
                 [](std::vector<Tensor>& in, Rng&) {
                   return ib::mean(ib::add(in[0], in[1]));
                 }});

  out.push_back({"sub_same_shape",
                 [nC](Rng& r) {
                   auto [n, C] = nC(r);
                   return std::vector<Shape>{{n, C}, {n, C}};
                 },
                 unit,
                 [](std::vector<Tensor>& in, Rng&) {
                   return ib::mean(ib::square(ib::sub(in[0], in[1])));
                 }});

  out.push_back({"mul_broadcast_row",
                 [nC](Rng& r) {
                   auto [n, C] = nC(r);
                   return std::vector<Shape>{{n, 1}, {n, C}};
                 },
                 unit,
                 [](std::vector<Tensor>& in, Rng&) {
                   return ib::mean(ib::mul(in[0], in[1]));
                 }});

  out.push_back({"div",
                 [nC](Rng& r) {
                   auto [n, C] = nC(r);
                   return std::vector<Shape>{{n, C}, {C}};
                 },
                 [](Rng& r, std::size_t which) {
                   if (which == 1) {
                     double m = r.uniform(0.5, 2.0);
                     return r.uniform() < 0.5 ? -m : m;
                   }
                   return r.uniform(-2.0, 2.0);
                 },
                 [](std::vector<Tensor>& in, Rng&) {
                   return ib::mean(ib::div(in[0], in[1]));
                 }});

  out.push_back({"matmul",
                 [](Rng& r) {
                   std::int64_t m = 1 + static_cast<std::int64_t>(r.next_u32() % 4);
                   std::int64_t k = 1 + static_cast<std::int64_t>(r.next_u32() % 5);
                   std::int64_t n = 1 + static_cast<std::int64_t>(r.next_u32() % 4);
                   return std::vector<Shape>{{m, k}, {k, n}};
                 },
                 unit,
                 [](std::vector<Tensor>& in, Rng&) {
                   return ib::mean(ib::square(ib::matmul(in[0], in[1])));
                 }});

  out.push_back({"relu",
                 [nC](Rng& r) {
                   auto [n, C] = nC(r);
                   return std::vector<Shape>{{n, C}};
                 },
                 [](Rng& r, std::size_t) {
                   // keep away from the kink at 0
                   double v = r.uniform(0.05, 2.0);
                   return r.uniform() < 0.5 ? -v : v;
                 },
                 [](std::vector<Tensor>& in, Rng&) {
                   return ib::mean(ib::relu(in[0]));
                 }});

  out.push_back({"exp_log_square_chain",
                 [nC](Rng& r) {
                   auto [n, C] = nC(r);
                   return std::vector<Shape>{{n, C}};
                 },
                 [](Rng& r, std::size_t) { return r.uniform(0.2, 2.5); },
                 [](std::vector<Tensor>& in, Rng&) {
                   return ib::mean(ib::log(ib::add_scalar(
                       ib::square(ib::exp(ib::scale(in[0], 0.5))), 1.0)));
                 }});

  out.push_back({"clip",
                 [nC](Rng& r) {
                   auto [n, C] = nC(r);
                   return std::vector<Shape>{{n, C}};
                 },
                 [](Rng& r, std::size_t) {
                   // sample away from both clip boundaries (-0.7, 0.9)
                   for (;;) {
                     double v = r.uniform(-1.5, 1.5);
                     if (std::fabs(v + 0.7) > 0.05 && std::fabs(v - 0.9) > 0.05) return v;
                   }
                 },
                 [](std::vector<Tensor>& in, Rng&) {
                   return ib::mean(ib::square(ib::clip(in[0], -0.7, 0.9)));
                 }});

  out.push_back({"shifted_softplus",
                 [nC](Rng& r) {
                   auto [n, C] = nC(r);
                   return std::vector<Shape>{{n, C}};
                 },
                 [](Rng& r, std::size_t) { return r.uniform(-6.0, 12.0); },
                 [](std::vector<Tensor>& in, Rng&) {
                   return ib::mean(ib::shifted_softplus(in[0]));
                 }});

  out.push_back({"logsumexp",
                 [nC](Rng& r) {
                   auto [n, C] = nC(r);
                   return std::vector<Shape>{{n, C}};
                 },
                 [](Rng& r, std::size_t) { return r.uniform(-5.0, 5.0); },
                 [](std::vector<Tensor>& in, Rng&) {
                   return ib::mean(ib::logsumexp(in[0]));
                 }});

  out.push_back({"log_softmax_nll",
                 [nC](Rng& r) {
                   auto [n, C] = nC(r);
                   return std::vector<Shape>{{n, C}};
                 },
                 [](Rng& r, std::size_t) { return r.uniform(-4.0, 4.0); },
                 [](std::vector<Tensor>& in, Rng& r) {
                   std::int64_t n = in[0].dim(0), C = in[0].dim(1);
                   std::vector<std::int32_t> y(static_cast<std::size_t>(n));
                   for (auto& v : y) v = static_cast<std::int32_t>(r.next_u32() % C);
                   return ib::scale(
                       ib::mean(ib::take_per_row(ib::log_softmax(in[0]), y)), -1.0);
                 }});

  out.push_back({"softmax_weighted",
                 [nC](Rng& r) {
                   auto [n, C] = nC(r);
                   return std::vector<Shape>{{n, C}};
                 },
                 [](Rng& r, std::size_t) { return r.uniform(-4.0, 4.0); },
                 [](std::vector<Tensor>& in, Rng& r) {
                   std::vector<double> w(static_cast<std::size_t>(in[0].size()));
                   for (auto& v : w) v = r.uniform(-1.0, 1.0);
                   Tensor W = Tensor::from(in[0].shape(), std::move(w));
                   return ib::mean(ib::mul(ib::softmax(in[0]), W));
                 }});

  out.push_back({"row_sum_sum",
                 [nC](Rng& r) {
                   auto [n, C] = nC(r);
                   return std::vector<Shape>{{n, C}};
                 },
                 unit,
                 [](std::vector<Tensor>& in, Rng&) {
                   return ib::sum(ib::square(ib::row_sum(in[0])));
                 }});

  out.push_back({"slice_cols",
                 [](Rng& r) {
                   std::int64_t n = 1 + static_cast<std::int64_t>(r.next_u32() % 4);
                   std::int64_t C = 4 + static_cast<std::int64_t>(r.next_u32() % 4);
                   return std::vector<Shape>{{n, C}};
                 },
                 unit,
                 [](std::vector<Tensor>& in, Rng&) {
                   std::int64_t C = in[0].dim(1);
                   return ib::mean(ib::square(ib::slice_cols(in[0], 1, C - 1)));
                 }});

  out.push_back({"stack_cols",
                 [](Rng& r) {
                   std::int64_t n = 2 + static_cast<std::int64_t>(r.next_u32() % 4);
                   return std::vector<Shape>{{n}, {n}, {n}};
                 },
                 unit,
                 [](std::vector<Tensor>& in, Rng&) {
                   return ib::mean(ib::logsumexp(ib::stack_cols(in)));
                 }});

  out.push_back({"take_rows",
                 [](Rng& r) {
                   std::int64_t R = 3 + static_cast<std::int64_t>(r.next_u32() % 3);
                   std::int64_t K = 2 + static_cast<std::int64_t>(r.next_u32() % 4);
                   return std::vector<Shape>{{R, K}};
                 },
                 unit,
                 [](std::vector<Tensor>& in, Rng& r) {
                   std::int64_t R = in[0].dim(0);
                   std::vector<std::int32_t> idx(5);
                   for (auto& v : idx) v = static_cast<std::int32_t>(r.next_u32() % R);
                   return ib::mean(ib::square(ib::take_rows(in[0], idx)));
                 }});

  out.push_back({"gaussian_reparam",
                 [nC](Rng& r) {
                   auto [n, K] = nC(r);
                   return std::vector<Shape>{{n, K}, {n, K}};
                 },
                 [](Rng& r, std::size_t which) {
                   if (which == 1) return r.uniform(0.3, 2.0);  // sigma > 0
                   return r.uniform(-2.0, 2.0);
                 },
                 [](std::vector<Tensor>& in, Rng& r) {
                   std::vector<double> nz(static_cast<std::size_t>(in[0].size()));
                   for (auto& v : nz) v = r.normal();
                   Tensor noise = Tensor::from(in[0].shape(), std::move(nz));
                   Tensor z = ib::gaussian_reparam_sample(in[0], in[1], noise);
                   return ib::mean(ib::square(z));
                 }});

  // End-to-end stochastic-encoder chain: affine -> relu -> affine -> split
  // -> softplus -> reparameterize -> affine -> log-softmax -> NLL + rate.
  out.push_back(
      {"encoder_chain",
       [](Rng& r) {
         std::int64_t n = 1 + static_cast<std::int64_t>(r.next_u32() % 3);
         std::int64_t d = 3 + static_cast<std::int64_t>(r.next_u32() % 3);
         std::int64_t h = 4;
         std::int64_t K = 2;
         std::int64_t C = 3;
         return std::vector<Shape>{{n, d}, {d, h}, {h}, {h, 2 * K}, {2 * K}, {K, C}, {C}};
       },
       [](Rng& r, std::size_t which) {
         if (which == 0) return r.uniform(-1.0, 1.0);
         return r.uniform(-0.8, 0.8);
       },
       [](std::vector<Tensor>& in, Rng& r) {
         std::int64_t n = in[0].dim(0);
         std::int64_t K = in[5].dim(0);
         std::int64_t C = in[5].dim(1);
         Tensor h = ib::relu(ib::add(ib::matmul(in[0], in[1]), in[2]));
         Tensor enc = ib::add(ib::matmul(h, in[3]), in[4]);
         Tensor mu = ib::slice_cols(enc, 0, K);
         Tensor sg = ib::shifted_softplus(ib::add_scalar(ib::slice_cols(enc, K, 2 * K), 5.0));
         std::vector<double> nz(static_cast<std::size_t>(n * K));
         for (auto& v : nz) v = r.normal();
         Tensor z = ib::gaussian_reparam_sample(mu, sg, Tensor::from({n, K}, std::move(nz)));
         Tensor logits = ib::add(ib::matmul(z, in[5]), in[6]);
         std::vector<std::int32_t> y(static_cast<std::size_t>(n));
         for (auto& v : y) v = static_cast<std::int32_t>(r.next_u32() % C);
         Tensor nll = ib::scale(ib::mean(ib::take_per_row(ib::log_softmax(logits), y)), -1.0);
         // analytic Gaussian rate: 0.5 * mean_n sum_k (mu^2 + sg^2 - 1 - 2 log sg)
         Tensor rate = ib::scale(
             ib::mean(ib::row_sum(ib::sub(ib::add(ib::square(mu), ib::square(sg)),
                                          ib::add_scalar(ib::scale(ib::log(sg), 2.0), 1.0)))),
             0.5);
         return ib::add(nll, ib::scale(rate, 0.01));
       }});

  return out;
}

// Runs `configs` randomized checks cycling through the scenarios.
inline GradCheckResult run_gradcheck_suite(int configs, double h = 1e-6,
                                           std::uint64_t seed = 20260815) {
  auto scenarios = grad_scenarios();
  GradCheckResult res;
  for (int cfg = 0; cfg < configs; ++cfg) {
    const GradScenario& sc = scenarios[static_cast<std::size_t>(cfg) % scenarios.size()];
    ib::Rng shape_rng = ib::Rng::derive(seed, {static_cast<std::uint64_t>(cfg), 1});
    ib::Rng value_rng = ib::Rng::derive(seed, {static_cast<std::uint64_t>(cfg), 2});
    auto shapes = sc.shapes(shape_rng);

    std::vector<std::vector<double>> values;
    std::size_t total = 0;
    for (std::size_t i = 0; i < shapes.size(); ++i) {
      std::int64_t n = ib::shape_numel(shapes[i]);
      std::vector<double> v(static_cast<std::size_t>(n));
      for (auto& x : v) x = sc.sample(value_rng, i);
      total += v.size();
      values.push_back(std::move(v));
    }

    // Auxiliary randomness inside build() (labels, constant noise) must be
    // identical across evaluations: re-derive the rng every call.
    auto make_build_rng = [&] { return ib::Rng::derive(seed, {static_cast<std::uint64_t>(cfg), 3}); };

    auto eval_at = [&](const std::vector<double>& flat) {
      std::vector<ib::Tensor> in;
      std::size_t off = 0;
      for (std::size_t i = 0; i < shapes.size(); ++i) {
        std::size_t n = static_cast<std::size_t>(ib::shape_numel(shapes[i]));
        std::vector<double> v(flat.begin() + off, flat.begin() + off + n);
        off += n;
        in.push_back(ib::Tensor::from(shapes[i], std::move(v)));
      }
      ib::Rng brng = make_build_rng();
      ib::Tensor loss = sc.build(in, brng);
      return loss.at(0);
    };

    std::vector<double> flat;
    flat.reserve(total);
    for (const auto& v : values) flat.insert(flat.end(), v.begin(), v.end());

    // analytic gradient
    ib::Tape tape;
    std::vector<ib::Tensor> attached;
    for (std::size_t i = 0; i < shapes.size(); ++i)
      attached.push_back(tape.var(ib::Tensor::from(shapes[i], values[i])));
    ib::Rng brng = make_build_rng();
    ib::Tensor loss = sc.build(attached, brng);
    tape.backward(loss);
    std::vector<double> analytic;
    analytic.reserve(total);
    for (auto& t : attached) {
      std::vector<double> g = tape.has_grad(t)
                                  ? tape.grad(t).to_vector()
                                  : std::vector<double>(static_cast<std::size_t>(t.size()), 0.0);
      analytic.insert(analytic.end(), g.begin(), g.end());
    }

    std::vector<double> numeric = central_diff(eval_at, flat, h);
    double err = max_rel_err(analytic, numeric);
    ++res.configs;
    if (err > res.worst) {
      res.worst = err;
      res.worst_case = sc.name + " (config " + std::to_string(cfg) + ")";
    }
  }
  return res;
}

}  // namespace testsupport
