#pragma once

#include <cstdint>
#include <span>

#include "ib/tape.hpp"
#include "ib/tensor.hpp"

namespace ib {

// Differentiable op set. Every op: computes the forward value; if any input
// is attached to a tape, records a node whose closure produces gradients for
// the attached inputs. Binary elementwise ops broadcast trailing dimensions
// (NumPy-style); both operands must share one dtype.

// -- elementwise binary (broadcasting) --
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);

// -- scalar forms (differentiable in x) --
Tensor add_scalar(const Tensor& x, double c);
Tensor scale(const Tensor& x, double c);

// -- elementwise unary --
Tensor relu(const Tensor& x);
Tensor exp(const Tensor& x);
Tensor log(const Tensor& x);
Tensor square(const Tensor& x);
// Clamp to [lo, hi]; subgradient 0 outside the open interval (boundaries
// included), matching the projection use in attacks.
Tensor clip(const Tensor& x, double lo, double hi);
// Elementwise sign with sign(0) = 0. Forward-only: it records a node whose
// backward throws, so accidentally differentiating through it is loud.
Tensor sign(const Tensor& x);
// log(1 + exp(x - 5)), numerically stable on both tails. Strictly positive.
Tensor shifted_softplus(const Tensor& x);

// -- linear algebra --
// Strict 2-D matrix product [m,k] x [k,n] -> [m,n] (BLAS-backed).
Tensor matmul(const Tensor& a, const Tensor& b);

// -- reductions and the softmax family (always over the last axis) --
Tensor logsumexp(const Tensor& x);  // [..., C] -> [...]
Tensor log_softmax(const Tensor& x);
Tensor softmax(const Tensor& x);
Tensor sum(const Tensor& x);   // all elements -> rank-0
Tensor mean(const Tensor& x);  // all elements -> rank-0
Tensor row_sum(const Tensor& x);  // [n, C] -> [n]

// -- structural --
// Columns [begin, end) of a [n, C] tensor.
Tensor slice_cols(const Tensor& x, std::int64_t begin, std::int64_t end);
// S rank-1 tensors of length n -> [n, S] (column j = cols[j]).
Tensor stack_cols(std::span<const Tensor> cols);
// out[i] = x[i, idx[i]] for [n, C] x, idx in [0, C).
Tensor take_per_row(const Tensor& x, std::span<const std::int32_t> idx);
// out[i, :] = m[idx[i], :] for [R, K] m; backward scatter-adds rows.
Tensor take_rows(const Tensor& m, std::span<const std::int32_t> idx);

// -- sampling --
// z = mu + sigma * noise, treating `noise` as a constant. Validates
// shapes match and sigma > 0 elementwise.
Tensor gaussian_reparam_sample(const Tensor& mu, const Tensor& sigma,
                               const Tensor& noise);

}  // namespace ib
