#include "ib/ops.hpp"

#include <cblas.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <vector>

namespace ib {

namespace {

template <class T>
struct Tag {
  using type = T;
};

template <class T>
std::span<const T> tdata(const Tensor& t);
template <>
std::span<const double> tdata<double>(const Tensor& t) { return t.f64(); }
template <>
std::span<const float> tdata<float>(const Tensor& t) { return t.f32(); }

template <class F>
auto dispatch(DType dt, F&& f) {
  return dt == DType::f64 ? f(Tag<double>{}) : f(Tag<float>{});
}

Tensor finish(Tensor out, Tape* tape, std::vector<std::int64_t> ids, BackwardFn fn) {
  if (!tape) return out;
  std::int64_t id = tape->record(std::move(ids), std::move(fn));
  return out.with_tape(tape, id, tape->generation());
}

void require_same_dtype(const char* op, const Tensor& a, const Tensor& b) {
  if (a.dtype() != b.dtype())
    throw ContractError(std::string(op) + ": dtype mismatch (" +
                        dtype_name(a.dtype()) + " vs " + dtype_name(b.dtype()) + ")");
}

Shape broadcast_shape(const char* op, const Shape& a, const Shape& b) {
  std::size_t ra = a.size(), rb = b.size(), r = std::max(ra, rb);
  Shape out(r);
  for (std::size_t i = 0; i < r; ++i) {
    std::int64_t da = i < ra ? a[ra - 1 - i] : 1;
    std::int64_t db = i < rb ? b[rb - 1 - i] : 1;
    if (da == db) out[r - 1 - i] = da;
    else if (da == 1) out[r - 1 - i] = db;
    else if (db == 1) out[r - 1 - i] = da;
    else
      throw ContractError(std::string(op) + ": cannot broadcast " + shape_str(a) +
                          " with " + shape_str(b));
  }
  return out;
}

// Per-out-dimension element strides of `in` when broadcast to `out`
// (0 on broadcast dimensions), trailing-aligned.
std::vector<std::int64_t> bcast_strides(const Shape& out, const Shape& in) {
  std::size_t r = out.size(), ri = in.size();
  std::vector<std::int64_t> own(ri);
  std::int64_t s = 1;
  for (std::size_t i = ri; i-- > 0;) {
    own[i] = s;
    s *= in[i];
  }
  std::vector<std::int64_t> st(r, 0);
  for (std::size_t i = 0; i < ri; ++i) {
    std::size_t o = r - ri + i;
    st[o] = (in[i] == out[o]) ? own[i] : 0;
  }
  return st;
}

// Detached broadcasted elementwise binary on values.
template <class F>
Tensor vbinary(const char* op, const Tensor& a, const Tensor& b, F f) {
  require_same_dtype(op, a, b);
  Shape os = broadcast_shape(op, a.shape(), b.shape());
  std::int64_t n = shape_numel(os);
  return dispatch(a.dtype(), [&](auto tag) {
    using T = typename decltype(tag)::type;
    auto pa = tdata<T>(a);
    auto pb = tdata<T>(b);
    std::vector<T> v(static_cast<std::size_t>(n));
    if (a.shape() == b.shape()) {
      for (std::int64_t i = 0; i < n; ++i)
        v[i] = static_cast<T>(f(static_cast<double>(pa[i]), static_cast<double>(pb[i])));
      return Tensor::from(os, std::move(v));
    }
    auto sa = bcast_strides(os, a.shape());
    auto sb = bcast_strides(os, b.shape());
    std::size_t r = os.size();
    std::vector<std::int64_t> idx(r, 0);
    std::int64_t ia = 0, ib = 0;
    for (std::int64_t flat = 0; flat < n; ++flat) {
      v[flat] = static_cast<T>(f(static_cast<double>(pa[ia]), static_cast<double>(pb[ib])));
      for (std::size_t d = r; d-- > 0;) {
        ++idx[d];
        ia += sa[d];
        ib += sb[d];
        if (idx[d] < os[d]) break;
        ia -= sa[d] * os[d];
        ib -= sb[d] * os[d];
        idx[d] = 0;
      }
    }
    return Tensor::from(os, std::move(v));
  });
}

// Detached elementwise unary on values (f computed in double).
template <class F>
Tensor vunary(const Tensor& x, F f) {
  return dispatch(x.dtype(), [&](auto tag) {
    using T = typename decltype(tag)::type;
    auto in = tdata<T>(x);
    std::vector<T> v(in.size());
    for (std::size_t i = 0; i < in.size(); ++i)
      v[i] = static_cast<T>(f(static_cast<double>(in[i])));
    return Tensor::from(x.shape(), std::move(v));
  });
}

// Sum over one axis of a detached tensor.
Tensor sum_axis(const Tensor& t, std::size_t axis, bool keepdim) {
  const Shape& s = t.shape();
  std::int64_t outer = 1, inner = 1, n = s[axis];
  for (std::size_t i = 0; i < axis; ++i) outer *= s[i];
  for (std::size_t i = axis + 1; i < s.size(); ++i) inner *= s[i];
  Shape os;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i == axis) {
      if (keepdim) os.push_back(1);
    } else {
      os.push_back(s[i]);
    }
  }
  return dispatch(t.dtype(), [&](auto tag) {
    using T = typename decltype(tag)::type;
    auto in = tdata<T>(t);
    std::vector<T> v(static_cast<std::size_t>(outer * inner), T(0));
    for (std::int64_t o = 0; o < outer; ++o)
      for (std::int64_t k = 0; k < n; ++k) {
        const T* src = in.data() + (o * n + k) * inner;
        T* dst = v.data() + o * inner;
        for (std::int64_t i = 0; i < inner; ++i) dst[i] += src[i];
      }
    return Tensor::from(os, std::move(v));
  });
}

// Reduce a broadcasted gradient back to the operand's shape.
Tensor reduce_to_shape(const Tensor& g, const Shape& target) {
  Tensor cur = g.attached() ? g.detached() : g;
  while (cur.rank() > target.size()) cur = sum_axis(cur, 0, false);
  for (std::size_t i = 0; i < target.size(); ++i)
    if (target[i] == 1 && cur.shape()[i] != 1) cur = sum_axis(cur, i, true);
  if (cur.shape() != target)
    throw ContractError("gradient reduction failed: " + shape_str(g.shape()) +
                        " -> " + shape_str(target));
  return cur;
}

// grad = go * df(x) elementwise, same shapes.
template <class DF>
Tensor unary_grad(const Tensor& xv, const Tensor& go, DF df) {
  return dispatch(xv.dtype(), [&](auto tag) {
    using T = typename decltype(tag)::type;
    auto px = tdata<T>(xv);
    auto pg = tdata<T>(go);
    std::vector<T> v(px.size());
    for (std::size_t i = 0; i < px.size(); ++i)
      v[i] = static_cast<T>(static_cast<double>(pg[i]) * df(static_cast<double>(px[i])));
    return Tensor::from(xv.shape(), std::move(v));
  });
}

// Shared skeleton for elementwise unary ops with local derivative df(x).
template <class F, class DF>
Tensor unary_op(const Tensor& x, F f, DF df) {
  Tape* tape = common_tape({&x});
  Tensor out = vunary(x, f);
  if (!tape) return out;
  Tensor xv = x.detached();
  return finish(std::move(out), tape, {x.node()},
                [xv, df](const Tensor& go) {
                  return std::vector<Tensor>{unary_grad(xv, go, df)};
                });
}

// Row-sum over the last axis on values: [..., C] -> [...]
Tensor last_axis_sum(const Tensor& t) {
  return sum_axis(t, t.rank() - 1, false);
}

double stable_softplus(double t) {
  if (t > 30.0) return t;
  if (t < -30.0) return std::exp(t);
  return std::log1p(std::exp(t));
}

double stable_logistic(double t) {
  if (t > 30.0) return 1.0;
  if (t < -30.0) return std::exp(t);
  return 1.0 / (1.0 + std::exp(-t));
}

template <class T>
void gemm(bool ta, bool tb, std::int64_t m, std::int64_t n, std::int64_t k,
          const T* A, const T* B, T* C);

template <>
void gemm<double>(bool ta, bool tb, std::int64_t m, std::int64_t n, std::int64_t k,
                  const double* A, const double* B, double* C) {
  cblas_dgemm(CblasRowMajor, ta ? CblasTrans : CblasNoTrans,
              tb ? CblasTrans : CblasNoTrans, static_cast<int>(m),
              static_cast<int>(n), static_cast<int>(k), 1.0, A,
              static_cast<int>(ta ? m : k), B, static_cast<int>(tb ? k : n), 0.0, C,
              static_cast<int>(n));
}

template <>
void gemm<float>(bool ta, bool tb, std::int64_t m, std::int64_t n, std::int64_t k,
                 const float* A, const float* B, float* C) {
  cblas_sgemm(CblasRowMajor, ta ? CblasTrans : CblasNoTrans,
              tb ? CblasTrans : CblasNoTrans, static_cast<int>(m),
              static_cast<int>(n), static_cast<int>(k), 1.0f, A,
              static_cast<int>(ta ? m : k), B, static_cast<int>(tb ? k : n), 0.0f, C,
              static_cast<int>(n));
}

void require_rank2(const char* op, const Tensor& t) {
  if (t.rank() != 2)
    throw ContractError(std::string(op) + ": expected a rank-2 tensor, got " +
                        shape_str(t.shape()));
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  Tape* tape = common_tape({&a, &b});
  Tensor out = vbinary("add", a, b, [](double x, double y) { return x + y; });
  if (!tape) return out;
  std::vector<std::int64_t> ids;
  bool ga = a.attached(), gb = b.attached();
  if (ga) ids.push_back(a.node());
  if (gb) ids.push_back(b.node());
  Shape sa = a.shape(), sb = b.shape();
  return finish(std::move(out), tape, std::move(ids),
                [ga, gb, sa, sb](const Tensor& go) {
                  std::vector<Tensor> g;
                  if (ga) g.push_back(reduce_to_shape(go, sa));
                  if (gb) g.push_back(reduce_to_shape(go, sb));
                  return g;
                });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  Tape* tape = common_tape({&a, &b});
  Tensor out = vbinary("sub", a, b, [](double x, double y) { return x - y; });
  if (!tape) return out;
  std::vector<std::int64_t> ids;
  bool ga = a.attached(), gb = b.attached();
  if (ga) ids.push_back(a.node());
  if (gb) ids.push_back(b.node());
  Shape sa = a.shape(), sb = b.shape();
  return finish(std::move(out), tape, std::move(ids),
                [ga, gb, sa, sb](const Tensor& go) {
                  std::vector<Tensor> g;
                  if (ga) g.push_back(reduce_to_shape(go, sa));
                  if (gb)
                    g.push_back(reduce_to_shape(
                        vunary(go, [](double v) { return -v; }), sb));
                  return g;
                });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  Tape* tape = common_tape({&a, &b});
  Tensor out = vbinary("mul", a, b, [](double x, double y) { return x * y; });
  if (!tape) return out;
  std::vector<std::int64_t> ids;
  bool ga = a.attached(), gb = b.attached();
  if (ga) ids.push_back(a.node());
  if (gb) ids.push_back(b.node());
  Tensor av = a.detached(), bv = b.detached();
  return finish(std::move(out), tape, std::move(ids),
                [ga, gb, av, bv](const Tensor& go) {
                  std::vector<Tensor> g;
                  if (ga)
                    g.push_back(reduce_to_shape(
                        vbinary("mul", go, bv, [](double x, double y) { return x * y; }),
                        av.shape()));
                  if (gb)
                    g.push_back(reduce_to_shape(
                        vbinary("mul", go, av, [](double x, double y) { return x * y; }),
                        bv.shape()));
                  return g;
                });
}

Tensor div(const Tensor& a, const Tensor& b) {
  Tape* tape = common_tape({&a, &b});
  Tensor out = vbinary("div", a, b, [](double x, double y) { return x / y; });
  if (!tape) return out;
  std::vector<std::int64_t> ids;
  bool ga = a.attached(), gb = b.attached();
  if (ga) ids.push_back(a.node());
  if (gb) ids.push_back(b.node());
  Tensor av = a.detached(), bv = b.detached(), ov = out;
  return finish(std::move(out), tape, std::move(ids),
                [ga, gb, av, bv, ov](const Tensor& go) {
                  std::vector<Tensor> g;
                  if (ga)
                    g.push_back(reduce_to_shape(
                        vbinary("div", go, bv, [](double x, double y) { return x / y; }),
                        av.shape()));
                  if (gb) {
                    // d/db (a/b) = -a/b^2 = -out/b
                    Tensor t = vbinary("mul", go, ov, [](double x, double y) { return x * y; });
                    t = vbinary("div", t, bv, [](double x, double y) { return -x / y; });
                    g.push_back(reduce_to_shape(t, bv.shape()));
                  }
                  return g;
                });
}

Tensor add_scalar(const Tensor& x, double c) {
  Tape* tape = common_tape({&x});
  Tensor out = vunary(x, [c](double v) { return v + c; });
  if (!tape) return out;
  return finish(std::move(out), tape, {x.node()}, [](const Tensor& go) {
    return std::vector<Tensor>{go.attached() ? go.detached() : go};
  });
}

Tensor scale(const Tensor& x, double c) {
  Tape* tape = common_tape({&x});
  Tensor out = vunary(x, [c](double v) { return v * c; });
  if (!tape) return out;
  return finish(std::move(out), tape, {x.node()}, [c](const Tensor& go) {
    return std::vector<Tensor>{vunary(go, [c](double v) { return v * c; })};
  });
}

Tensor relu(const Tensor& x) {
  return unary_op(
      x, [](double v) { return v > 0.0 ? v : 0.0; },
      [](double v) { return v > 0.0 ? 1.0 : 0.0; });
}

Tensor exp(const Tensor& x) {
  Tape* tape = common_tape({&x});
  Tensor out = vunary(x, [](double v) { return std::exp(v); });
  if (!tape) return out;
  Tensor ov = out;
  return finish(std::move(out), tape, {x.node()}, [ov](const Tensor& go) {
    return std::vector<Tensor>{
        vbinary("mul", go, ov, [](double x, double y) { return x * y; })};
  });
}

Tensor log(const Tensor& x) {
  return unary_op(
      x, [](double v) { return std::log(v); },
      [](double v) { return 1.0 / v; });
}

Tensor square(const Tensor& x) {
  return unary_op(
      x, [](double v) { return v * v; },
      [](double v) { return 2.0 * v; });
}

Tensor clip(const Tensor& x, double lo, double hi) {
  if (!(lo <= hi))
    throw ContractError("clip: lo > hi");
  return unary_op(
      x, [lo, hi](double v) { return std::min(std::max(v, lo), hi); },
      [lo, hi](double v) { return (v > lo && v < hi) ? 1.0 : 0.0; });
}

Tensor sign(const Tensor& x) {
  Tape* tape = common_tape({&x});
  Tensor out = vunary(x, [](double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); });
  if (!tape) return out;
  return finish(std::move(out), tape, {x.node()}, [](const Tensor&) -> std::vector<Tensor> {
    throw ContractError(
        "sign() is not differentiable; take sign of a detached gradient instead");
  });
}

Tensor shifted_softplus(const Tensor& x) {
  return unary_op(
      x, [](double v) { return stable_softplus(v - 5.0); },
      [](double v) { return stable_logistic(v - 5.0); });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_rank2("matmul", a);
  require_rank2("matmul", b);
  require_same_dtype("matmul", a, b);
  if (a.dim(1) != b.dim(0))
    throw ContractError("matmul: inner dimensions disagree, " + shape_str(a.shape()) +
                        " x " + shape_str(b.shape()));
  std::int64_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  Tape* tape = common_tape({&a, &b});
  Tensor out = dispatch(a.dtype(), [&](auto tag) {
    using T = typename decltype(tag)::type;
    std::vector<T> v(static_cast<std::size_t>(m * n));
    if (m && n && k) gemm<T>(false, false, m, n, k, tdata<T>(a).data(), tdata<T>(b).data(), v.data());
    return Tensor::from({m, n}, std::move(v));
  });
  if (!tape) return out;
  std::vector<std::int64_t> ids;
  bool ga = a.attached(), gb = b.attached();
  if (ga) ids.push_back(a.node());
  if (gb) ids.push_back(b.node());
  Tensor av = a.detached(), bv = b.detached();
  return finish(std::move(out), tape, std::move(ids),
                [ga, gb, av, bv, m, k, n](const Tensor& go) {
                  std::vector<Tensor> g;
                  dispatch(av.dtype(), [&](auto tag) {
                    using T = typename decltype(tag)::type;
                    auto pg = tdata<T>(go);
                    if (ga) {
                      std::vector<T> da(static_cast<std::size_t>(m * k));
                      if (m && k && n)
                        gemm<T>(false, true, m, k, n, pg.data(), tdata<T>(bv).data(), da.data());
                      g.push_back(Tensor::from({m, k}, std::move(da)));
                    }
                    if (gb) {
                      std::vector<T> db(static_cast<std::size_t>(k * n));
                      if (k && n && m)
                        gemm<T>(true, false, k, n, m, tdata<T>(av).data(), pg.data(), db.data());
                      g.push_back(Tensor::from({k, n}, std::move(db)));
                    }
                    return 0;
                  });
                  return g;
                });
}

Tensor logsumexp(const Tensor& x) {
  if (x.rank() < 1)
    throw ContractError("logsumexp: requires rank >= 1");
  std::int64_t C = x.shape().back();
  if (C < 1) throw ContractError("logsumexp: empty last axis");
  std::int64_t rows = x.size() / C;
  Shape os(x.shape().begin(), x.shape().end() - 1);
  Tape* tape = common_tape({&x});
  Tensor out = dispatch(x.dtype(), [&](auto tag) {
    using T = typename decltype(tag)::type;
    auto in = tdata<T>(x);
    std::vector<T> v(static_cast<std::size_t>(rows));
    for (std::int64_t r = 0; r < rows; ++r) {
      const T* p = in.data() + r * C;
      double m = p[0];
      for (std::int64_t c = 1; c < C; ++c) m = std::max(m, static_cast<double>(p[c]));
      double s = 0.0;
      for (std::int64_t c = 0; c < C; ++c) s += std::exp(static_cast<double>(p[c]) - m);
      v[static_cast<std::size_t>(r)] = static_cast<T>(m + std::log(s));
    }
    return Tensor::from(os, std::move(v));
  });
  if (!tape) return out;
  Tensor xv = x.detached(), ov = out;
  return finish(std::move(out), tape, {x.node()},
                [xv, ov, rows, C](const Tensor& go) {
                  return std::vector<Tensor>{dispatch(xv.dtype(), [&](auto tag) {
                    using T = typename decltype(tag)::type;
                    auto px = tdata<T>(xv);
                    auto po = tdata<T>(ov);
                    auto pg = tdata<T>(go);
                    std::vector<T> v(px.size());
                    for (std::int64_t r = 0; r < rows; ++r)
                      for (std::int64_t c = 0; c < C; ++c)
                        v[r * C + c] = static_cast<T>(
                            static_cast<double>(pg[r]) *
                            std::exp(static_cast<double>(px[r * C + c]) -
                                     static_cast<double>(po[r])));
                    return Tensor::from(xv.shape(), std::move(v));
                  })};
                });
}

Tensor log_softmax(const Tensor& x) {
  if (x.rank() < 1)
    throw ContractError("log_softmax: requires rank >= 1");
  std::int64_t C = x.shape().back();
  if (C < 1) throw ContractError("log_softmax: empty last axis");
  std::int64_t rows = x.size() / C;
  Tape* tape = common_tape({&x});
  Tensor out = dispatch(x.dtype(), [&](auto tag) {
    using T = typename decltype(tag)::type;
    auto in = tdata<T>(x);
    std::vector<T> v(in.size());
    for (std::int64_t r = 0; r < rows; ++r) {
      const T* p = in.data() + r * C;
      double m = p[0];
      for (std::int64_t c = 1; c < C; ++c) m = std::max(m, static_cast<double>(p[c]));
      double s = 0.0;
      for (std::int64_t c = 0; c < C; ++c) s += std::exp(static_cast<double>(p[c]) - m);
      double lse = m + std::log(s);
      for (std::int64_t c = 0; c < C; ++c)
        v[r * C + c] = static_cast<T>(static_cast<double>(p[c]) - lse);
    }
    return Tensor::from(x.shape(), std::move(v));
  });
  if (!tape) return out;
  Tensor ov = out;
  return finish(std::move(out), tape, {x.node()},
                [ov, rows, C](const Tensor& go) {
                  return std::vector<Tensor>{dispatch(ov.dtype(), [&](auto tag) {
                    using T = typename decltype(tag)::type;
                    auto po = tdata<T>(ov);
                    auto pg = tdata<T>(go);
                    std::vector<T> v(po.size());
                    for (std::int64_t r = 0; r < rows; ++r) {
                      double gs = 0.0;
                      for (std::int64_t c = 0; c < C; ++c)
                        gs += static_cast<double>(pg[r * C + c]);
                      for (std::int64_t c = 0; c < C; ++c)
                        v[r * C + c] = static_cast<T>(
                            static_cast<double>(pg[r * C + c]) -
                            std::exp(static_cast<double>(po[r * C + c])) * gs);
                    }
                    return Tensor::from(ov.shape(), std::move(v));
                  })};
                });
}

Tensor softmax(const Tensor& x) {
  if (x.rank() < 1)
    throw ContractError("softmax: requires rank >= 1");
  std::int64_t C = x.shape().back();
  if (C < 1) throw ContractError("softmax: empty last axis");
  std::int64_t rows = x.size() / C;
  Tape* tape = common_tape({&x});
  Tensor out = dispatch(x.dtype(), [&](auto tag) {
    using T = typename decltype(tag)::type;
    auto in = tdata<T>(x);
    std::vector<T> v(in.size());
    for (std::int64_t r = 0; r < rows; ++r) {
      const T* p = in.data() + r * C;
      double m = p[0];
      for (std::int64_t c = 1; c < C; ++c) m = std::max(m, static_cast<double>(p[c]));
      double s = 0.0;
      for (std::int64_t c = 0; c < C; ++c) s += std::exp(static_cast<double>(p[c]) - m);
      for (std::int64_t c = 0; c < C; ++c)
        v[r * C + c] = static_cast<T>(std::exp(static_cast<double>(p[c]) - m) / s);
    }
    return Tensor::from(x.shape(), std::move(v));
  });
  if (!tape) return out;
  Tensor pv = out;
  return finish(std::move(out), tape, {x.node()},
                [pv, rows, C](const Tensor& go) {
                  return std::vector<Tensor>{dispatch(pv.dtype(), [&](auto tag) {
                    using T = typename decltype(tag)::type;
                    auto pp = tdata<T>(pv);
                    auto pg = tdata<T>(go);
                    std::vector<T> v(pp.size());
                    for (std::int64_t r = 0; r < rows; ++r) {
                      double dot = 0.0;
                      for (std::int64_t c = 0; c < C; ++c)
                        dot += static_cast<double>(pg[r * C + c]) *
                               static_cast<double>(pp[r * C + c]);
                      for (std::int64_t c = 0; c < C; ++c)
                        v[r * C + c] = static_cast<T>(
                            static_cast<double>(pp[r * C + c]) *
                            (static_cast<double>(pg[r * C + c]) - dot));
                    }
                    return Tensor::from(pv.shape(), std::move(v));
                  })};
                });
}

Tensor sum(const Tensor& x) {
  Tape* tape = common_tape({&x});
  double acc = 0.0;
  if (x.dtype() == DType::f64) {
    for (double v : x.f64()) acc += v;
  } else {
    for (float v : x.f32()) acc += v;
  }
  Tensor out = Tensor::scalar(acc, x.dtype());
  if (!tape) return out;
  Shape xs = x.shape();
  DType dt = x.dtype();
  return finish(std::move(out), tape, {x.node()}, [xs, dt](const Tensor& go) {
    return std::vector<Tensor>{Tensor::full(xs, go.at(0), dt)};
  });
}

Tensor mean(const Tensor& x) {
  std::int64_t n = x.size();
  if (n == 0) throw ContractError("mean: empty tensor");
  Tape* tape = common_tape({&x});
  double acc = 0.0;
  if (x.dtype() == DType::f64) {
    for (double v : x.f64()) acc += v;
  } else {
    for (float v : x.f32()) acc += v;
  }
  Tensor out = Tensor::scalar(acc / static_cast<double>(n), x.dtype());
  if (!tape) return out;
  Shape xs = x.shape();
  DType dt = x.dtype();
  return finish(std::move(out), tape, {x.node()}, [xs, dt, n](const Tensor& go) {
    return std::vector<Tensor>{
        Tensor::full(xs, go.at(0) / static_cast<double>(n), dt)};
  });
}

Tensor row_sum(const Tensor& x) {
  require_rank2("row_sum", x);
  std::int64_t n = x.dim(0), C = x.dim(1);
  Tape* tape = common_tape({&x});
  Tensor out = last_axis_sum(x.attached() ? x.detached() : x);
  if (!tape) return out;
  DType dt = x.dtype();
  return finish(std::move(out), tape, {x.node()}, [n, C, dt](const Tensor& go) {
    return std::vector<Tensor>{dispatch(dt, [&](auto tag) {
      using T = typename decltype(tag)::type;
      auto pg = tdata<T>(go);
      std::vector<T> v(static_cast<std::size_t>(n * C));
      for (std::int64_t r = 0; r < n; ++r)
        for (std::int64_t c = 0; c < C; ++c) v[r * C + c] = pg[r];
      return Tensor::from({n, C}, std::move(v));
    })};
  });
}

Tensor slice_cols(const Tensor& x, std::int64_t begin, std::int64_t end) {
  require_rank2("slice_cols", x);
  std::int64_t n = x.dim(0), C = x.dim(1);
  if (begin < 0 || end > C || begin >= end)
    throw ContractError("slice_cols: bad column range [" + std::to_string(begin) +
                        "," + std::to_string(end) + ") for " + shape_str(x.shape()));
  std::int64_t W = end - begin;
  Tape* tape = common_tape({&x});
  Tensor out = dispatch(x.dtype(), [&](auto tag) {
    using T = typename decltype(tag)::type;
    auto in = tdata<T>(x);
    std::vector<T> v(static_cast<std::size_t>(n * W));
    for (std::int64_t r = 0; r < n; ++r)
      std::copy_n(in.data() + r * C + begin, W, v.data() + r * W);
    return Tensor::from({n, W}, std::move(v));
  });
  if (!tape) return out;
  DType dt = x.dtype();
  return finish(std::move(out), tape, {x.node()},
                [n, C, W, begin, dt](const Tensor& go) {
                  return std::vector<Tensor>{dispatch(dt, [&](auto tag) {
                    using T = typename decltype(tag)::type;
                    auto pg = tdata<T>(go);
                    std::vector<T> v(static_cast<std::size_t>(n * C), T(0));
                    for (std::int64_t r = 0; r < n; ++r)
                      std::copy_n(pg.data() + r * W, W, v.data() + r * C + begin);
                    return Tensor::from({n, C}, std::move(v));
                  })};
                });
}

Tensor stack_cols(std::span<const Tensor> cols) {
  if (cols.empty()) throw ContractError("stack_cols: no inputs");
  std::int64_t n = -1;
  DType dt = cols[0].dtype();
  Tape* tape = nullptr;
  for (const Tensor& c : cols) {
    if (c.rank() != 1)
      throw ContractError("stack_cols: inputs must be rank-1, got " +
                          shape_str(c.shape()));
    if (n < 0) n = c.dim(0);
    if (c.dim(0) != n) throw ContractError("stack_cols: length mismatch");
    if (c.dtype() != dt) throw ContractError("stack_cols: dtype mismatch");
    if (c.attached()) {
      c.tape()->check_tensor(c);
      if (tape && tape != c.tape())
        throw ContractError("stack_cols: inputs belong to different tapes");
      tape = c.tape();
    }
  }
  std::int64_t S = static_cast<std::int64_t>(cols.size());
  Tensor out = dispatch(dt, [&](auto tag) {
    using T = typename decltype(tag)::type;
    std::vector<T> v(static_cast<std::size_t>(n * S));
    for (std::int64_t j = 0; j < S; ++j) {
      auto in = tdata<T>(cols[static_cast<std::size_t>(j)]);
      for (std::int64_t r = 0; r < n; ++r) v[r * S + j] = in[r];
    }
    return Tensor::from({n, S}, std::move(v));
  });
  if (!tape) return out;
  std::vector<std::int64_t> ids;
  std::vector<std::int64_t> attached_cols;
  for (std::int64_t j = 0; j < S; ++j) {
    if (cols[static_cast<std::size_t>(j)].attached()) {
      ids.push_back(cols[static_cast<std::size_t>(j)].node());
      attached_cols.push_back(j);
    }
  }
  return finish(std::move(out), tape, std::move(ids),
                [attached_cols, n, S, dt](const Tensor& go) {
                  std::vector<Tensor> g;
                  dispatch(dt, [&](auto tag) {
                    using T = typename decltype(tag)::type;
                    auto pg = tdata<T>(go);
                    for (std::int64_t j : attached_cols) {
                      std::vector<T> v(static_cast<std::size_t>(n));
                      for (std::int64_t r = 0; r < n; ++r) v[r] = pg[r * S + j];
                      g.push_back(Tensor::from({n}, std::move(v)));
                    }
                    return 0;
                  });
                  return g;
                });
}

Tensor take_per_row(const Tensor& x, std::span<const std::int32_t> idx) {
  require_rank2("take_per_row", x);
  std::int64_t n = x.dim(0), C = x.dim(1);
  if (static_cast<std::int64_t>(idx.size()) != n)
    throw ContractError("take_per_row: index count " + std::to_string(idx.size()) +
                        " != rows " + std::to_string(n));
  for (std::int32_t i : idx)
    if (i < 0 || i >= C)
      throw ContractError("take_per_row: class index " + std::to_string(i) +
                          " out of range [0," + std::to_string(C) + ")");
  std::vector<std::int32_t> ix(idx.begin(), idx.end());
  Tape* tape = common_tape({&x});
  Tensor out = dispatch(x.dtype(), [&](auto tag) {
    using T = typename decltype(tag)::type;
    auto in = tdata<T>(x);
    std::vector<T> v(static_cast<std::size_t>(n));
    for (std::int64_t r = 0; r < n; ++r) v[r] = in[r * C + ix[r]];
    return Tensor::from({n}, std::move(v));
  });
  if (!tape) return out;
  DType dt = x.dtype();
  return finish(std::move(out), tape, {x.node()},
                [ix = std::move(ix), n, C, dt](const Tensor& go) {
                  return std::vector<Tensor>{dispatch(dt, [&](auto tag) {
                    using T = typename decltype(tag)::type;
                    auto pg = tdata<T>(go);
                    std::vector<T> v(static_cast<std::size_t>(n * C), T(0));
                    for (std::int64_t r = 0; r < n; ++r) v[r * C + ix[r]] = pg[r];
                    return Tensor::from({n, C}, std::move(v));
                  })};
                });
}

Tensor take_rows(const Tensor& m, std::span<const std::int32_t> idx) {
  require_rank2("take_rows", m);
  std::int64_t R = m.dim(0), K = m.dim(1);
  std::int64_t n = static_cast<std::int64_t>(idx.size());
  for (std::int32_t i : idx)
    if (i < 0 || i >= R)
      throw ContractError("take_rows: row index " + std::to_string(i) +
                          " out of range [0," + std::to_string(R) + ")");
  std::vector<std::int32_t> ix(idx.begin(), idx.end());
  Tape* tape = common_tape({&m});
  Tensor out = dispatch(m.dtype(), [&](auto tag) {
    using T = typename decltype(tag)::type;
    auto in = tdata<T>(m);
    std::vector<T> v(static_cast<std::size_t>(n * K));
    for (std::int64_t r = 0; r < n; ++r)
      std::copy_n(in.data() + static_cast<std::int64_t>(ix[r]) * K, K, v.data() + r * K);
    return Tensor::from({n, K}, std::move(v));
  });
  if (!tape) return out;
  DType dt = m.dtype();
  return finish(std::move(out), tape, {m.node()},
                [ix = std::move(ix), R, K, n, dt](const Tensor& go) {
                  return std::vector<Tensor>{dispatch(dt, [&](auto tag) {
                    using T = typename decltype(tag)::type;
                    auto pg = tdata<T>(go);
                    std::vector<T> v(static_cast<std::size_t>(R * K), T(0));
                    for (std::int64_t r = 0; r < n; ++r) {
                      T* dst = v.data() + static_cast<std::int64_t>(ix[r]) * K;
                      const T* src = pg.data() + r * K;
                      for (std::int64_t k = 0; k < K; ++k) dst[k] += src[k];
                    }
                    return Tensor::from({R, K}, std::move(v));
                  })};
                });
}

Tensor gaussian_reparam_sample(const Tensor& mu, const Tensor& sigma,
                               const Tensor& noise) {
  if (mu.shape() != sigma.shape() || mu.shape() != noise.shape())
    throw ContractError("gaussian_reparam_sample: shape mismatch mu " +
                        shape_str(mu.shape()) + ", sigma " + shape_str(sigma.shape()) +
                        ", noise " + shape_str(noise.shape()));
  bool ok = true;
  if (sigma.dtype() == DType::f64) {
    for (double v : sigma.f64())
      if (!(v > 0.0)) { ok = false; break; }
  } else {
    for (float v : sigma.f32())
      if (!(v > 0.0f)) { ok = false; break; }
  }
  if (!ok)
    throw NumericError("gaussian_reparam_sample: sigma must be strictly positive");
  return add(mu, mul(sigma, noise.attached() ? noise.detached() : noise));
}

}  // namespace ib
