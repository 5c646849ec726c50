#include "ib/model.hpp"

#include <cmath>

#include "ib/errors.hpp"
#include "ib/ops.hpp"

namespace ib {

const char* model_kind_name(ModelKind k) {
  switch (k) {
    case ModelKind::det: return "det";
    case ModelKind::vib: return "vib";
    case ModelKind::ceb: return "ceb";
  }
  return "?";
}

ModelKind model_kind_from_name(const std::string& s) {
  if (s == "det") return ModelKind::det;
  if (s == "vib") return ModelKind::vib;
  if (s == "ceb") return ModelKind::ceb;
  throw ConfigError("unknown model kind '" + s + "' (expected det, vib or ceb)");
}

const char* eval_mode_name(EvalMode m) {
  return m == EvalMode::mean ? "mean" : "stochastic";
}

EvalMode eval_mode_from_name(const std::string& s) {
  if (s == "mean") return EvalMode::mean;
  if (s == "stochastic") return EvalMode::stochastic;
  throw ConfigError("unknown eval mode '" + s + "' (expected mean or stochastic)");
}

double Model::rate_weight() const {
  if (arch.kind == ModelKind::vib) return beta;
  if (arch.kind == ModelKind::ceb) return std::exp(-rho);
  return 0.0;
}

ParamLayout param_layout(const Architecture& arch) {
  if (arch.input_dim < 1) throw ConfigError("architecture: input_dim must be >= 1");
  if (arch.num_classes < 2) throw ConfigError("architecture: need >= 2 classes");
  ParamLayout l;
  int idx = 0;
  for (std::size_t i = 0; i < arch.hidden.size(); ++i) {
    if (arch.hidden[i] < 1) throw ConfigError("architecture: hidden width must be >= 1");
    l.hidden.emplace_back(idx, idx + 1);
    idx += 2;
  }
  if (arch.kind == ModelKind::det) {
    if (arch.bottleneck > 0) {
      l.wk = idx++;
      l.bk = idx++;
    }
  } else {
    if (arch.bottleneck < 1)
      throw ConfigError("architecture: stochastic models need bottleneck K >= 1");
    l.wenc = idx++;
    l.benc = idx++;
  }
  l.wdec = idx++;
  l.bdec = idx++;
  if (arch.kind == ModelKind::ceb) l.backward = idx++;
  l.count = idx;
  return l;
}

std::vector<Shape> param_shapes(const Architecture& arch) {
  ParamLayout l = param_layout(arch);
  std::vector<Shape> shapes(static_cast<std::size_t>(l.count));
  std::int64_t prev = arch.input_dim;
  for (std::size_t i = 0; i < arch.hidden.size(); ++i) {
    shapes[static_cast<std::size_t>(l.hidden[i].first)] = {prev, arch.hidden[i]};
    shapes[static_cast<std::size_t>(l.hidden[i].second)] = {arch.hidden[i]};
    prev = arch.hidden[i];
  }
  std::int64_t K = arch.bottleneck;
  if (arch.kind == ModelKind::det) {
    std::int64_t dec_in = prev;
    if (K > 0) {
      shapes[static_cast<std::size_t>(l.wk)] = {prev, K};
      shapes[static_cast<std::size_t>(l.bk)] = {K};
      dec_in = K;
    }
    shapes[static_cast<std::size_t>(l.wdec)] = {dec_in, arch.num_classes};
  } else {
    shapes[static_cast<std::size_t>(l.wenc)] = {prev, 2 * K};
    shapes[static_cast<std::size_t>(l.benc)] = {2 * K};
    shapes[static_cast<std::size_t>(l.wdec)] = {K, arch.num_classes};
  }
  shapes[static_cast<std::size_t>(l.bdec)] = {arch.num_classes};
  if (arch.kind == ModelKind::ceb)
    shapes[static_cast<std::size_t>(l.backward)] = {arch.num_classes, K};
  return shapes;
}

std::vector<std::string> param_names(const Architecture& arch) {
  ParamLayout l = param_layout(arch);
  std::vector<std::string> names(static_cast<std::size_t>(l.count));
  for (std::size_t i = 0; i < l.hidden.size(); ++i) {
    names[static_cast<std::size_t>(l.hidden[i].first)] = "hidden" + std::to_string(i) + ".W";
    names[static_cast<std::size_t>(l.hidden[i].second)] = "hidden" + std::to_string(i) + ".b";
  }
  if (l.wk >= 0) {
    names[static_cast<std::size_t>(l.wk)] = "bottleneck.W";
    names[static_cast<std::size_t>(l.bk)] = "bottleneck.b";
  }
  if (l.wenc >= 0) {
    names[static_cast<std::size_t>(l.wenc)] = "encoder.W";
    names[static_cast<std::size_t>(l.benc)] = "encoder.b";
  }
  names[static_cast<std::size_t>(l.wdec)] = "decoder.W";
  names[static_cast<std::size_t>(l.bdec)] = "decoder.b";
  if (l.backward >= 0) names[static_cast<std::size_t>(l.backward)] = "backward.B";
  return names;
}

std::vector<Tensor> init_params(const Architecture& arch, InitScheme scheme,
                                std::uint64_t seed) {
  auto shapes = param_shapes(arch);
  std::vector<Tensor> params;
  params.reserve(shapes.size());
  for (std::size_t i = 0; i < shapes.size(); ++i) {
    const Shape& s = shapes[i];
    if (scheme == InitScheme::zeros || s.size() == 1) {
      params.push_back(Tensor::zeros(s, arch.dtype));
      continue;
    }
    double fan_in = static_cast<double>(s[0]);
    double fan_out = static_cast<double>(s[1]);
    double a = std::sqrt(6.0 / (fan_in + fan_out));
    Rng rng = Rng::derive(seed, {Rng::kParamInit, static_cast<std::uint64_t>(i)});
    std::vector<double> v(static_cast<std::size_t>(shape_numel(s)));
    rng.fill_uniform(v, -a, a);
    Tensor t = Tensor::from(s, std::move(v));
    params.push_back(arch.dtype == DType::f64 ? t : t.astype(DType::f32));
  }
  return params;
}

void validate_model(const Model& m) {
  auto shapes = param_shapes(m.arch);
  if (m.params.size() != shapes.size())
    throw ContractError("model has " + std::to_string(m.params.size()) +
                        " parameter tensors, layout expects " +
                        std::to_string(shapes.size()));
  for (std::size_t i = 0; i < shapes.size(); ++i) {
    if (m.params[i].shape() != shapes[i])
      throw ContractError("parameter " + std::to_string(i) + " has shape " +
                          shape_str(m.params[i].shape()) + ", layout expects " +
                          shape_str(shapes[i]));
    if (m.params[i].dtype() != m.arch.dtype)
      throw ContractError("parameter " + std::to_string(i) + " dtype mismatch");
  }
  if (m.samples < 1) throw ConfigError("model: samples must be >= 1");
}

Tensor trunk_forward(const Architecture& arch, std::span<const Tensor> params,
                     const Tensor& x) {
  if (x.rank() != 2 || x.dim(1) != arch.input_dim)
    throw ContractError("forward: input shape " + shape_str(x.shape()) +
                        " does not match input_dim " + std::to_string(arch.input_dim));
  ParamLayout l = param_layout(arch);
  Tensor h = arch.rescale_input ? add_scalar(scale(x, 2.0), -1.0) : x;
  for (auto [wi, bi] : l.hidden)
    h = relu(add(matmul(h, params[static_cast<std::size_t>(wi)]),
                 params[static_cast<std::size_t>(bi)]));
  return h;
}

Encoded encode(const Architecture& arch, std::span<const Tensor> params,
               const Tensor& x) {
  if (arch.kind == ModelKind::det)
    throw ContractError("encode: deterministic model has no encoder");
  ParamLayout l = param_layout(arch);
  Tensor h = trunk_forward(arch, params, x);
  Tensor enc = add(matmul(h, params[static_cast<std::size_t>(l.wenc)]),
                   params[static_cast<std::size_t>(l.benc)]);
  std::int64_t K = arch.bottleneck;
  Encoded out;
  out.mu = slice_cols(enc, 0, K);
  if (arch.kind == ModelKind::vib) {
    out.sigma = shifted_softplus(slice_cols(enc, K, 2 * K));
  } else {
    out.sigma = Tensor::full({enc.dim(0), K}, 1.0, enc.dtype());
  }
  return out;
}

Tensor decode_logits(const Architecture& arch, std::span<const Tensor> params,
                     const Tensor& z) {
  ParamLayout l = param_layout(arch);
  return add(matmul(z, params[static_cast<std::size_t>(l.wdec)]),
             params[static_cast<std::size_t>(l.bdec)]);
}

Tensor det_logits(const Architecture& arch, std::span<const Tensor> params,
                  const Tensor& x) {
  if (arch.kind != ModelKind::det)
    throw ContractError("det_logits: not a deterministic model");
  ParamLayout l = param_layout(arch);
  Tensor h = trunk_forward(arch, params, x);
  if (l.wk >= 0)
    h = add(matmul(h, params[static_cast<std::size_t>(l.wk)]),
            params[static_cast<std::size_t>(l.bk)]);
  return add(matmul(h, params[static_cast<std::size_t>(l.wdec)]),
             params[static_cast<std::size_t>(l.bdec)]);
}

Tensor predict_probs(const Model& m, const Tensor& x, EvalMode mode, int S,
                     std::uint64_t seed, std::span<const std::int64_t> ids) {
  std::int64_t n = x.dim(0);
  if (m.arch.kind == ModelKind::det)
    return softmax(det_logits(m.arch, m.params, x));
  Encoded enc = encode(m.arch, m.params, x);
  if (mode == EvalMode::mean)
    return softmax(decode_logits(m.arch, m.params, enc.mu));
  if (S < 1) throw ConfigError("stochastic prediction needs S >= 1 samples");
  if (static_cast<std::int64_t>(ids.size()) != n)
    throw ContractError("predict_probs: ids size != batch rows");
  std::int64_t K = m.arch.bottleneck;
  Tensor acc;
  for (int s = 0; s < S; ++s) {
    std::vector<double> nz(static_cast<std::size_t>(n * K));
    for (std::int64_t i = 0; i < n; ++i) {
      Rng rng = Rng::derive(seed, {Rng::kEvalNoise,
                                   static_cast<std::uint64_t>(ids[static_cast<std::size_t>(i)]),
                                   static_cast<std::uint64_t>(s)});
      rng.fill_normal({nz.data() + i * K, static_cast<std::size_t>(K)});
    }
    Tensor noise = Tensor::from({n, K}, std::move(nz));
    if (m.arch.dtype != DType::f64) noise = noise.astype(m.arch.dtype);
    Tensor z = gaussian_reparam_sample(enc.mu, enc.sigma, noise);
    Tensor p = softmax(decode_logits(m.arch, m.params, z));
    acc = acc.defined() ? add(acc, p) : p;
  }
  return scale(acc, 1.0 / static_cast<double>(S));
}

Tensor predict_probs(const Model& m, const Tensor& x, EvalMode mode, int S,
                     std::uint64_t seed, std::int64_t id_base) {
  std::vector<std::int64_t> ids(static_cast<std::size_t>(x.dim(0)));
  for (std::size_t i = 0; i < ids.size(); ++i)
    ids[i] = id_base + static_cast<std::int64_t>(i);
  return predict_probs(m, x, mode, S, seed, ids);
}

std::vector<std::int32_t> argmax_rows(const Tensor& probs) {
  if (probs.rank() != 2) throw ContractError("argmax_rows: expected [n, C]");
  std::int64_t n = probs.dim(0), C = probs.dim(1);
  std::vector<std::int32_t> out(static_cast<std::size_t>(n));
  std::vector<double> row = probs.to_vector();
  for (std::int64_t i = 0; i < n; ++i) {
    double best = row[static_cast<std::size_t>(i * C)];
    std::int32_t arg = 0;
    for (std::int64_t c = 1; c < C; ++c) {
      double v = row[static_cast<std::size_t>(i * C + c)];
      if (v > best) {  // strict: ties keep the lowest index
        best = v;
        arg = static_cast<std::int32_t>(c);
      }
    }
    out[static_cast<std::size_t>(i)] = arg;
  }
  return out;
}

double accuracy(const Model& m, const LabeledDataset& ds, EvalMode mode, int S,
                std::uint64_t seed) {
  const std::int64_t chunk = 2048;
  std::int64_t n = ds.n(), correct = 0;
  auto xs = ds.x.f64();
  std::int64_t d = ds.dim();
  for (std::int64_t at = 0; at < n; at += chunk) {
    std::int64_t take = std::min(chunk, n - at);
    std::vector<double> v(xs.begin() + at * d, xs.begin() + (at + take) * d);
    Tensor xb = Tensor::from({take, d}, std::move(v));
    if (m.arch.dtype != DType::f64) xb = xb.astype(m.arch.dtype);
    Tensor probs = predict_probs(m, xb, mode, S, seed, at);
    auto pred = argmax_rows(probs);
    for (std::int64_t i = 0; i < take; ++i)
      if (pred[static_cast<std::size_t>(i)] == ds.y[static_cast<std::size_t>(at + i)])
        ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(n);
}

}  // namespace ib
