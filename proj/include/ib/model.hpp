#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ib/dataset.hpp"
#include "ib/rng.hpp"
#include "ib/tensor.hpp"

namespace ib {

enum class ModelKind { det, vib, ceb };
enum class EvalMode { mean, stochastic };

const char* model_kind_name(ModelKind k);
ModelKind model_kind_from_name(const std::string& s);
const char* eval_mode_name(EvalMode m);
EvalMode eval_mode_from_name(const std::string& s);

// Fully-connected classifier family.
//   det:  trunk -> [optional linear bottleneck] -> linear head -> softmax
//   vib:  trunk -> linear to 2K (mu, softplus sigma) -> sample -> linear head
//   ceb:  same encoder layout as vib but sigma fixed to 1 (the second K
//         columns are unused), plus a class-conditional backward encoder
//         B [C, K] whose row y is the target mean for label y.
struct Architecture {
  ModelKind kind = ModelKind::det;
  std::int64_t input_dim = 0;
  std::vector<std::int64_t> hidden;  // relu layer widths
  std::int64_t bottleneck = 0;       // K (0 = none, det only)
  std::int64_t num_classes = 0;
  bool rescale_input = false;  // x -> 2x - 1 inside the network
  DType dtype = DType::f64;
};

// Index of each parameter tensor inside Model::params.
struct ParamLayout {
  std::vector<std::pair<int, int>> hidden;  // (W, b) per relu layer
  int wk = -1, bk = -1;                     // det bottleneck
  int wenc = -1, benc = -1;                 // vib/ceb encoder head
  int wdec = -1, bdec = -1;                 // decoder
  int backward = -1;                        // ceb backward encoder B
  int count = 0;
};

ParamLayout param_layout(const Architecture& arch);
std::vector<Shape> param_shapes(const Architecture& arch);
std::vector<std::string> param_names(const Architecture& arch);

enum class InitScheme { xavier_uniform, zeros };

// Xavier-uniform weights (U(-a, a), a = sqrt(6 / (fan_in + fan_out))) with
// zero biases, or all zeros. One derived stream per parameter tensor.
std::vector<Tensor> init_params(const Architecture& arch, InitScheme scheme,
                                std::uint64_t seed);

struct Model {
  Architecture arch;
  std::vector<Tensor> params;
  double beta = 0.0;  // vib rate weight
  double rho = 0.0;   // ceb: rate weight is exp(-rho)
  int samples = 12;   // S for stochastic passes

  EvalMode default_eval() const {
    return arch.kind == ModelKind::det ? EvalMode::mean : EvalMode::stochastic;
  }
  double rate_weight() const;
};

void validate_model(const Model& m);  // shapes vs layout

struct Encoded {
  Tensor mu;
  Tensor sigma;  // undefined for det
};

// Forward pieces. They accept attached or detached tensors alike: attach the
// parameters to differentiate the loss, attach x to differentiate an attack.
Tensor trunk_forward(const Architecture& arch, std::span<const Tensor> params,
                     const Tensor& x);
Encoded encode(const Architecture& arch, std::span<const Tensor> params,
               const Tensor& x);
Tensor decode_logits(const Architecture& arch, std::span<const Tensor> params,
                     const Tensor& z);
Tensor det_logits(const Architecture& arch, std::span<const Tensor> params,
                  const Tensor& x);

// Class distribution per row. Stochastic mode averages softmax outputs over
// S reparameterized samples; the noise stream of row i is keyed by
// (seed, kEvalNoise, ids[i], s) so results do not depend on batch layout.
Tensor predict_probs(const Model& m, const Tensor& x, EvalMode mode, int S,
                     std::uint64_t seed, std::span<const std::int64_t> ids);
// ids = base..base+n-1
Tensor predict_probs(const Model& m, const Tensor& x, EvalMode mode, int S,
                     std::uint64_t seed, std::int64_t id_base = 0);

// Argmax with lowest-index tie break.
std::vector<std::int32_t> argmax_rows(const Tensor& probs);

double accuracy(const Model& m, const LabeledDataset& ds, EvalMode mode, int S,
                std::uint64_t seed);

}  // namespace ib
