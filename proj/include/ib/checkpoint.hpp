#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "ib/model.hpp"
#include "ib/train.hpp"

namespace ib {

// A checkpoint is `<base>.bin` (parameters as little-endian f64, evaluation
// parameters first, then optionally the raw non-averaged iterate) plus
// `<base>.json` describing the architecture and training provenance. Loaders
// validate the blob length against the declared shapes.

struct CheckpointMeta {
  std::uint64_t seed = 0;
  std::int64_t epochs = 0;
  double std_acc = -1.0;  // evaluation accuracy at save time, -1 unknown
  bool polyak = false;
  std::string dataset;
  std::uint64_t dataset_fingerprint = 0;
};

void save_checkpoint(const std::string& base, const Model& model,
                     const std::vector<Tensor>* raw_params,
                     const CheckpointMeta& meta);

struct LoadedCheckpoint {
  Model model;  // evaluation parameters
  std::optional<std::vector<Tensor>> raw_params;
  CheckpointMeta meta;
};

LoadedCheckpoint load_checkpoint(const std::string& base);

}  // namespace ib
