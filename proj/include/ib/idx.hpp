#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ib/tensor.hpp"

namespace ib {

// IDX image/label container (big-endian headers, magic 0x803 / 0x801).
// Pixels are scaled to [0,1] on load; writers reverse the scaling so a
// load/write round trip reproduces the file byte for byte.

struct IdxImages {
  Tensor x;  // [n, rows*cols] f64 in [0,1]
  std::int64_t rows = 0;
  std::int64_t cols = 0;
  std::uint64_t file_hash = 0;  // FNV-1a of the raw file bytes
};

struct IdxLabels {
  std::vector<std::int32_t> y;
  std::uint64_t file_hash = 0;
};

IdxImages load_idx_images(const std::string& path);
IdxLabels load_idx_labels(const std::string& path);

void write_idx_images(const std::string& path, const Tensor& x01,
                      std::int64_t rows, std::int64_t cols);
void write_idx_labels(const std::string& path, const std::vector<std::int32_t>& y);

}  // namespace ib
