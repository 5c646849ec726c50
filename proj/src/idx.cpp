#include "ib/idx.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "ib/errors.hpp"
#include "ib/rng.hpp"

namespace ib {

namespace {

constexpr std::uint32_t kImageMagic = 0x00000803u;
constexpr std::uint32_t kLabelMagic = 0x00000801u;

std::vector<unsigned char> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);
  in.seekg(0, std::ios::end);
  auto len = static_cast<std::size_t>(in.tellg());
  in.seekg(0, std::ios::beg);
  std::vector<unsigned char> buf(len);
  if (len) in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(len));
  if (!in) throw DataError("failed reading " + path);
  return buf;
}

std::uint32_t be32(const std::vector<unsigned char>& b, std::size_t off) {
  return (static_cast<std::uint32_t>(b[off]) << 24) |
         (static_cast<std::uint32_t>(b[off + 1]) << 16) |
         (static_cast<std::uint32_t>(b[off + 2]) << 8) |
         static_cast<std::uint32_t>(b[off + 3]);
}

void put_be32(std::vector<unsigned char>& b, std::uint32_t v) {
  b.push_back(static_cast<unsigned char>(v >> 24));
  b.push_back(static_cast<unsigned char>(v >> 16));
  b.push_back(static_cast<unsigned char>(v >> 8));
  b.push_back(static_cast<unsigned char>(v));
}

std::string hex32(std::uint32_t v) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "0x%08X", v);
  return buf;
}

}  // namespace

IdxImages load_idx_images(const std::string& path) {
  auto buf = read_file(path);
  if (buf.size() < 16) throw DataError(path + ": truncated header (" +
                                       std::to_string(buf.size()) + " bytes)");
  std::uint32_t magic = be32(buf, 0);
  if (magic != kImageMagic)
    throw DataError(path + ": bad magic " + hex32(magic) + ", expected " +
                    hex32(kImageMagic));
  std::int64_t n = be32(buf, 4);
  std::int64_t rows = be32(buf, 8);
  std::int64_t cols = be32(buf, 12);
  std::size_t want = 16 + static_cast<std::size_t>(n * rows * cols);
  if (buf.size() != want)
    throw DataError(path + ": truncated, expected " + std::to_string(want) +
                    " bytes, got " + std::to_string(buf.size()));
  std::vector<double> v(static_cast<std::size_t>(n * rows * cols));
  for (std::size_t i = 0; i < v.size(); ++i)
    v[i] = static_cast<double>(buf[16 + i]) / 255.0;
  IdxImages out;
  out.x = Tensor::from({n, rows * cols}, std::move(v));
  out.rows = rows;
  out.cols = cols;
  out.file_hash = fnv1a64({buf.data(), buf.size()});
  return out;
}

IdxLabels load_idx_labels(const std::string& path) {
  auto buf = read_file(path);
  if (buf.size() < 8) throw DataError(path + ": truncated header (" +
                                      std::to_string(buf.size()) + " bytes)");
  std::uint32_t magic = be32(buf, 0);
  if (magic != kLabelMagic)
    throw DataError(path + ": bad magic " + hex32(magic) + ", expected " +
                    hex32(kLabelMagic));
  std::int64_t n = be32(buf, 4);
  std::size_t want = 8 + static_cast<std::size_t>(n);
  if (buf.size() != want)
    throw DataError(path + ": truncated, expected " + std::to_string(want) +
                    " bytes, got " + std::to_string(buf.size()));
  IdxLabels out;
  out.y.resize(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i) out.y[static_cast<std::size_t>(i)] = buf[8 + i];
  out.file_hash = fnv1a64({buf.data(), buf.size()});
  return out;
}

void write_idx_images(const std::string& path, const Tensor& x01,
                      std::int64_t rows, std::int64_t cols) {
  if (x01.rank() != 2 || x01.dim(1) != rows * cols)
    throw ContractError("write_idx_images: shape " + shape_str(x01.shape()) +
                        " does not match " + std::to_string(rows) + "x" +
                        std::to_string(cols));
  std::vector<unsigned char> buf;
  buf.reserve(16 + static_cast<std::size_t>(x01.size()));
  put_be32(buf, kImageMagic);
  put_be32(buf, static_cast<std::uint32_t>(x01.dim(0)));
  put_be32(buf, static_cast<std::uint32_t>(rows));
  put_be32(buf, static_cast<std::uint32_t>(cols));
  auto v = x01.f64();
  for (double d : v) {
    if (d < 0.0 || d > 1.0)
      throw ContractError("write_idx_images: pixel outside [0,1]");
    buf.push_back(static_cast<unsigned char>(std::lround(d * 255.0)));
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path);
  out.write(reinterpret_cast<const char*>(buf.data()),
            static_cast<std::streamsize>(buf.size()));
}

void write_idx_labels(const std::string& path, const std::vector<std::int32_t>& y) {
  std::vector<unsigned char> buf;
  buf.reserve(8 + y.size());
  put_be32(buf, kLabelMagic);
  put_be32(buf, static_cast<std::uint32_t>(y.size()));
  for (std::int32_t v : y) {
    if (v < 0 || v > 255) throw ContractError("write_idx_labels: label out of byte range");
    buf.push_back(static_cast<unsigned char>(v));
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path);
  out.write(reinterpret_cast<const char*>(buf.data()),
            static_cast<std::streamsize>(buf.size()));
}

}  // namespace ib
