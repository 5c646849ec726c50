#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "ib/errors.hpp"
#include "ib/idx.hpp"
#include "ib/tensor.hpp"

using ib::Tensor;

namespace {

std::string temp_path(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / "ib_idx_tests";
  std::filesystem::create_directories(dir);
  return (dir / name).string();
}

void write_bytes(const std::string& path, const std::vector<unsigned char>& b) {
  std::ofstream out(path, std::ios::binary);
  out.write(reinterpret_cast<const char*>(b.data()),
            static_cast<std::streamsize>(b.size()));
}

std::vector<unsigned char> read_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void push_be32(std::vector<unsigned char>& b, std::uint32_t v) {
  b.push_back(static_cast<unsigned char>(v >> 24));
  b.push_back(static_cast<unsigned char>(v >> 16));
  b.push_back(static_cast<unsigned char>(v >> 8));
  b.push_back(static_cast<unsigned char>(v));
}

}  // namespace

TEST_CASE("image loader scales bytes into [0,1] against a hand-built file") {
  // two 2x3 images with known pixel bytes
  std::vector<unsigned char> file;
  push_be32(file, 0x803);
  push_be32(file, 2);
  push_be32(file, 2);
  push_be32(file, 3);
  const unsigned char px[12] = {0, 255, 128, 1, 2, 3, 254, 64, 32, 16, 8, 4};
  file.insert(file.end(), px, px + 12);
  const std::string path = temp_path("hand.idx3");
  write_bytes(path, file);

  ib::IdxImages img = ib::load_idx_images(path);
  CHECK(img.rows == 2);
  CHECK(img.cols == 3);
  CHECK(img.x.dim(0) == 2);
  CHECK(img.x.dim(1) == 6);
  CHECK(img.x.at(0) == 0.0);
  CHECK(img.x.at(1) == 1.0);
  CHECK(img.x.at(2) == doctest::Approx(128.0 / 255.0).epsilon(1e-15));
  CHECK(img.x.at(6) == doctest::Approx(254.0 / 255.0).epsilon(1e-15));
  CHECK(img.file_hash != 0);
}

TEST_CASE("label loader reads the raw byte stream") {
  std::vector<unsigned char> file;
  push_be32(file, 0x801);
  push_be32(file, 4);
  const unsigned char lab[4] = {7, 0, 9, 3};
  file.insert(file.end(), lab, lab + 4);
  const std::string path = temp_path("hand.idx1");
  write_bytes(path, file);

  ib::IdxLabels labels = ib::load_idx_labels(path);
  REQUIRE(labels.y.size() == 4);
  CHECK(labels.y[0] == 7);
  CHECK(labels.y[1] == 0);
  CHECK(labels.y[2] == 9);
  CHECK(labels.y[3] == 3);
}

TEST_CASE("write/load round trip reproduces values and bytes") {
  std::vector<double> v = {0.0, 1.0, 128.0 / 255.0, 17.0 / 255.0,
                           200.0 / 255.0, 55.0 / 255.0};
  Tensor x = Tensor::from({2, 3}, std::vector<double>(v));
  const std::string p1 = temp_path("rt1.idx3");
  ib::write_idx_images(p1, x, 1, 3);
  ib::IdxImages back = ib::load_idx_images(p1);
  for (std::size_t i = 0; i < v.size(); ++i)
    CHECK(back.x.at(static_cast<std::int64_t>(i)) ==
          doctest::Approx(v[i]).epsilon(1e-15));

  // loading and re-writing reproduces the file byte for byte
  const std::string p2 = temp_path("rt2.idx3");
  ib::write_idx_images(p2, back.x, back.rows, back.cols);
  CHECK(read_bytes(p1) == read_bytes(p2));

  std::vector<std::int32_t> y = {3, 1, 4, 1, 5};
  const std::string p3 = temp_path("rt.idx1");
  ib::write_idx_labels(p3, y);
  CHECK(ib::load_idx_labels(p3).y == y);
}

TEST_CASE("malformed files are data errors") {
  SUBCASE("missing file") {
    CHECK_THROWS_AS(ib::load_idx_images(temp_path("nope.idx3")), ib::DataError);
    CHECK_THROWS_AS(ib::load_idx_labels(temp_path("nope.idx1")), ib::DataError);
  }

  SUBCASE("wrong magic") {
    std::vector<unsigned char> file;
    push_be32(file, 0x801);  // label magic in an image file
    push_be32(file, 1);
    push_be32(file, 1);
    push_be32(file, 1);
    file.push_back(0);
    const std::string path = temp_path("magic.idx3");
    write_bytes(path, file);
    CHECK_THROWS_AS(ib::load_idx_images(path), ib::DataError);
  }

  SUBCASE("truncated pixel payload") {
    std::vector<unsigned char> file;
    push_be32(file, 0x803);
    push_be32(file, 2);
    push_be32(file, 2);
    push_be32(file, 2);
    file.push_back(0);  // needs 8 pixel bytes, has 1
    const std::string path = temp_path("trunc.idx3");
    write_bytes(path, file);
    CHECK_THROWS_AS(ib::load_idx_images(path), ib::DataError);
  }

  SUBCASE("truncated header") {
    const std::string path = temp_path("short.idx1");
    write_bytes(path, {0x00, 0x00, 0x08});
    CHECK_THROWS_AS(ib::load_idx_labels(path), ib::DataError);
  }
}

TEST_CASE("writer rejects out-of-range pixels") {
  Tensor bad = Tensor::from({1, 2}, std::vector<double>{0.5, 1.5});
  CHECK_THROWS_AS(ib::write_idx_images(temp_path("bad.idx3"), bad, 1, 2),
                  ib::ContractError);
}
