#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "ib/checkpoint.hpp"
#include "ib/errors.hpp"
#include "ib/model.hpp"

namespace fs = std::filesystem;
using ib::Model;
using ib::Tensor;

namespace {

fs::path scratch() {
  fs::path dir = fs::temp_directory_path() / "ib_ckpt_tests";
  fs::create_directories(dir);
  return dir;
}

Model sample_model() {
  Model m;
  m.arch.kind = ib::ModelKind::vib;
  m.arch.input_dim = 4;
  m.arch.hidden = {8};
  m.arch.bottleneck = 3;
  m.arch.num_classes = 2;
  m.beta = 0.7;
  m.rho = 1.5;
  m.samples = 7;
  m.params = ib::init_params(m.arch, ib::InitScheme::xavier_uniform, 9);
  return m;
}

ib::CheckpointMeta sample_meta() {
  ib::CheckpointMeta meta;
  meta.seed = 42;
  meta.epochs = 17;
  meta.std_acc = 0.925;
  meta.polyak = true;
  meta.dataset = "toy-ours";
  meta.dataset_fingerprint = 0xDEADBEEFCAFEF00Dull;
  return meta;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void check_params_equal(const std::vector<Tensor>& a, const std::vector<Tensor>& b) {
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    REQUIRE(a[i].shape() == b[i].shape());
    for (std::int64_t k = 0; k < a[i].size(); ++k) CHECK(a[i].at(k) == b[i].at(k));
  }
}

}  // namespace

TEST_CASE("checkpoints round-trip parameters, raw iterate, and metadata") {
  Model m = sample_model();
  std::vector<Tensor> raw = ib::init_params(m.arch, ib::InitScheme::xavier_uniform, 10);
  const std::string base = (scratch() / "roundtrip").string();

  ib::save_checkpoint(base, m, &raw, sample_meta());
  ib::LoadedCheckpoint lc = ib::load_checkpoint(base);

  CHECK(lc.model.arch.kind == ib::ModelKind::vib);
  CHECK(lc.model.arch.input_dim == 4);
  CHECK(lc.model.arch.hidden == std::vector<std::int64_t>{8});
  CHECK(lc.model.arch.bottleneck == 3);
  CHECK(lc.model.arch.num_classes == 2);
  CHECK(lc.model.beta == 0.7);
  CHECK(lc.model.rho == 1.5);
  CHECK(lc.model.samples == 7);
  check_params_equal(lc.model.params, m.params);
  REQUIRE(lc.raw_params.has_value());
  check_params_equal(*lc.raw_params, raw);

  CHECK(lc.meta.seed == 42);
  CHECK(lc.meta.epochs == 17);
  CHECK(lc.meta.std_acc == 0.925);
  CHECK(lc.meta.polyak);
  CHECK(lc.meta.dataset == "toy-ours");
  CHECK(lc.meta.dataset_fingerprint == 0xDEADBEEFCAFEF00Dull);
}

TEST_CASE("a checkpoint without a raw iterate loads an empty optional") {
  Model m = sample_model();
  const std::string base = (scratch() / "noraw").string();
  ib::save_checkpoint(base, m, nullptr, sample_meta());
  ib::LoadedCheckpoint lc = ib::load_checkpoint(base);
  CHECK_FALSE(lc.raw_params.has_value());
  check_params_equal(lc.model.params, m.params);
}

TEST_CASE("float32 checkpoints preserve dtype and exact values") {
  Model m;
  m.arch.kind = ib::ModelKind::det;
  m.arch.input_dim = 3;
  m.arch.hidden = {5};
  m.arch.num_classes = 2;
  m.arch.dtype = ib::DType::f32;
  m.params = ib::init_params(m.arch, ib::InitScheme::xavier_uniform, 3);

  const std::string base = (scratch() / "f32").string();
  ib::save_checkpoint(base, m, nullptr, sample_meta());
  ib::LoadedCheckpoint lc = ib::load_checkpoint(base);
  CHECK(lc.model.arch.dtype == ib::DType::f32);
  for (std::size_t i = 0; i < m.params.size(); ++i) CHECK(lc.model.params[i].dtype() == ib::DType::f32);
  check_params_equal(lc.model.params, m.params);
}

TEST_CASE("saving the same model twice produces byte-identical files") {
  Model m = sample_model();
  std::vector<Tensor> raw = m.params;
  const std::string a = (scratch() / "dup_a").string();
  const std::string b = (scratch() / "dup_b").string();
  ib::save_checkpoint(a, m, &raw, sample_meta());
  ib::save_checkpoint(b, m, &raw, sample_meta());
  CHECK(read_file(a + ".bin") == read_file(b + ".bin"));
  CHECK(read_file(a + ".json") == read_file(b + ".json"));
}

TEST_CASE("loader rejects damaged or missing checkpoint files") {
  Model m = sample_model();
  const fs::path dir = scratch();

  SUBCASE("missing entirely") {
    CHECK_THROWS_AS(ib::load_checkpoint((dir / "never_saved").string()), ib::DataError);
  }

  SUBCASE("truncated blob") {
    const std::string base = (dir / "truncated").string();
    ib::save_checkpoint(base, m, nullptr, sample_meta());
    fs::resize_file(base + ".bin", fs::file_size(base + ".bin") - 8);
    CHECK_THROWS_AS(ib::load_checkpoint(base), ib::DataError);
  }

  SUBCASE("missing blob with intact metadata") {
    const std::string base = (dir / "noblob").string();
    ib::save_checkpoint(base, m, nullptr, sample_meta());
    fs::remove(base + ".bin");
    CHECK_THROWS_AS(ib::load_checkpoint(base), ib::DataError);
  }

  SUBCASE("unparseable metadata") {
    const std::string base = (dir / "badjson").string();
    ib::save_checkpoint(base, m, nullptr, sample_meta());
    std::ofstream(base + ".json", std::ios::trunc) << "{ this is not json";
    CHECK_THROWS_AS(ib::load_checkpoint(base), ib::DataError);
  }

  SUBCASE("metadata missing a required field") {
    const std::string base = (dir / "nofield").string();
    ib::save_checkpoint(base, m, nullptr, sample_meta());
    std::ofstream(base + ".json", std::ios::trunc) << "{\"format\":1}";
    CHECK_THROWS_AS(ib::load_checkpoint(base), ib::DataError);
  }

  SUBCASE("declared parameter count disagrees with the architecture") {
    const std::string base = (dir / "badcount").string();
    ib::save_checkpoint(base, m, nullptr, sample_meta());
    std::string j = read_file(base + ".json");
    const std::string key = "\"param_count\": ";
    auto pos = j.find(key);
    REQUIRE(pos != std::string::npos);
    j.insert(pos + key.size(), "9");  // prepend a digit: wrong but valid json
    std::ofstream(base + ".json", std::ios::trunc) << j;
    CHECK_THROWS_AS(ib::load_checkpoint(base), ib::DataError);
  }
}
