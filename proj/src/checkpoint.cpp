#include "ib/checkpoint.hpp"

#include <fstream>

#include "json.hpp"

#include "ib/errors.hpp"

namespace ib {

namespace {

using nlohmann::json;

json arch_to_json(const Architecture& a) {
  return json{{"kind", model_kind_name(a.kind)},
              {"input_dim", a.input_dim},
              {"hidden", a.hidden},
              {"bottleneck", a.bottleneck},
              {"num_classes", a.num_classes},
              {"rescale_input", a.rescale_input},
              {"dtype", dtype_name(a.dtype)}};
}

Architecture arch_from_json(const json& j) {
  Architecture a;
  a.kind = model_kind_from_name(j.at("kind").get<std::string>());
  a.input_dim = j.at("input_dim").get<std::int64_t>();
  a.hidden = j.at("hidden").get<std::vector<std::int64_t>>();
  a.bottleneck = j.at("bottleneck").get<std::int64_t>();
  a.num_classes = j.at("num_classes").get<std::int64_t>();
  a.rescale_input = j.at("rescale_input").get<bool>();
  std::string dt = j.at("dtype").get<std::string>();
  if (dt != "f64" && dt != "f32") throw DataError("checkpoint: unknown dtype " + dt);
  a.dtype = dt == "f64" ? DType::f64 : DType::f32;
  return a;
}

void append_params(std::ofstream& out, const std::vector<Tensor>& params) {
  for (const Tensor& p : params) {
    Tensor p64 = p.dtype() == DType::f64 ? p : p.astype(DType::f64);
    auto v = p64.f64();
    out.write(reinterpret_cast<const char*>(v.data()),
              static_cast<std::streamsize>(v.size() * sizeof(double)));
  }
}

std::int64_t total_numel(const std::vector<Shape>& shapes) {
  std::int64_t n = 0;
  for (const auto& s : shapes) n += shape_numel(s);
  return n;
}

}  // namespace

void save_checkpoint(const std::string& base, const Model& model,
                     const std::vector<Tensor>* raw_params,
                     const CheckpointMeta& meta) {
  validate_model(model);
  json j;
  j["format"] = 1;
  j["arch"] = arch_to_json(model.arch);
  j["beta"] = model.beta;
  j["rho"] = model.rho;
  j["samples"] = model.samples;
  j["seed"] = meta.seed;
  j["epochs"] = meta.epochs;
  j["std_acc"] = meta.std_acc;
  j["polyak"] = meta.polyak;
  j["dataset"] = meta.dataset;
  j["dataset_fingerprint"] = meta.dataset_fingerprint;
  j["has_raw"] = raw_params != nullptr;
  j["param_count"] = total_numel(param_shapes(model.arch));

  std::ofstream bin(base + ".bin", std::ios::binary | std::ios::trunc);
  if (!bin) throw DataError("cannot write " + base + ".bin");
  append_params(bin, model.params);
  if (raw_params) {
    if (raw_params->size() != model.params.size())
      throw ContractError("checkpoint: raw parameter count mismatch");
    append_params(bin, *raw_params);
  }
  if (!bin) throw DataError("failed writing " + base + ".bin");
  bin.close();

  std::ofstream meta_out(base + ".json", std::ios::binary | std::ios::trunc);
  if (!meta_out) throw DataError("cannot write " + base + ".json");
  meta_out << j.dump(2) << "\n";
}

LoadedCheckpoint load_checkpoint(const std::string& base) {
  std::ifstream meta_in(base + ".json");
  if (!meta_in) throw DataError("cannot open " + base + ".json");
  json j;
  try {
    meta_in >> j;
  } catch (const json::exception& e) {
    throw DataError(base + ".json: invalid json: " + e.what());
  }

  LoadedCheckpoint out;
  try {
    out.model.arch = arch_from_json(j.at("arch"));
    out.model.beta = j.at("beta").get<double>();
    out.model.rho = j.at("rho").get<double>();
    out.model.samples = j.at("samples").get<int>();
    out.meta.seed = j.at("seed").get<std::uint64_t>();
    out.meta.epochs = j.at("epochs").get<std::int64_t>();
    out.meta.std_acc = j.at("std_acc").get<double>();
    out.meta.polyak = j.at("polyak").get<bool>();
    out.meta.dataset = j.value("dataset", std::string());
    out.meta.dataset_fingerprint = j.value("dataset_fingerprint", std::uint64_t(0));
  } catch (const json::exception& e) {
    throw DataError(base + ".json: missing or bad field: " + e.what());
  }

  auto shapes = param_shapes(out.model.arch);
  std::int64_t numel = total_numel(shapes);
  if (j.at("param_count").get<std::int64_t>() != numel)
    throw DataError(base + ".json: param_count does not match the architecture");
  bool has_raw = j.at("has_raw").get<bool>();

  std::ifstream bin(base + ".bin", std::ios::binary);
  if (!bin) throw DataError("cannot open " + base + ".bin");
  bin.seekg(0, std::ios::end);
  auto bytes = static_cast<std::int64_t>(bin.tellg());
  bin.seekg(0, std::ios::beg);
  std::int64_t expected = numel * (has_raw ? 2 : 1) * static_cast<std::int64_t>(sizeof(double));
  if (bytes != expected)
    throw DataError(base + ".bin: expected " + std::to_string(expected) +
                    " bytes, got " + std::to_string(bytes));

  auto read_set = [&]() {
    std::vector<Tensor> params;
    for (const Shape& s : shapes) {
      std::vector<double> v(static_cast<std::size_t>(shape_numel(s)));
      bin.read(reinterpret_cast<char*>(v.data()),
               static_cast<std::streamsize>(v.size() * sizeof(double)));
      if (!bin) throw DataError(base + ".bin: short read");
      Tensor t = Tensor::from(s, std::move(v));
      params.push_back(out.model.arch.dtype == DType::f64 ? t : t.astype(DType::f32));
    }
    return params;
  };

  out.model.params = read_set();
  if (has_raw) out.raw_params = read_set();
  validate_model(out.model);
  return out;
}

}  // namespace ib
