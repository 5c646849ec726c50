#include "ib/tensor.hpp"

#include <algorithm>

namespace ib {

const char* dtype_name(DType dt) { return dt == DType::f64 ? "f64" : "f32"; }

std::string shape_str(const Shape& s) {
  std::string out = "[";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(s[i]);
  }
  return out + "]";
}

std::int64_t shape_numel(const Shape& s) {
  std::int64_t n = 1;
  for (std::int64_t d : s) {
    if (d < 0) throw ContractError("negative dimension in shape " + shape_str(s));
    n *= d;
  }
  return n;
}

Tensor Tensor::zeros(Shape shape, DType dt) { return full(std::move(shape), 0.0, dt); }

Tensor Tensor::full(Shape shape, double value, DType dt) {
  std::int64_t n = shape_numel(shape);
  auto st = std::make_shared<Storage>();
  if (dt == DType::f64) {
    st->data = std::vector<double>(static_cast<std::size_t>(n), value);
  } else {
    st->data = std::vector<float>(static_cast<std::size_t>(n), static_cast<float>(value));
  }
  return Tensor(std::move(shape), std::move(st));
}

Tensor Tensor::from(Shape shape, std::vector<double> values) {
  if (shape_numel(shape) != static_cast<std::int64_t>(values.size()))
    throw ContractError("from: " + std::to_string(values.size()) +
                        " values for shape " + shape_str(shape));
  auto st = std::make_shared<Storage>();
  st->data = std::move(values);
  return Tensor(std::move(shape), std::move(st));
}

Tensor Tensor::from(Shape shape, std::vector<float> values) {
  if (shape_numel(shape) != static_cast<std::int64_t>(values.size()))
    throw ContractError("from: " + std::to_string(values.size()) +
                        " values for shape " + shape_str(shape));
  auto st = std::make_shared<Storage>();
  st->data = std::move(values);
  return Tensor(std::move(shape), std::move(st));
}

Tensor Tensor::scalar(double value, DType dt) { return full({}, value, dt); }

std::int64_t Tensor::size() const {
  ensure_defined();
  return shape_numel(shape_);
}

DType Tensor::dtype() const {
  ensure_defined();
  return std::holds_alternative<std::vector<double>>(storage_->data) ? DType::f64
                                                                     : DType::f32;
}

double Tensor::at(std::int64_t i) const {
  ensure_defined();
  if (i < 0 || i >= size())
    throw ContractError("at: index " + std::to_string(i) + " out of range for " +
                        shape_str(shape_));
  if (dtype() == DType::f64) return f64()[static_cast<std::size_t>(i)];
  return static_cast<double>(f32()[static_cast<std::size_t>(i)]);
}

std::span<const double> Tensor::f64() const {
  ensure_defined();
  auto* v = std::get_if<std::vector<double>>(&storage_->data);
  if (!v) throw ContractError("f64(): tensor is f32");
  return {v->data(), v->size()};
}

std::span<const float> Tensor::f32() const {
  ensure_defined();
  auto* v = std::get_if<std::vector<float>>(&storage_->data);
  if (!v) throw ContractError("f32(): tensor is f64");
  return {v->data(), v->size()};
}

std::span<double> Tensor::mut_f64() {
  ensure_defined();
  if (attached()) throw ContractError("mut_f64: tensor is attached to a tape");
  ensure_unique();
  auto* v = std::get_if<std::vector<double>>(&storage_->data);
  if (!v) throw ContractError("mut_f64: tensor is f32");
  return {v->data(), v->size()};
}

std::span<float> Tensor::mut_f32() {
  ensure_defined();
  if (attached()) throw ContractError("mut_f32: tensor is attached to a tape");
  ensure_unique();
  auto* v = std::get_if<std::vector<float>>(&storage_->data);
  if (!v) throw ContractError("mut_f32: tensor is f64");
  return {v->data(), v->size()};
}

std::vector<double> Tensor::to_vector() const {
  ensure_defined();
  if (dtype() == DType::f64) {
    auto s = f64();
    return {s.begin(), s.end()};
  }
  auto s = f32();
  return {s.begin(), s.end()};
}

Tensor Tensor::detached() const {
  ensure_defined();
  Tensor t(shape_, storage_);
  return t;
}

Tensor Tensor::clone() const {
  ensure_defined();
  auto st = std::make_shared<Storage>(*storage_);
  return Tensor(shape_, std::move(st));
}

Tensor Tensor::astype(DType dt) const {
  ensure_defined();
  if (dt == dtype()) return detached();
  auto st = std::make_shared<Storage>();
  if (dt == DType::f64) {
    auto s = f32();
    st->data = std::vector<double>(s.begin(), s.end());
  } else {
    auto s = f64();
    std::vector<float> v(s.size());
    std::transform(s.begin(), s.end(), v.begin(),
                   [](double d) { return static_cast<float>(d); });
    st->data = std::move(v);
  }
  return Tensor(shape_, std::move(st));
}

Tensor Tensor::reshaped(Shape shape) const {
  ensure_defined();
  if (shape_numel(shape) != size())
    throw ContractError("reshape: " + shape_str(shape_) + " -> " + shape_str(shape) +
                        " changes element count");
  if (attached())
    throw ContractError("reshape: only detached tensors can be reshaped");
  return Tensor(std::move(shape), storage_);
}

Tensor Tensor::with_tape(Tape* tape, std::int64_t node, std::uint32_t gen) const {
  ensure_defined();
  Tensor t(shape_, storage_);
  t.tape_ = tape;
  t.node_ = node;
  t.tape_gen_ = gen;
  return t;
}

void Tensor::ensure_defined() const {
  if (!storage_) throw ContractError("use of default-constructed tensor");
}

void Tensor::ensure_unique() {
  if (storage_.use_count() > 1) storage_ = std::make_shared<Storage>(*storage_);
}

}  // namespace ib
