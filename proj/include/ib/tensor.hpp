#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "ib/errors.hpp"

namespace ib {

class Tape;

enum class DType { f64, f32 };

const char* dtype_name(DType dt);

using Shape = std::vector<std::int64_t>;

std::string shape_str(const Shape& s);
std::int64_t shape_numel(const Shape& s);

// Dense row-major tensor. Value semantics with shared immutable storage:
// copies are cheap, ops never mutate their inputs, and the only mutation path
// (`mut_f64`/`mut_f32`, used by optimizers) is copy-on-write.
//
// A tensor is either detached (plain data) or attached to a Tape node, in
// which case ops consuming it record backward closures on that tape. Mixing
// tensors attached to two different tapes in one op is a contract error.
class Tensor {
 public:
  using StorageData = std::variant<std::vector<double>, std::vector<float>>;

  Tensor() = default;

  static Tensor zeros(Shape shape, DType dt = DType::f64);
  static Tensor full(Shape shape, double value, DType dt = DType::f64);
  static Tensor from(Shape shape, std::vector<double> values);  // f64
  static Tensor from(Shape shape, std::vector<float> values);   // f32
  static Tensor scalar(double value, DType dt = DType::f64);    // rank-0

  bool defined() const { return storage_ != nullptr; }
  const Shape& shape() const { return shape_; }
  std::int64_t dim(std::size_t i) const { return shape_.at(i); }
  std::size_t rank() const { return shape_.size(); }
  std::int64_t size() const;
  DType dtype() const;

  bool attached() const { return tape_ != nullptr; }
  Tape* tape() const { return tape_; }
  std::int64_t node() const { return node_; }
  std::uint32_t tape_gen() const { return tape_gen_; }

  // Flat element read, converting to double. Slow path; use spans in kernels.
  double at(std::int64_t i) const;

  std::span<const double> f64() const;  // requires dtype()==f64
  std::span<const float> f32() const;   // requires dtype()==f32

  // Copy-on-write mutable access. Only allowed on detached tensors.
  std::span<double> mut_f64();
  std::span<float> mut_f32();

  std::vector<double> to_vector() const;  // converts f32 -> double if needed

  Tensor detached() const;      // same storage, no tape
  Tensor clone() const;         // deep copy, detached
  Tensor astype(DType dt) const;
  Tensor reshaped(Shape shape) const;  // same storage, numel must match

  // Used by Tape/ops when recording results.
  Tensor with_tape(Tape* tape, std::int64_t node, std::uint32_t gen) const;

 private:
  struct Storage {
    StorageData data;
  };

  Tensor(Shape shape, std::shared_ptr<Storage> storage)
      : shape_(std::move(shape)), storage_(std::move(storage)) {}

  void ensure_defined() const;
  void ensure_unique();

  Shape shape_;
  std::shared_ptr<Storage> storage_;
  Tape* tape_ = nullptr;
  std::int64_t node_ = -1;
  std::uint32_t tape_gen_ = 0;
};

}  // namespace ib
