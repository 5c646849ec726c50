#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "ib/tensor.hpp"

namespace ib {

// Gradient contributions for a node's attached inputs, in recording order.
using BackwardFn = std::function<std::vector<Tensor>(const Tensor& out_grad)>;

// Explicit reverse-mode tape. The caller owns it and its lifetime scopes the
// graph: ops record a node when at least one input is attached, capturing
// whatever forward values their backward needs.
//
// Single-shot by default: after backward() the tape is finished and recording
// or running backward again is a contract error until reset(). reset() starts
// a new generation; tensors attached to the previous generation are rejected
// if used again (stamped with a generation counter).
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Register a detached tensor as a differentiable leaf.
  Tensor var(const Tensor& value);

  // Used by ops. `inputs` lists node ids of the attached inputs.
  std::int64_t record(std::vector<std::int64_t> inputs, BackwardFn fn);

  // Reverse sweep from a scalar loss recorded on this tape. Nodes not
  // reachable from the loss keep no gradient.
  void backward(const Tensor& loss);

  bool completed() const { return completed_; }
  std::size_t num_nodes() const { return nodes_.size(); }
  std::uint32_t generation() const { return generation_; }

  // Gradient access after backward(). has_grad() is false for tensors in
  // subgraphs the loss does not depend on.
  bool has_grad(const Tensor& t) const;
  Tensor grad(const Tensor& t) const;

  void reset();

  // Validates that an attached tensor belongs to this tape and generation.
  void check_tensor(const Tensor& t) const;

 private:
  struct Node {
    std::vector<std::int64_t> inputs;
    BackwardFn backward;  // null for leaves
  };

  std::vector<Node> nodes_;
  std::vector<Tensor> grads_;
  bool completed_ = false;
  std::uint32_t generation_ = 0;
};

// Resolves the common tape of a set of op inputs: the unique tape among the
// attached ones (validated), or nullptr when every input is detached (pure
// evaluation, nothing recorded).
Tape* common_tape(std::initializer_list<const Tensor*> inputs);

}  // namespace ib
