#include "ib/tape.hpp"

#include <algorithm>

namespace ib {

namespace {

// Accumulate g into acc (same shape/dtype). First contribution just shares.
void accumulate(Tensor& acc, const Tensor& g) {
  if (!acc.defined()) {
    acc = g;
    return;
  }
  if (acc.shape() != g.shape())
    throw ContractError("gradient accumulation shape mismatch " +
                        shape_str(acc.shape()) + " vs " + shape_str(g.shape()));
  if (acc.dtype() != g.dtype())
    throw ContractError("gradient accumulation dtype mismatch");
  if (acc.dtype() == DType::f64) {
    auto a = acc.f64();
    auto b = g.f64();
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
    acc = Tensor::from(acc.shape(), std::move(out));
  } else {
    auto a = acc.f32();
    auto b = g.f32();
    std::vector<float> out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
    acc = Tensor::from(acc.shape(), std::move(out));
  }
}

}  // namespace

Tensor Tape::var(const Tensor& value) {
  if (!value.defined()) throw ContractError("var: undefined tensor");
  if (value.attached()) throw ContractError("var: tensor is already attached");
  if (completed_) throw ContractError("var: tape finished; call reset() first");
  std::int64_t id = record({}, nullptr);
  return value.with_tape(this, id, generation_);
}

std::int64_t Tape::record(std::vector<std::int64_t> inputs, BackwardFn fn) {
  if (completed_)
    throw ContractError("record: tape finished; call reset() before reuse");
  for (std::int64_t in : inputs)
    if (in < 0 || in >= static_cast<std::int64_t>(nodes_.size()))
      throw ContractError("record: input node id out of range");
  nodes_.push_back(Node{std::move(inputs), std::move(fn)});
  return static_cast<std::int64_t>(nodes_.size()) - 1;
}

void Tape::check_tensor(const Tensor& t) const {
  if (!t.attached()) throw ContractError("tensor is not attached to a tape");
  if (t.tape() != this) throw ContractError("tensor belongs to a different tape");
  if (t.tape_gen() != generation_)
    throw ContractError("tensor is from a previous tape generation (after reset)");
  if (t.node() < 0 || t.node() >= static_cast<std::int64_t>(nodes_.size()))
    throw ContractError("tensor references an unknown tape node");
}

void Tape::backward(const Tensor& loss) {
  if (completed_)
    throw ContractError("backward: already ran on this tape; call reset()");
  check_tensor(loss);
  if (loss.size() != 1)
    throw ContractError("backward: loss must be a scalar, got shape " +
                        shape_str(loss.shape()));

  const std::size_t n = nodes_.size();
  grads_.assign(n, Tensor{});

  // Ancestor set of the loss node.
  std::vector<char> reach(n, 0);
  std::vector<std::int64_t> stack{loss.node()};
  reach[static_cast<std::size_t>(loss.node())] = 1;
  while (!stack.empty()) {
    std::int64_t id = stack.back();
    stack.pop_back();
    for (std::int64_t in : nodes_[static_cast<std::size_t>(id)].inputs) {
      if (!reach[static_cast<std::size_t>(in)]) {
        reach[static_cast<std::size_t>(in)] = 1;
        stack.push_back(in);
      }
    }
  }

  grads_[static_cast<std::size_t>(loss.node())] =
      Tensor::full(loss.shape(), 1.0, loss.dtype());

  // Recording order is a topological order, so one reverse pass suffices.
  for (std::int64_t id = loss.node(); id >= 0; --id) {
    auto uid = static_cast<std::size_t>(id);
    if (!reach[uid] || !grads_[uid].defined() || !nodes_[uid].backward) continue;
    std::vector<Tensor> contribs = nodes_[uid].backward(grads_[uid]);
    const auto& ins = nodes_[uid].inputs;
    if (contribs.size() != ins.size())
      throw ContractError("backward closure returned wrong number of gradients");
    for (std::size_t j = 0; j < ins.size(); ++j) {
      if (!contribs[j].defined()) continue;  // declared non-differentiable input
      accumulate(grads_[static_cast<std::size_t>(ins[j])], contribs[j]);
    }
  }
  completed_ = true;
}

bool Tape::has_grad(const Tensor& t) const {
  check_tensor(t);
  if (!completed_) throw ContractError("has_grad: backward has not run");
  return grads_[static_cast<std::size_t>(t.node())].defined();
}

Tensor Tape::grad(const Tensor& t) const {
  if (!has_grad(t))
    throw ContractError(
        "grad: no gradient for this tensor (loss does not depend on it)");
  return grads_[static_cast<std::size_t>(t.node())];
}

void Tape::reset() {
  nodes_.clear();
  grads_.clear();
  completed_ = false;
  ++generation_;
}

Tape* common_tape(std::initializer_list<const Tensor*> inputs) {
  Tape* tape = nullptr;
  for (const Tensor* t : inputs) {
    if (!t->attached()) continue;
    t->tape()->check_tensor(*t);
    if (tape && tape != t->tape())
      throw ContractError("op inputs belong to different tapes");
    tape = t->tape();
  }
  return tape;
}

}  // namespace ib
