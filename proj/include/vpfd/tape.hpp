#pragma once

#include <deque>
#include <functional>
#include <vector>

#include "vpfd/tensor.hpp"

namespace vpfd::nn {

class Tape;

// Lightweight handle into a Tape. Invalid (default) handles are used for
// optional inputs such as a missing bias.
struct Var {
  Tape* tape = nullptr;
  int id = -1;
  bool valid() const { return tape != nullptr && id >= 0; }
};

// Reverse-mode autodiff over a per-step graph. Nodes are created in forward
// order; backward() sweeps them in reverse. All closures capture node ids,
// never pointers, so the node vector may reallocate while building.
//
// Gradients of leaves created with an external sink are *accumulated* into the
// sink tensor; callers (the optimizer) zero them between steps.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Leaf whose gradient is accumulated into *sink (may be null to discard).
  Var leaf(const Tensor& value, Tensor* sink, bool requires_grad);

  Var constant(Tensor value) { return leaf(value, nullptr, false); }
  Var constant_scalar(double v) { return constant(Tensor::scalar(v)); }

  // Internal node; `bwd` reads grad(self) and accumulates into parents.
  Var node(Tensor value, std::vector<int> parents, std::function<void(Tape&, int)> bwd);

  const Tensor& val(Var v) const { return nodes_[static_cast<size_t>(v.id)].value; }
  const Tensor& val(int id) const { return nodes_[static_cast<size_t>(id)].value; }

  bool requires_grad(Var v) const { return nodes_[static_cast<size_t>(v.id)].requires_grad; }
  bool requires_grad(int id) const { return nodes_[static_cast<size_t>(id)].requires_grad; }

  // Gradient buffer, allocated (zeroed) on first access during backward.
  Tensor& grad(int id);
  bool has_grad(int id) const { return nodes_[static_cast<size_t>(id)].grad_alloc; }

  // Root must be a scalar (numel == 1). Runs the reverse sweep and flushes
  // leaf gradients into their sinks.
  void backward(Var root);

  size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    bool grad_alloc = false;
    Tensor* sink = nullptr;
    std::function<void(Tape&, int)> bwd;
  };

  std::deque<Node> nodes_;
};

}  // namespace vpfd::nn
