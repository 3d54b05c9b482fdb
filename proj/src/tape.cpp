#include "vpfd/tape.hpp"

#include <stdexcept>

namespace vpfd::nn {

Var Tape::leaf(const Tensor& value, Tensor* sink, bool requires_grad) {
  Node n;
  n.value = value;
  n.requires_grad = requires_grad;
  n.sink = requires_grad ? sink : nullptr;
  nodes_.push_back(std::move(n));
  return Var{this, static_cast<int>(nodes_.size()) - 1};
}

Var Tape::node(Tensor value, std::vector<int> parents, std::function<void(Tape&, int)> bwd) {
  bool req = false;
  for (int p : parents) {
    if (p >= 0 && nodes_[static_cast<size_t>(p)].requires_grad) req = true;
  }
  Node n;
  n.value = std::move(value);
  n.requires_grad = req;
  if (req) n.bwd = std::move(bwd);
  nodes_.push_back(std::move(n));
  return Var{this, static_cast<int>(nodes_.size()) - 1};
}

Tensor& Tape::grad(int id) {
  Node& n = nodes_[static_cast<size_t>(id)];
  if (!n.grad_alloc) {
    n.grad = Tensor::zeros(n.value.shape);
    n.grad_alloc = true;
  }
  return n.grad;
}

void Tape::backward(Var root) {
  if (!root.valid() || root.tape != this) throw std::logic_error("backward: invalid root");
  const Node& r = nodes_[static_cast<size_t>(root.id)];
  if (r.value.numel() != 1) throw std::logic_error("backward: root must be scalar");
  if (!r.requires_grad) return;

  grad(root.id).data[0] = 1.0;
  for (int i = root.id; i >= 0; --i) {
    Node& n = nodes_[static_cast<size_t>(i)];
    if (!n.grad_alloc) continue;
    if (n.bwd) n.bwd(*this, i);
    if (n.sink != nullptr) {
      Tensor& s = *n.sink;
      if (s.shape != n.grad.shape) s = Tensor::zeros(n.grad.shape);
      for (Index k = 0; k < n.grad.numel(); ++k) s.data[static_cast<size_t>(k)] += n.grad.data[static_cast<size_t>(k)];
    }
  }
}

}  // namespace vpfd::nn
