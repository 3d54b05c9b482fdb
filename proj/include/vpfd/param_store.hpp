#pragma once

#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "vpfd/tape.hpp"
#include "vpfd/tensor.hpp"

namespace vpfd::nn {

struct Param {
  std::string name;
  Tensor value;
  Tensor grad;  // accumulated by Tape::backward, consumed by the optimizer
};

// Named parameter set with stable (insertion) iteration order; ordering is
// part of the determinism contract for init, optimizer state, and checkpoints.
class ParamStore {
 public:
  Param& create(const std::string& name, std::vector<Index> shape);
  Param& at(const std::string& name);
  const Param& at(const std::string& name) const;
  bool has(const std::string& name) const { return index_.count(name) != 0; }

  std::vector<Param*> all();
  std::vector<const Param*> all() const;

  Index total_values() const;
  size_t size() const { return params_.size(); }

  // Copies values from `other` for every name present here; missing names are
  // an error. Used for student init and checkpoint restore.
  void copy_values_from(const ParamStore& other);

 private:
  std::vector<std::unique_ptr<Param>> params_;
  std::unordered_map<std::string, size_t> index_;
};

// Leaf bound to a parameter; gradient accumulates into p.grad when trainable.
inline Var use_param(Tape& t, Param& p, bool trainable) {
  return t.leaf(p.value, trainable ? &p.grad : nullptr, trainable);
}

}  // namespace vpfd::nn
