#pragma once

#include <vector>

#include "vpfd/param_store.hpp"

namespace vpfd::nn {

struct AdamConfig {
  double lr = 2e-4;
  double beta1 = 0.5;
  double beta2 = 0.9;
  double eps = 1e-8;
};

// Adam over an explicit parameter list. step() consumes and zeroes the
// accumulated gradients. Parameters not handed to any optimizer keep their
// values untouched, which is how the freeze contract is realized.
class Adam {
 public:
  Adam(std::vector<Param*> params, AdamConfig cfg);

  void step();
  void zero_grad();

 private:
  struct Slot {
    Tensor m, v;
  };
  std::vector<Param*> params_;
  std::vector<Slot> slots_;
  AdamConfig cfg_;
  long long t_ = 0;
};

}  // namespace vpfd::nn
