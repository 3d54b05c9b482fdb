#include "vpfd/adam.hpp"

#include <cmath>

namespace vpfd::nn {

Adam::Adam(std::vector<Param*> params, AdamConfig cfg) : params_(std::move(params)), cfg_(cfg) {
  slots_.resize(params_.size());
  for (size_t i = 0; i < params_.size(); ++i) {
    slots_[i].m = Tensor::zeros(params_[i]->value.shape);
    slots_[i].v = Tensor::zeros(params_[i]->value.shape);
  }
}

void Adam::step() {
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (size_t i = 0; i < params_.size(); ++i) {
    Param& p = *params_[i];
    if (p.grad.numel() != p.value.numel()) {
      // no gradient reached this parameter this step
      p.grad = Tensor::zeros(p.value.shape);
    }
    Slot& s = slots_[i];
    for (Index k = 0; k < p.value.numel(); ++k) {
      const double g = p.grad.at(k);
      s.m.at(k) = cfg_.beta1 * s.m.at(k) + (1.0 - cfg_.beta1) * g;
      s.v.at(k) = cfg_.beta2 * s.v.at(k) + (1.0 - cfg_.beta2) * g * g;
      const double mhat = s.m.at(k) / bc1;
      const double vhat = s.v.at(k) / bc2;
      p.value.at(k) -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
    }
    p.grad.fill(0.0);
  }
}

void Adam::zero_grad() {
  for (Param* p : params_) {
    if (p->grad.numel() != p->value.numel()) p->grad = Tensor::zeros(p->value.shape);
    p->grad.fill(0.0);
  }
}

}  // namespace vpfd::nn
