#pragma once

#include <vector>

#include "vpfd/tensor.hpp"

namespace vpfd {

// Forward-process coefficients, index 0 holds step t = 1.
struct NoiseSchedule {
  std::vector<double> beta;
  std::vector<double> alpha;
  std::vector<double> alpha_bar;

  nn::Index steps() const { return static_cast<nn::Index>(beta.size()); }
  double beta_at(nn::Index t) const { return beta[static_cast<size_t>(t - 1)]; }
  double alpha_at(nn::Index t) const { return alpha[static_cast<size_t>(t - 1)]; }
  double alpha_bar_at(nn::Index t) const { return alpha_bar[static_cast<size_t>(t - 1)]; }
  void check_t(nn::Index t) const;
};

// Linear beta interpolation from beta_start to beta_end over T steps.
NoiseSchedule make_schedule(nn::Index T, double beta_start, double beta_end);

// x_t = sqrt(abar_t) x0 + sqrt(1 - abar_t) eps, per-item step indices.
nn::Tensor diffuse(const nn::Tensor& x0, const std::vector<nn::Index>& t, const nn::Tensor& eps,
                   const NoiseSchedule& sched);
nn::Tensor diffuse(const nn::Tensor& x0, nn::Index t, const nn::Tensor& eps, const NoiseSchedule& sched);

// mu = (x_t - (1 - a_t)/sqrt(1 - abar_t) * eps_pred) / sqrt(a_t)
nn::Tensor reverse_mu(const nn::Tensor& x_t, const std::vector<nn::Index>& t, const nn::Tensor& eps_pred,
                      const NoiseSchedule& sched);
nn::Tensor reverse_mu(const nn::Tensor& x_t, nn::Index t, const nn::Tensor& eps_pred,
                      const NoiseSchedule& sched);

// Evenly strided step subset from t_start down to 1, inclusive of both ends.
std::vector<nn::Index> strided_steps(nn::Index t_start, nn::Index n_steps);

}  // namespace vpfd
