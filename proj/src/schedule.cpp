#include "vpfd/schedule.hpp"

#include <cmath>
#include <stdexcept>

#include "vpfd/errors.hpp"

namespace vpfd {

void NoiseSchedule::check_t(nn::Index t) const {
  if (t < 1 || t > steps()) {
    throw std::out_of_range("diffusion step t=" + std::to_string(t) + " outside 1.." + std::to_string(steps()));
  }
}

NoiseSchedule make_schedule(nn::Index T, double beta_start, double beta_end) {
  if (T < 1) throw ConfigError("schedule: T must be >= 1");
  if (!(beta_start > 0 && beta_start <= beta_end && beta_end < 1)) {
    throw ConfigError("schedule: need 0 < beta_start <= beta_end < 1");
  }
  NoiseSchedule s;
  s.beta.resize(static_cast<size_t>(T));
  s.alpha.resize(static_cast<size_t>(T));
  s.alpha_bar.resize(static_cast<size_t>(T));
  double prod = 1.0;
  for (nn::Index i = 0; i < T; ++i) {
    const double frac = T == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(T - 1);
    const double b = beta_start + (beta_end - beta_start) * frac;
    s.beta[static_cast<size_t>(i)] = b;
    s.alpha[static_cast<size_t>(i)] = 1.0 - b;
    prod *= 1.0 - b;
    s.alpha_bar[static_cast<size_t>(i)] = prod;
  }
  return s;
}

namespace {

void check_shapes(const nn::Tensor& a, const nn::Tensor& b, const char* op) {
  if (!a.same_shape(b)) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch " + a.shape_str() + " vs " + b.shape_str());
  }
}

}  // namespace

nn::Tensor diffuse(const nn::Tensor& x0, const std::vector<nn::Index>& t, const nn::Tensor& eps,
                   const NoiseSchedule& sched) {
  check_shapes(x0, eps, "diffuse");
  const nn::Index N = x0.dim(0);
  if (static_cast<nn::Index>(t.size()) != N) throw std::invalid_argument("diffuse: t size mismatch");
  const nn::Index per = x0.numel() / N;
  nn::Tensor out = x0;
  for (nn::Index n = 0; n < N; ++n) {
    sched.check_t(t[static_cast<size_t>(n)]);
    const double ab = sched.alpha_bar_at(t[static_cast<size_t>(n)]);
    const double a = std::sqrt(ab);
    const double b = std::sqrt(1.0 - ab);
    double* o = out.ptr() + n * per;
    const double* e = eps.ptr() + n * per;
    for (nn::Index i = 0; i < per; ++i) o[i] = a * o[i] + b * e[i];
  }
  return out;
}

nn::Tensor diffuse(const nn::Tensor& x0, nn::Index t, const nn::Tensor& eps, const NoiseSchedule& sched) {
  return diffuse(x0, std::vector<nn::Index>(static_cast<size_t>(x0.dim(0)), t), eps, sched);
}

nn::Tensor reverse_mu(const nn::Tensor& x_t, const std::vector<nn::Index>& t, const nn::Tensor& eps_pred,
                      const NoiseSchedule& sched) {
  check_shapes(x_t, eps_pred, "reverse_mu");
  const nn::Index N = x_t.dim(0);
  if (static_cast<nn::Index>(t.size()) != N) throw std::invalid_argument("reverse_mu: t size mismatch");
  const nn::Index per = x_t.numel() / N;
  nn::Tensor out = x_t;
  for (nn::Index n = 0; n < N; ++n) {
    sched.check_t(t[static_cast<size_t>(n)]);
    const double a = sched.alpha_at(t[static_cast<size_t>(n)]);
    const double ab = sched.alpha_bar_at(t[static_cast<size_t>(n)]);
    const double coef = (1.0 - a) / std::sqrt(1.0 - ab);
    const double inv = 1.0 / std::sqrt(a);
    double* o = out.ptr() + n * per;
    const double* e = eps_pred.ptr() + n * per;
    for (nn::Index i = 0; i < per; ++i) o[i] = inv * (o[i] - coef * e[i]);
  }
  return out;
}

nn::Tensor reverse_mu(const nn::Tensor& x_t, nn::Index t, const nn::Tensor& eps_pred,
                      const NoiseSchedule& sched) {
  return reverse_mu(x_t, std::vector<nn::Index>(static_cast<size_t>(x_t.dim(0)), t), eps_pred, sched);
}

std::vector<nn::Index> strided_steps(nn::Index t_start, nn::Index n_steps) {
  if (n_steps < 1 || t_start < 1) throw std::invalid_argument("strided_steps: bad arguments");
  if (n_steps > t_start) n_steps = t_start;
  std::vector<nn::Index> steps;
  // the subset always ends at t = 1, where the reverse mean collapses onto
  // the clean signal; a single-step subset is just {1}
  if (n_steps == 1) {
    steps.push_back(1);
    return steps;
  }
  for (nn::Index k = 0; k < n_steps; ++k) {
    const double frac = static_cast<double>(k) / static_cast<double>(n_steps - 1);
    nn::Index t = t_start - static_cast<nn::Index>(std::llround(frac * static_cast<double>(t_start - 1)));
    if (!steps.empty() && t >= steps.back()) t = steps.back() - 1;
    if (t < 1) t = 1;
    steps.push_back(t);
  }
  steps.back() = 1;
  return steps;
}

}  // namespace vpfd
