#include "vpfd/stft.hpp"

#include <cmath>
#include <complex>
#include <stdexcept>

namespace vpfd {

namespace {
constexpr double kMagEps2 = 1e-24;  // inside sqrt; keeps the gradient finite at zero
}

std::vector<double> hann_window(nn::Index n) {
  std::vector<double> w(static_cast<size_t>(n));
  for (nn::Index i = 0; i < n; ++i) {
    w[static_cast<size_t>(i)] = 0.5 * (1.0 - std::cos(2.0 * M_PI * static_cast<double>(i) / static_cast<double>(n)));
  }
  return w;
}

nn::Index reflect_index(nn::Index i, nn::Index len) {
  while (i < 0 || i >= len) {
    if (i < 0) i = -i;
    if (i >= len) i = 2 * (len - 1) - i;
  }
  return i;
}

StftPlan::StftPlan(nn::Index fft, nn::Index hop_, nn::Index win, bool center_)
    : fft_size(fft), hop(hop_), win_length(win), center(center_) {
  if (!is_power_of_two(fft_size)) throw std::invalid_argument("stft: fft_size must be a power of two");
  if (!(hop > 0 && win_length > 0 && hop <= win_length && win_length <= fft_size)) {
    throw std::invalid_argument("stft: need 0 < hop <= win_length <= fft_size");
  }
  fft_plan = std::make_shared<const Fft>(fft_size);
  window.assign(static_cast<size_t>(fft_size), 0.0);
  const std::vector<double> h = hann_window(win_length);
  const nn::Index off = (fft_size - win_length) / 2;
  for (nn::Index i = 0; i < win_length; ++i) window[static_cast<size_t>(off + i)] = h[static_cast<size_t>(i)];
}

void StftPlan::magnitude(const double* x, nn::Index len, double* out) const {
  const nn::Index pad = center ? fft_size / 2 : 0;
  const nn::Index nframes = frames_for(len);
  const nn::Index nbins = bins();
  std::vector<std::complex<double>> buf(static_cast<size_t>(fft_size));
  for (nn::Index f = 0; f < nframes; ++f) {
    const nn::Index start = f * hop - pad;
    for (nn::Index i = 0; i < fft_size; ++i) {
      nn::Index idx = start + i;
      if (center) idx = reflect_index(idx, len);
      buf[static_cast<size_t>(i)] = {x[idx] * window[static_cast<size_t>(i)], 0.0};
    }
    fft_plan->forward(buf.data());
    for (nn::Index k = 0; k < nbins; ++k) {
      const std::complex<double> v = buf[static_cast<size_t>(k)];
      out[k * nframes + f] = std::sqrt(v.real() * v.real() + v.imag() * v.imag() + kMagEps2);
    }
  }
}

void StftPlan::magnitude_backward(const double* x, nn::Index len, const double* gmag, double* gx) const {
  const nn::Index pad = center ? fft_size / 2 : 0;
  const nn::Index nframes = frames_for(len);
  const nn::Index nbins = bins();
  std::vector<std::complex<double>> buf(static_cast<size_t>(fft_size));
  std::vector<std::complex<double>> spec(static_cast<size_t>(fft_size));
  for (nn::Index f = 0; f < nframes; ++f) {
    const nn::Index start = f * hop - pad;
    for (nn::Index i = 0; i < fft_size; ++i) {
      nn::Index idx = start + i;
      if (center) idx = reflect_index(idx, len);
      buf[static_cast<size_t>(i)] = {x[idx] * window[static_cast<size_t>(i)], 0.0};
    }
    fft_plan->forward(buf.data());
    // dL/d frame_n = w_n * Re(sum_k g_k conj(X_k)/|X_k| e^{-i 2 pi k n / N}),
    // evaluated for all n with one forward FFT of the one-sided coefficients.
    for (nn::Index k = 0; k < fft_size; ++k) spec[static_cast<size_t>(k)] = {0.0, 0.0};
    for (nn::Index k = 0; k < nbins; ++k) {
      const std::complex<double> v = buf[static_cast<size_t>(k)];
      const double m = std::sqrt(v.real() * v.real() + v.imag() * v.imag() + kMagEps2);
      spec[static_cast<size_t>(k)] = std::conj(v) * (gmag[k * nframes + f] / m);
    }
    fft_plan->forward(spec.data());
    for (nn::Index i = 0; i < fft_size; ++i) {
      const double g = spec[static_cast<size_t>(i)].real() * window[static_cast<size_t>(i)];
      if (g == 0.0) continue;
      nn::Index idx = start + i;
      if (center) idx = reflect_index(idx, len);
      if (idx >= 0 && idx < len) gx[idx] += g;
    }
  }
}

}  // namespace vpfd
