#include "vpfd/fft.hpp"

#include <cmath>
#include <stdexcept>

namespace vpfd {

Fft::Fft(nn::Index n) : n_(n) {
  if (!is_power_of_two(n)) throw std::invalid_argument("fft: size must be a power of two");
  bitrev_.resize(static_cast<size_t>(n));
  for (nn::Index i = 1, j = 0; i < n; ++i) {
    nn::Index bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    bitrev_[static_cast<size_t>(i)] = j;
  }
  // stage twiddles packed consecutively: len = 2, 4, ..., n
  for (nn::Index len = 2; len <= n; len <<= 1) {
    for (nn::Index k = 0; k < len / 2; ++k) {
      const double ang = 2.0 * M_PI * static_cast<double>(k) / static_cast<double>(len);
      twiddle_fwd_.emplace_back(std::cos(ang), -std::sin(ang));
      twiddle_inv_.emplace_back(std::cos(ang), std::sin(ang));
    }
  }
}

void Fft::run(std::complex<double>* a, bool inverse) const {
  const nn::Index n = n_;
  for (nn::Index i = 1; i < n; ++i) {
    const nn::Index j = bitrev_[static_cast<size_t>(i)];
    if (i < j) std::swap(a[i], a[j]);
  }
  const std::complex<double>* tw = inverse ? twiddle_inv_.data() : twiddle_fwd_.data();
  size_t toff = 0;
  for (nn::Index len = 2; len <= n; len <<= 1) {
    const nn::Index half = len / 2;
    for (nn::Index i = 0; i < n; i += len) {
      for (nn::Index k = 0; k < half; ++k) {
        const std::complex<double> u = a[i + k];
        const std::complex<double> v = a[i + k + half] * tw[toff + static_cast<size_t>(k)];
        a[i + k] = u + v;
        a[i + k + half] = u - v;
      }
    }
    toff += static_cast<size_t>(half);
  }
  if (inverse) {
    const double invn = 1.0 / static_cast<double>(n);
    for (nn::Index i = 0; i < n; ++i) a[i] *= invn;
  }
}

void fft_inplace(std::complex<double>* a, nn::Index n, bool inverse) {
  const Fft plan(n);
  if (inverse) {
    plan.inverse(a);
  } else {
    plan.forward(a);
  }
}

}  // namespace vpfd
