#pragma once

#include <complex>
#include <memory>
#include <vector>

#include "vpfd/tensor.hpp"

namespace vpfd {

inline bool is_power_of_two(nn::Index n) { return n > 0 && (n & (n - 1)) == 0; }

// Radix-2 FFT with cached twiddles and bit-reversal table.
class Fft {
 public:
  explicit Fft(nn::Index n);
  nn::Index size() const { return n_; }
  void forward(std::complex<double>* a) const { run(a, false); }
  void inverse(std::complex<double>* a) const { run(a, true); }

 private:
  void run(std::complex<double>* a, bool inverse) const;

  nn::Index n_;
  std::vector<nn::Index> bitrev_;
  std::vector<std::complex<double>> twiddle_fwd_;  // per stage, packed
  std::vector<std::complex<double>> twiddle_inv_;
};

// one-shot convenience (allocates a plan per call)
void fft_inplace(std::complex<double>* a, nn::Index n, bool inverse);

}  // namespace vpfd
