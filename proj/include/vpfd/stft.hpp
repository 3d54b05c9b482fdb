#pragma once

#include <memory>
#include <vector>

#include "vpfd/fft.hpp"
#include "vpfd/tensor.hpp"

namespace vpfd {

// STFT magnitude analysis shared by the mel pipeline (plain data path) and the
// autodiff op used in spectral training losses. Frames are centered on
// multiples of `hop` with reflect padding of fft_size/2 when `center` is set;
// the window is a periodic Hann of win_length zero-padded to fft_size.
struct StftPlan {
  nn::Index fft_size = 1024;
  nn::Index hop = 256;
  nn::Index win_length = 1024;
  bool center = true;

  std::vector<double> window;  // length fft_size
  std::shared_ptr<const Fft> fft_plan;

  StftPlan() = default;
  StftPlan(nn::Index fft, nn::Index hop_, nn::Index win, bool center_ = true);

  nn::Index bins() const { return fft_size / 2 + 1; }
  nn::Index frames_for(nn::Index len) const {
    return center ? len / hop + 1 : (len - fft_size) / hop + 1;
  }

  // out must hold bins() * frames_for(len); layout (bin, frame) row-major.
  void magnitude(const double* x, nn::Index len, double* out) const;

  // Accumulates dL/dx given dL/d|X| into gx (same length as x).
  void magnitude_backward(const double* x, nn::Index len, const double* gmag, double* gx) const;
};

std::vector<double> hann_window(nn::Index n);

// reflect index into [0, len) without repeating the edge sample
nn::Index reflect_index(nn::Index i, nn::Index len);

}  // namespace vpfd
