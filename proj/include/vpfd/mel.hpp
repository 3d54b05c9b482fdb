#pragma once

#include <vector>

#include "vpfd/stft.hpp"
#include "vpfd/tensor.hpp"
#include "vpfd/wav.hpp"

namespace vpfd {

struct MelConfig {
  nn::Index n_mels = 80;
  nn::Index fft_size = 1024;
  nn::Index hop = 256;
  nn::Index window = 1024;
  double sample_rate = 22050.0;
  double fmin_hz = 0.0;
  double fmax_hz = 8000.0;
  double log_floor = 1e-5;   // clamp before natural log
  bool slaney_norm = true;   // triangle area normalization; overridable

  void validate() const;
  StftPlan stft_plan() const { return StftPlan(fft_size, hop, window, true); }
};

// Natural-log mel map, (n_mels x frames).
struct MelSpectrogram {
  nn::Index n_mels = 0;
  nn::Index frames = 0;
  std::vector<double> values;  // row-major (mel, frame)

  double& at(nn::Index m, nn::Index f) { return values[static_cast<size_t>(m * frames + f)]; }
  double at(nn::Index m, nn::Index f) const { return values[static_cast<size_t>(m * frames + f)]; }
};

// Slaney-scale triangular filterbank, (n_mels x bins) row-major.
std::vector<double> mel_filterbank(const MelConfig& cfg);

double hz_to_mel_slaney(double hz);
double mel_to_hz_slaney(double mel);

// Centered reflect framing; frames = floor(len / hop) + 1. Rejects waveforms
// shorter than one window.
MelSpectrogram extract_mel(const Waveform& w, const MelConfig& cfg);

// Conversions between the single-utterance type and batched (N, n_mels, F).
nn::Tensor mel_to_tensor(const MelSpectrogram& m);
MelSpectrogram tensor_to_mel(const nn::Tensor& t, nn::Index item = 0);

}  // namespace vpfd
