#pragma once

#include <string>
#include <vector>

namespace vpfd {

struct Waveform {
  std::vector<double> samples;  // in [-1, 1]
  double sample_rate = 22050.0;

  int64_t size() const { return static_cast<int64_t>(samples.size()); }
  double duration_s() const { return static_cast<double>(samples.size()) / sample_rate; }
};

// RIFF WAVE, 16-bit PCM, mono. Multi-channel or non-PCM input is rejected.
Waveform load_wav(const std::string& path);
void save_wav(const Waveform& w, const std::string& path);

}  // namespace vpfd
