#pragma once

#include <string>
#include <vector>

#include "vpfd/wav.hpp"

namespace vpfd {

// Deterministic harmonic corpus: per-speaker f0 base and spectral tilt,
// per-sentence f0 contour and amplitude envelope. Same seed, same bits.
struct SyntheticCorpusSpec {
  int64_t n_speakers = 2;
  int64_t sentences_per_speaker = 4;
  double duration_s = 1.5;
  double sample_rate = 22050.0;
  double f0_base_hz = 110.0;
  double f0_speaker_ratio = 1.8;  // speaker k gets f0_base * ratio^k
  int64_t n_harmonics = 10;
  uint64_t seed = 1;

  void validate() const;
};

struct CorpusItem {
  Waveform wav;
  int64_t speaker_id = 0;
  int64_t sentence_id = 0;
  std::string id;  // "s<speaker>_u<sentence>"
};

std::vector<CorpusItem> generate_corpus(const SyntheticCorpusSpec& spec);

}  // namespace vpfd
