#pragma once

#include <map>
#include <string>

#include "vpfd/mel.hpp"
#include "vpfd/tensor.hpp"

namespace vpfd {

struct CondConfig {
  nn::Index speaker_dim = 64;
  nn::Index content_dim = 32;
  uint64_t seed = 77;
  // Optional sidecar containers (checkpoint format) with arrays keyed by
  // utterance id; when present they override the toy providers.
  std::string speaker_file;
  std::string content_file;
};

// Deterministic stand-ins for pretrained speaker/content encoders. Both are
// pure functions of (mel, seed); externally computed embeddings can be fed in
// through the sidecar files.
class ConditioningProviders {
 public:
  ConditioningProviders(const CondConfig& cfg, nn::Index n_mels);

  // time-pooled per-bin mean/variance, fixed random projection, unit L2 norm
  nn::Tensor embed_speaker(const MelSpectrogram& mel) const;           // (d_s)
  // per-frame fixed projection after per-utterance mean removal
  nn::Tensor embed_content(const MelSpectrogram& mel) const;           // (d_p, F)

  // sidecar-aware variants; fall back to the toy providers when the id is absent
  nn::Tensor speaker_for(const std::string& utt_id, const MelSpectrogram& mel) const;
  nn::Tensor content_for(const std::string& utt_id, const MelSpectrogram& mel) const;

  const CondConfig& config() const { return cfg_; }

 private:
  CondConfig cfg_;
  nn::Index n_mels_;
  nn::Tensor spk_proj_;  // (d_s, 2*n_mels)
  nn::Tensor cnt_proj_;  // (d_p, n_mels)
  std::map<std::string, nn::Tensor> spk_side_;
  std::map<std::string, nn::Tensor> cnt_side_;
};

}  // namespace vpfd
