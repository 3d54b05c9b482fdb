#pragma once

#include <string>
#include <vector>

#include "vpfd/mel.hpp"
#include "vpfd/ops.hpp"
#include "vpfd/param_store.hpp"

namespace vpfd {

// Upsampling generator: input conv, transposed-conv stages each followed by a
// bank of dilated residual blocks (outputs averaged), then a tanh output conv.
// Channels halve at every stage. product(upsample_rates) must equal the mel
// hop of the training data.
struct VocoderConfig {
  nn::Index n_mels = 80;
  std::vector<nn::Index> upsample_rates{4, 4, 2, 2};
  std::vector<nn::Index> upsample_kernels;  // empty = 2x rate
  nn::Index base_channels = 24;             // 512 mirrors the full-scale preset
  std::vector<nn::Index> resblock_kernels{3};
  std::vector<nn::Index> resblock_dilations{1, 3};
  // Pyramid levels are taken after each stage's residual blocks by default; a
  // level can instead be cut immediately after the transposed convolution.
  bool tap_after_resblocks = true;

  nn::Index stages() const { return static_cast<nn::Index>(upsample_rates.size()); }
  nn::Index channels_at(nn::Index level) const;
  nn::Index hop() const;
  std::vector<nn::Index> kernels() const;
  // Conv layer count of the feature extractor at a scale (input conv for
  // level 0; transposed conv plus resblock convs per stage).
  nn::Index layers_at_scale(nn::Index level) const;
  nn::Index receptive_field_samples() const;  // conservative one-sided bound
  void validate() const;
};

// Ordered per-scale activations; levels[0] is the pre-upsampling map,
// levels[l] the output of stage l. Lengths grow by exactly the stage rate.
struct FeaturePyramid {
  std::vector<nn::Var> levels;
  nn::Index depth() const { return static_cast<nn::Index>(levels.size()) - 1; }
};

class Vocoder {
 public:
  // max_level = -1 materializes the full generator (all stages + output conv);
  // 0 <= max_level < stages() materializes only the feature-extractor prefix.
  Vocoder(const VocoderConfig& cfg, uint64_t init_seed, nn::Index max_level = -1);

  FeaturePyramid features(nn::Tape& tape, nn::Var mel, nn::Index L, bool trainable);
  // final activation + output conv + tanh applied to the top-level map
  nn::Var waveform_from_top(nn::Tape& tape, nn::Var top, bool trainable);
  nn::Var synthesize_var(nn::Tape& tape, nn::Var mel, bool trainable);

  // convenience no-grad paths
  Waveform synthesize(const MelSpectrogram& mel);
  nn::Tensor synthesize_tensor(const nn::Tensor& mel);  // (N, M, F) -> (N, F*hop)

  static nn::Index param_count(const VocoderConfig& cfg, nn::Index max_level = -1);

  nn::ParamStore& params() { return params_; }
  const nn::ParamStore& params() const { return params_; }
  const VocoderConfig& config() const { return cfg_; }
  nn::Index max_level() const { return max_level_; }
  bool full() const { return max_level_ == cfg_.stages(); }

 private:
  VocoderConfig cfg_;
  nn::Index max_level_;
  nn::ParamStore params_;
};

}  // namespace vpfd
