#pragma once

#include <string>
#include <vector>

#include "vpfd/param_store.hpp"
#include "vpfd/stft.hpp"
#include "vpfd/vocoder.hpp"

namespace vpfd {

// Score map plus the ordered internal feature maps used by the feature
// matching loss. Features are the raw outputs of every convolution in graph
// order; the score map is the last entry's value as well.
struct DiscOutput {
  nn::Var score;
  std::vector<nn::Var> features;
};

// One convolution of a discriminator plan; the dump-arch text and the forward
// pass are both driven by this record, so structural tests see the network
// that actually runs.
struct LayerDesc {
  int idx = 0;
  nn::Index scale = 0;           // pyramid scale the output lives at
  std::string role;              // entry|merge|res_a|res_b|down|body|score
  std::string kind;              // conv1d|conv2d
  nn::Index kernel_h = 0, kernel_w = 1;
  nn::Index stride_h = 1, stride_w = 1;
  nn::Index dilation = 1;
  nn::Index in_ch = 0, out_ch = 0;
  bool weight_norm = true;
  std::string name;
};

std::string dump_layers(const std::string& header, const std::vector<LayerDesc>& layers);

// ---------------------------------------------------------------------------
// Feature-domain head over a vocoder feature pyramid. Downsampling mirrors the
// vocoder's upsampling rates in reverse; each downsampled map is concatenated
// with the matching pyramid level before the next convolution. Downsampling
// kernels are twice the rate, every other kernel is `kernel`; all convolutions
// are weight-normalized with leaky-rectified activations. The score is a
// 1-channel map at mel frame rate.
struct VpfdHeadConfig {
  nn::Index L = 1;
  nn::Index n_resblocks = 1;
  nn::Index kernel = 21;
  // "vocoder_channels": stage output channels equal the vocoder feature map
  // channel count at the same scale. "vocoder_layers": they equal the number
  // of extractor conv layers at that scale.
  std::string channel_rule = "vocoder_channels";
};

class VpfdHead {
 public:
  VpfdHead(const VocoderConfig& vcfg, const VpfdHeadConfig& hcfg, uint64_t init_seed);

  DiscOutput score(nn::Tape& tape, const FeaturePyramid& pyramid, bool trainable);

  const std::vector<LayerDesc>& plan() const { return plan_; }
  std::string dump_arch() const;
  nn::Index layer_count() const { return static_cast<nn::Index>(plan_.size()); }

  nn::ParamStore& params() { return params_; }
  const VpfdHeadConfig& config() const { return hcfg_; }

 private:
  VocoderConfig vcfg_;
  VpfdHeadConfig hcfg_;
  std::vector<LayerDesc> plan_;
  nn::ParamStore params_;
};

// ---------------------------------------------------------------------------
// Waveform-domain baselines.

struct MpdConfig {
  std::vector<nn::Index> periods{2, 3, 5, 7, 11};
  std::vector<nn::Index> channels{4, 8, 16};
};

struct StftRes {
  nn::Index fft = 256;
  nn::Index hop = 64;
  nn::Index win = 256;
};

struct MrdConfig {
  std::vector<StftRes> resolutions{{256, 256, 256}, {512, 512, 512}, {128, 128, 128}};
  nn::Index channels = 8;
};

// Period discriminator: waveform folded to (T/p, p) before 2-D convolutions.
class Mpd {
 public:
  Mpd(const MpdConfig& cfg, uint64_t init_seed);
  std::vector<DiscOutput> score(nn::Tape& tape, nn::Var wav, bool trainable);  // wav (N, 1, T)
  std::string dump_arch() const;
  const MpdConfig& config() const { return cfg_; }
  nn::ParamStore& params() { return params_; }
  const std::vector<std::vector<LayerDesc>>& plans() const { return plans_; }

 private:
  MpdConfig cfg_;
  std::vector<std::vector<LayerDesc>> plans_;  // one per period
  nn::ParamStore params_;
};

// Resolution discriminator over STFT magnitudes.
class Mrd {
 public:
  Mrd(const MrdConfig& cfg, uint64_t init_seed);
  std::vector<DiscOutput> score(nn::Tape& tape, nn::Var wav, bool trainable);
  std::string dump_arch() const;
  const MrdConfig& config() const { return cfg_; }
  nn::ParamStore& params() { return params_; }
  const std::vector<std::vector<LayerDesc>>& plans() const { return plans_; }

 private:
  MrdConfig cfg_;
  std::vector<std::vector<LayerDesc>> plans_;
  nn::ParamStore params_;
};

// Mel-map discriminator; small/large presets differ only in channel width.
struct MeldConfig {
  nn::Index channels = 16;
};

class Meld {
 public:
  Meld(const MeldConfig& cfg, nn::Index n_mels, uint64_t init_seed);
  DiscOutput score(nn::Tape& tape, nn::Var mel, bool trainable);  // mel (N, M, F)
  std::string dump_arch() const;
  const std::vector<LayerDesc>& plan() const { return plan_; }
  // closed-form score map size for an F-frame input
  std::pair<nn::Index, nn::Index> score_map_size(nn::Index frames) const;
  nn::ParamStore& params() { return params_; }

 private:
  MeldConfig cfg_;
  nn::Index n_mels_;
  std::vector<LayerDesc> plan_;
  nn::ParamStore params_;
};

}  // namespace vpfd
