#include "vpfd/vocoder.hpp"

#include <cmath>

#include "vpfd/errors.hpp"
#include "vpfd/layers.hpp"

namespace vpfd {

using nn::Conv1dSpec;
using nn::Index;
using nn::Tape;
using nn::Tensor;
using nn::Var;

namespace {
constexpr double kSlope = 0.1;
}

nn::Index VocoderConfig::channels_at(nn::Index level) const {
  nn::Index c = base_channels >> level;
  return c < 1 ? 1 : c;
}

nn::Index VocoderConfig::hop() const {
  nn::Index h = 1;
  for (nn::Index r : upsample_rates) h *= r;
  return h;
}

std::vector<nn::Index> VocoderConfig::kernels() const {
  if (!upsample_kernels.empty()) return upsample_kernels;
  std::vector<nn::Index> ks;
  for (nn::Index r : upsample_rates) ks.push_back(2 * r);
  return ks;
}

nn::Index VocoderConfig::layers_at_scale(nn::Index level) const {
  if (level == 0) return 1;  // input conv only
  return 1 + 2 * static_cast<nn::Index>(resblock_kernels.size() * resblock_dilations.size());
}

nn::Index VocoderConfig::receptive_field_samples() const {
  // one-sided, conservative: input conv reach plus each stage's kernels
  double reach = 3.0;
  const std::vector<nn::Index> ks = kernels();
  for (size_t i = 0; i < upsample_rates.size(); ++i) {
    reach = reach * static_cast<double>(upsample_rates[i]) + static_cast<double>(ks[i]);
    for (nn::Index k : resblock_kernels) {
      for (nn::Index d : resblock_dilations) {
        reach += static_cast<double>(d * (k - 1) / 2 + (k - 1) / 2);
      }
    }
  }
  reach += 3.0;  // output conv
  return static_cast<nn::Index>(reach) + 1;
}

void VocoderConfig::validate() const {
  if (n_mels < 1 || base_channels < 1) throw ConfigError("vocoder: bad dimensions");
  if (upsample_rates.empty()) throw ConfigError("vocoder: need at least one upsampling stage");
  const std::vector<nn::Index> ks = kernels();
  if (ks.size() != upsample_rates.size()) throw ConfigError("vocoder: kernel list length mismatch");
  for (size_t i = 0; i < upsample_rates.size(); ++i) {
    if (upsample_rates[i] < 2) throw ConfigError("vocoder: upsample rates must be >= 2");
    if ((ks[i] - upsample_rates[i]) % 2 != 0 || ks[i] < upsample_rates[i]) {
      throw ConfigError("vocoder: upsample kernel minus rate must be even and nonnegative");
    }
  }
  if (resblock_kernels.empty() || resblock_dilations.empty()) {
    throw ConfigError("vocoder: resblock kernel/dilation lists must be nonempty");
  }
  for (nn::Index k : resblock_kernels) {
    if (k < 1 || k % 2 == 0) throw ConfigError("vocoder: resblock kernels must be odd");
  }
  if (channels_at(stages()) < 1) throw ConfigError("vocoder: channels vanish before the last stage");
}

Vocoder::Vocoder(const VocoderConfig& cfg, uint64_t init_seed, Index max_level)
    : cfg_(cfg), max_level_(max_level < 0 ? cfg.stages() : max_level) {
  cfg_.validate();
  if (max_level_ > cfg_.stages()) throw ConfigError("vocoder: max_level out of range");
  Rng rng(init_seed);

  nn::create_wn_conv(params_, "pre", {cfg_.base_channels, cfg_.n_mels, 7}, rng);
  const std::vector<Index> ks = cfg_.kernels();
  for (Index st = 1; st <= max_level_; ++st) {
    const std::string stage = "up" + std::to_string(st);
    const Index cin = cfg_.channels_at(st - 1), cout = cfg_.channels_at(st);
    nn::create_wn_conv_transpose(params_, stage + ".t", {cin, cout, ks[static_cast<size_t>(st - 1)]}, rng);
    for (size_t j = 0; j < cfg_.resblock_kernels.size(); ++j) {
      const Index k = cfg_.resblock_kernels[j];
      for (size_t m = 0; m < cfg_.resblock_dilations.size(); ++m) {
        const std::string blk = stage + ".res" + std::to_string(j) + ".m" + std::to_string(m);
        nn::create_wn_conv(params_, blk + ".d", {cout, cout, k}, rng);
        nn::create_wn_conv(params_, blk + ".p", {cout, cout, k}, rng);
      }
    }
  }
  if (full()) {
    nn::create_wn_conv(params_, "post", {1, cfg_.channels_at(cfg_.stages()), 7}, rng);
  }
}

FeaturePyramid Vocoder::features(Tape& tape, Var mel, Index L, bool trainable) {
  if (L < 0 || L > max_level_) {
    throw std::out_of_range("vocoder: feature level L=" + std::to_string(L) + " outside 0.." +
                            std::to_string(max_level_));
  }
  const Tensor& vm = tape.val(mel);
  if (vm.rank() != 3 || vm.dim(1) != cfg_.n_mels) {
    throw std::invalid_argument("vocoder: mel shape " + vm.shape_str() + " does not match n_mels=" +
                                std::to_string(cfg_.n_mels));
  }

  FeaturePyramid pyr;
  Var x = nn::wn_conv1d(tape, params_, "pre", mel, {1, 1, 3}, trainable);
  pyr.levels.push_back(x);

  const std::vector<Index> ks = cfg_.kernels();
  for (Index st = 1; st <= L; ++st) {
    const std::string stage = "up" + std::to_string(st);
    const Index r = cfg_.upsample_rates[static_cast<size_t>(st - 1)];
    const Index k = ks[static_cast<size_t>(st - 1)];
    x = nn::leaky_relu(tape, x, kSlope);
    x = nn::wn_conv_transpose1d(tape, params_, stage + ".t", x, r, (k - r) / 2, trainable);

    const bool want_resblocks = cfg_.tap_after_resblocks || st < L;
    if (want_resblocks) {
      Var acc{};
      for (size_t j = 0; j < cfg_.resblock_kernels.size(); ++j) {
        const Index rk = cfg_.resblock_kernels[j];
        Var y = x;
        for (size_t m = 0; m < cfg_.resblock_dilations.size(); ++m) {
          const Index d = cfg_.resblock_dilations[m];
          const std::string blk = stage + ".res" + std::to_string(j) + ".m" + std::to_string(m);
          Var z = nn::leaky_relu(tape, y, kSlope);
          z = nn::wn_conv1d(tape, params_, blk + ".d", z, {1, d, d * (rk - 1) / 2}, trainable);
          z = nn::leaky_relu(tape, z, kSlope);
          z = nn::wn_conv1d(tape, params_, blk + ".p", z, {1, 1, (rk - 1) / 2}, trainable);
          y = nn::add(tape, y, z);
        }
        acc = acc.valid() ? nn::add(tape, acc, y) : y;
      }
      x = nn::mul_scalar(tape, acc, 1.0 / static_cast<double>(cfg_.resblock_kernels.size()));
    }
    pyr.levels.push_back(x);
  }
  return pyr;
}

Var Vocoder::waveform_from_top(Tape& tape, Var top, bool trainable) {
  if (!full()) throw std::logic_error("vocoder: waveform synthesis requires the full generator");
  Var x = nn::leaky_relu(tape, top, kSlope);
  x = nn::wn_conv1d(tape, params_, "post", x, {1, 1, 3}, trainable);
  return nn::tanh_op(tape, x);
}

Var Vocoder::synthesize_var(Tape& tape, Var mel, bool trainable) {
  FeaturePyramid pyr = features(tape, mel, cfg_.stages(), trainable);
  return waveform_from_top(tape, pyr.levels.back(), trainable);
}

Waveform Vocoder::synthesize(const MelSpectrogram& mel) {
  Tensor batch = mel_to_tensor(mel);
  Tensor wav = synthesize_tensor(batch);
  Waveform out;
  out.samples.assign(wav.data.begin(), wav.data.end());
  return out;
}

Tensor Vocoder::synthesize_tensor(const Tensor& mel) {
  Tape tape;
  Var m = tape.constant(mel);
  Var w = synthesize_var(tape, m, false);
  const Tensor& v = tape.val(w);  // (N, 1, T)
  Tensor out({v.dim(0), v.dim(2)});
  out.data = v.data;
  return out;
}

Index Vocoder::param_count(const VocoderConfig& cfg, Index max_level) {
  cfg.validate();
  const Index S = max_level < 0 ? cfg.stages() : max_level;
  auto conv = [](Index oc, Index ic, Index k) { return oc * ic * k + oc + oc; };
  auto convt = [](Index ic, Index oc, Index k) { return ic * oc * k + ic + oc; };
  Index n = conv(cfg.base_channels, cfg.n_mels, 7);
  const std::vector<Index> ks = cfg.kernels();
  for (Index st = 1; st <= S; ++st) {
    const Index cin = cfg.channels_at(st - 1), cout = cfg.channels_at(st);
    n += convt(cin, cout, ks[static_cast<size_t>(st - 1)]);
    for (Index k : cfg.resblock_kernels) {
      n += 2 * conv(cout, cout, k) * static_cast<Index>(cfg.resblock_dilations.size());
    }
  }
  if (S == cfg.stages()) n += conv(1, cfg.channels_at(cfg.stages()), 7);
  return n;
}

}  // namespace vpfd
