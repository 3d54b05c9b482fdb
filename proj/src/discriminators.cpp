#include "vpfd/discriminators.hpp"

#include <sstream>

#include "vpfd/errors.hpp"
#include "vpfd/layers.hpp"
#include "vpfd/ops.hpp"

namespace vpfd {

using nn::Conv1dSpec;
using nn::Index;
using nn::Tape;
using nn::Tensor;
using nn::Var;

namespace {
constexpr double kSlope = 0.1;

// generic sequential 2-D stack: pre-activation convs, raw conv outputs captured
DiscOutput run_conv2d_plan(Tape& tape, nn::ParamStore& params, const std::vector<LayerDesc>& plan,
                           Var x, bool trainable) {
  DiscOutput out;
  for (size_t i = 0; i < plan.size(); ++i) {
    const LayerDesc& l = plan[i];
    Var in = i == 0 ? x : nn::leaky_relu(tape, out.features.back(), kSlope);
    Var y = nn::wn_conv2d(tape, params, l.name, in, l.stride_h, l.stride_w, (l.kernel_h - 1) / 2,
                          (l.kernel_w - 1) / 2, trainable);
    out.features.push_back(y);
  }
  out.score = out.features.back();
  return out;
}

std::vector<LayerDesc> make_spectral_plan(const std::string& prefix, Index in_h, Index channels) {
  (void)in_h;
  std::vector<LayerDesc> plan;
  auto push = [&](const std::string& role, Index kh, Index kw, Index sh, Index sw, Index ic, Index oc) {
    LayerDesc l;
    l.idx = static_cast<int>(plan.size());
    l.role = role;
    l.kind = "conv2d";
    l.kernel_h = kh;
    l.kernel_w = kw;
    l.stride_h = sh;
    l.stride_w = sw;
    l.in_ch = ic;
    l.out_ch = oc;
    l.name = prefix + ".c" + std::to_string(plan.size());
    plan.push_back(l);
  };
  push("body", 3, 5, 1, 1, 1, channels);
  push("body", 3, 5, 1, 2, channels, channels);
  push("body", 3, 5, 1, 2, channels, channels);
  push("body", 3, 3, 1, 1, channels, channels);
  push("score", 3, 3, 1, 1, channels, 1);
  return plan;
}

void create_plan_params(nn::ParamStore& params, const std::vector<LayerDesc>& plan, Rng& rng) {
  for (const LayerDesc& l : plan) {
    if (l.kind == "conv2d") {
      nn::create_wn_conv(params, l.name, {l.out_ch, l.in_ch, l.kernel_h, l.kernel_w}, rng);
    } else {
      nn::create_wn_conv(params, l.name, {l.out_ch, l.in_ch, l.kernel_h}, rng);
    }
  }
}

}  // namespace

std::string dump_layers(const std::string& header, const std::vector<LayerDesc>& layers) {
  std::ostringstream os;
  os << header << "\n";
  for (const LayerDesc& l : layers) {
    os << "layer idx=" << l.idx << " scale=" << l.scale << " role=" << l.role << " kind=" << l.kind
       << " kernel=" << l.kernel_h;
    if (l.kind == "conv2d") os << "x" << l.kernel_w;
    os << " stride=" << l.stride_h;
    if (l.kind == "conv2d") os << "x" << l.stride_w;
    os << " dilation=" << l.dilation << " in=" << l.in_ch << " out=" << l.out_ch
       << " wn=" << (l.weight_norm ? 1 : 0) << "\n";
  }
  return os.str();
}

// ----------------------------------------------------------------- VpfdHead

VpfdHead::VpfdHead(const VocoderConfig& vcfg, const VpfdHeadConfig& hcfg, uint64_t init_seed)
    : vcfg_(vcfg), hcfg_(hcfg) {
  vcfg_.validate();
  if (hcfg_.L < 0 || hcfg_.L > vcfg_.stages()) {
    throw ConfigError("vpfd head: L=" + std::to_string(hcfg_.L) + " outside 0.." +
                      std::to_string(vcfg_.stages()));
  }
  if (hcfg_.n_resblocks < 0) throw ConfigError("vpfd head: n_resblocks must be >= 0");
  if (hcfg_.channel_rule != "vocoder_channels" && hcfg_.channel_rule != "vocoder_layers") {
    throw ConfigError("vpfd head: unknown channel rule " + hcfg_.channel_rule);
  }

  auto rule_ch = [&](Index scale) {
    return hcfg_.channel_rule == "vocoder_channels" ? vcfg_.channels_at(scale)
                                                    : vcfg_.layers_at_scale(scale);
  };

  auto push = [&](const std::string& role, Index scale, Index kernel, Index stride, Index ic, Index oc) {
    LayerDesc l;
    l.idx = static_cast<int>(plan_.size());
    l.scale = role == "down" ? scale - 1 : scale;
    l.role = role;
    l.kind = "conv1d";
    l.kernel_h = kernel;
    l.stride_h = stride;
    l.in_ch = ic;
    l.out_ch = oc;
    l.name = "h" + std::to_string(plan_.size());
    plan_.push_back(l);
  };

  const Index L = hcfg_.L;
  for (Index s = L; s >= 0; --s) {
    const Index cs = rule_ch(s);
    if (s == L) {
      push("entry", s, hcfg_.kernel, 1, vcfg_.channels_at(s), cs);
    } else {
      // downsampled map concatenated with the pyramid level at this scale
      push("merge", s, hcfg_.kernel, 1, rule_ch(s) + vcfg_.channels_at(s), cs);
    }
    for (Index r = 0; r < hcfg_.n_resblocks; ++r) {
      push("res_a", s, hcfg_.kernel, 1, cs, cs);
      push("res_b", s, hcfg_.kernel, 1, cs, cs);
    }
    if (s > 0) {
      const Index rate = vcfg_.upsample_rates[static_cast<size_t>(s - 1)];
      push("down", s, 2 * rate, rate, cs, rule_ch(s - 1));
    }
  }
  push("score", 0, hcfg_.kernel, 1, rule_ch(0), 1);

  Rng rng(init_seed);
  create_plan_params(params_, plan_, rng);
}

DiscOutput VpfdHead::score(Tape& tape, const FeaturePyramid& pyramid, bool trainable) {
  if (pyramid.depth() != hcfg_.L) {
    throw std::invalid_argument("vpfd head: pyramid depth " + std::to_string(pyramid.depth()) +
                                " does not match L=" + std::to_string(hcfg_.L));
  }
  DiscOutput out;
  Var x;
  Var res_in;
  for (const LayerDesc& l : plan_) {
    const Conv1dSpec spec{l.stride_h, 1, l.role == "down" ? (l.kernel_h - l.stride_h) / 2
                                                          : (l.kernel_h - 1) / 2};
    if (l.role == "entry") {
      x = pyramid.levels[static_cast<size_t>(l.scale)];
    } else if (l.role == "merge") {
      x = nn::concat_channels(tape, x, pyramid.levels[static_cast<size_t>(l.scale)]);
    }
    Var in = nn::leaky_relu(tape, l.role == "res_b" ? res_in : x, kSlope);
    Var y = nn::wn_conv1d(tape, params_, l.name, in, spec, trainable);
    out.features.push_back(y);
    if (l.role == "res_a") {
      res_in = y;
    } else if (l.role == "res_b") {
      x = nn::add(tape, x, y);
    } else {
      x = y;
    }
  }
  out.score = out.features.back();
  return out;
}

std::string VpfdHead::dump_arch() const {
  std::ostringstream os;
  os << "arch kind=vpfd_head L=" << hcfg_.L << " rates=";
  for (size_t i = 0; i < vcfg_.upsample_rates.size(); ++i) {
    if (i) os << ",";
    os << vcfg_.upsample_rates[i];
  }
  os << " channel_rule=" << hcfg_.channel_rule << " resblocks=" << hcfg_.n_resblocks;
  return dump_layers(os.str(), plan_);
}

// ---------------------------------------------------------------------- Mpd

Mpd::Mpd(const MpdConfig& cfg, uint64_t init_seed) : cfg_(cfg) {
  if (cfg_.periods.empty() || cfg_.channels.empty()) throw ConfigError("mpd: empty periods or channels");
  for (size_t i = 0; i < cfg_.periods.size(); ++i) {
    if (cfg_.periods[i] < 2) throw ConfigError("mpd: periods must be >= 2");
    for (size_t j = i + 1; j < cfg_.periods.size(); ++j) {
      if (cfg_.periods[i] == cfg_.periods[j]) throw ConfigError("mpd: periods must be distinct");
    }
  }
  Rng rng(init_seed);
  for (size_t pi = 0; pi < cfg_.periods.size(); ++pi) {
    std::vector<LayerDesc> plan;
    const std::string prefix = "mpd" + std::to_string(cfg_.periods[pi]);
    auto push = [&](const std::string& role, Index kh, Index sh, Index ic, Index oc) {
      LayerDesc l;
      l.idx = static_cast<int>(plan.size());
      l.role = role;
      l.kind = "conv2d";
      l.kernel_h = kh;
      l.kernel_w = 1;
      l.stride_h = sh;
      l.stride_w = 1;
      l.in_ch = ic;
      l.out_ch = oc;
      l.name = prefix + ".c" + std::to_string(plan.size());
      plan.push_back(l);
    };
    Index prev = 1;
    for (Index ch : cfg_.channels) {
      push("body", 3, 3, prev, ch);
      prev = ch;
    }
    push("body", 3, 1, prev, prev);
    push("score", 3, 1, prev, 1);
    create_plan_params(params_, plan, rng);
    plans_.push_back(std::move(plan));
  }
}

std::vector<DiscOutput> Mpd::score(Tape& tape, Var wav, bool trainable) {
  const Tensor& v = tape.val(wav);
  if (v.rank() != 3 || v.dim(1) != 1) throw std::invalid_argument("mpd: expects (N, 1, T)");
  const Index T = v.dim(2);
  const Index max_period = *std::max_element(cfg_.periods.begin(), cfg_.periods.end());
  if (T < 2 * max_period) {
    throw DataError("mpd: waveform of " + std::to_string(T) + " samples shorter than 2x max period " +
                    std::to_string(max_period));
  }
  std::vector<DiscOutput> outs;
  for (size_t pi = 0; pi < cfg_.periods.size(); ++pi) {
    const Index p = cfg_.periods[pi];
    const Index padded = (T + p - 1) / p * p;
    Var x = wav;
    if (padded != T) x = nn::pad_time(tape, x, 0, padded - T);
    x = nn::reshape(tape, x, {v.dim(0), 1, padded / p, p});
    outs.push_back(run_conv2d_plan(tape, params_, plans_[pi], x, trainable));
  }
  return outs;
}

std::string Mpd::dump_arch() const {
  std::string s;
  for (size_t pi = 0; pi < plans_.size(); ++pi) {
    s += dump_layers("arch kind=mpd period=" + std::to_string(cfg_.periods[pi]), plans_[pi]);
  }
  return s;
}

// ---------------------------------------------------------------------- Mrd

Mrd::Mrd(const MrdConfig& cfg, uint64_t init_seed) : cfg_(cfg) {
  if (cfg_.resolutions.empty()) throw ConfigError("mrd: no resolutions");
  Rng rng(init_seed);
  for (size_t ri = 0; ri < cfg_.resolutions.size(); ++ri) {
    const StftRes& r = cfg_.resolutions[ri];
    auto plan = make_spectral_plan("mrd" + std::to_string(r.fft), r.fft / 2 + 1, cfg_.channels);
    create_plan_params(params_, plan, rng);
    plans_.push_back(std::move(plan));
  }
}

std::vector<DiscOutput> Mrd::score(Tape& tape, Var wav, bool trainable) {
  const Tensor& v = tape.val(wav);
  if (v.rank() != 3 || v.dim(1) != 1) throw std::invalid_argument("mrd: expects (N, 1, T)");
  std::vector<DiscOutput> outs;
  for (size_t ri = 0; ri < cfg_.resolutions.size(); ++ri) {
    const StftRes& r = cfg_.resolutions[ri];
    if (v.dim(2) < r.win) {
      throw DataError("mrd: waveform shorter than analysis window " + std::to_string(r.win));
    }
    StftPlan plan(r.fft, r.hop, r.win, true);
    Var flat = nn::reshape(tape, wav, {v.dim(0), v.dim(2)});
    Var mag = nn::stft_mag(tape, flat, plan);
    const Tensor& mv = tape.val(mag);
    Var x = nn::reshape(tape, mag, {mv.dim(0), 1, mv.dim(1), mv.dim(2)});
    outs.push_back(run_conv2d_plan(tape, params_, plans_[ri], x, trainable));
  }
  return outs;
}

std::string Mrd::dump_arch() const {
  std::string s;
  for (size_t ri = 0; ri < plans_.size(); ++ri) {
    s += dump_layers("arch kind=mrd fft=" + std::to_string(cfg_.resolutions[ri].fft), plans_[ri]);
  }
  return s;
}

// --------------------------------------------------------------------- Meld

Meld::Meld(const MeldConfig& cfg, Index n_mels, uint64_t init_seed) : cfg_(cfg), n_mels_(n_mels) {
  if (cfg_.channels < 1) throw ConfigError("meld: channels must be >= 1");
  Rng rng(init_seed);
  plan_ = make_spectral_plan("meld", n_mels, cfg_.channels);
  create_plan_params(params_, plan_, rng);
}

DiscOutput Meld::score(Tape& tape, Var mel, bool trainable) {
  const Tensor& v = tape.val(mel);
  if (v.rank() != 3 || v.dim(1) != n_mels_) throw std::invalid_argument("meld: expects (N, M, F)");
  Var x = nn::reshape(tape, mel, {v.dim(0), 1, v.dim(1), v.dim(2)});
  return run_conv2d_plan(tape, params_, plan_, x, trainable);
}

std::pair<Index, Index> Meld::score_map_size(Index frames) const {
  Index h = n_mels_, w = frames;
  for (const LayerDesc& l : plan_) {
    h = (h + 2 * ((l.kernel_h - 1) / 2) - l.kernel_h) / l.stride_h + 1;
    w = (w + 2 * ((l.kernel_w - 1) / 2) - l.kernel_w) / l.stride_w + 1;
  }
  return {h, w};
}

std::string Meld::dump_arch() const {
  return dump_layers("arch kind=meld channels=" + std::to_string(cfg_.channels), plan_);
}

}  // namespace vpfd
