#include "vpfd/conditioning.hpp"

#include <cmath>

#include "vpfd/checkpoint.hpp"
#include "vpfd/errors.hpp"
#include "vpfd/rng.hpp"

namespace vpfd {

ConditioningProviders::ConditioningProviders(const CondConfig& cfg, nn::Index n_mels)
    : cfg_(cfg), n_mels_(n_mels) {
  Rng rng(cfg.seed);
  Rng spk_rng = rng.fork(1);
  Rng cnt_rng = rng.fork(2);
  spk_proj_ = nn::Tensor::randn({cfg.speaker_dim, 2 * n_mels}, spk_rng,
                                1.0 / std::sqrt(static_cast<double>(2 * n_mels)));
  cnt_proj_ = nn::Tensor::randn({cfg.content_dim, n_mels}, cnt_rng,
                                1.0 / std::sqrt(static_cast<double>(n_mels)));
  for (auto [file, side] : {std::pair{&cfg_.speaker_file, &spk_side_}, {&cfg_.content_file, &cnt_side_}}) {
    if (file->empty()) continue;
    CheckpointData ck = load_checkpoint(*file);
    for (auto& [name, t] : ck.arrays) (*side)[name] = t;
  }
}

nn::Tensor ConditioningProviders::embed_speaker(const MelSpectrogram& mel) const {
  if (mel.frames < 1 || mel.n_mels != n_mels_) throw DataError("embed_speaker: bad mel shape");
  std::vector<double> stats(static_cast<size_t>(2 * n_mels_));
  for (nn::Index m = 0; m < n_mels_; ++m) {
    double mean = 0.0;
    for (nn::Index f = 0; f < mel.frames; ++f) mean += mel.at(m, f);
    mean /= static_cast<double>(mel.frames);
    double var = 0.0;
    for (nn::Index f = 0; f < mel.frames; ++f) {
      const double d = mel.at(m, f) - mean;
      var += d * d;
    }
    var /= static_cast<double>(mel.frames);
    stats[static_cast<size_t>(m)] = mean;
    stats[static_cast<size_t>(n_mels_ + m)] = var;
  }
  nn::Tensor out({cfg_.speaker_dim});
  double ss = 0.0;
  for (nn::Index d = 0; d < cfg_.speaker_dim; ++d) {
    double acc = 0.0;
    for (nn::Index i = 0; i < 2 * n_mels_; ++i) acc += spk_proj_.at(d, i) * stats[static_cast<size_t>(i)];
    out.at(d) = acc;
    ss += acc * acc;
  }
  const double inv = 1.0 / (std::sqrt(ss) + 1e-12);
  for (nn::Index d = 0; d < cfg_.speaker_dim; ++d) out.at(d) *= inv;
  return out;
}

nn::Tensor ConditioningProviders::embed_content(const MelSpectrogram& mel) const {
  if (mel.frames < 1 || mel.n_mels != n_mels_) throw DataError("embed_content: bad mel shape");
  std::vector<double> mean(static_cast<size_t>(n_mels_), 0.0);
  for (nn::Index m = 0; m < n_mels_; ++m) {
    for (nn::Index f = 0; f < mel.frames; ++f) mean[static_cast<size_t>(m)] += mel.at(m, f);
    mean[static_cast<size_t>(m)] /= static_cast<double>(mel.frames);
  }
  nn::Tensor out({cfg_.content_dim, mel.frames});
  for (nn::Index d = 0; d < cfg_.content_dim; ++d) {
    for (nn::Index f = 0; f < mel.frames; ++f) {
      double acc = 0.0;
      for (nn::Index m = 0; m < n_mels_; ++m) {
        acc += cnt_proj_.at(d, m) * (mel.at(m, f) - mean[static_cast<size_t>(m)]);
      }
      out.at(d, f) = acc;
    }
  }
  return out;
}

nn::Tensor ConditioningProviders::speaker_for(const std::string& utt_id, const MelSpectrogram& mel) const {
  auto it = spk_side_.find(utt_id);
  if (it != spk_side_.end()) {
    if (it->second.numel() != cfg_.speaker_dim) throw DataError("sidecar speaker dim mismatch for " + utt_id);
    return it->second;
  }
  return embed_speaker(mel);
}

nn::Tensor ConditioningProviders::content_for(const std::string& utt_id, const MelSpectrogram& mel) const {
  auto it = cnt_side_.find(utt_id);
  if (it != cnt_side_.end()) {
    if (it->second.rank() != 2 || it->second.dim(0) != cfg_.content_dim || it->second.dim(1) != mel.frames) {
      throw DataError("sidecar content shape mismatch for " + utt_id);
    }
    return it->second;
  }
  return embed_content(mel);
}

}  // namespace vpfd
