#pragma once

#include <string>
#include <vector>

#include "vpfd/conditioning.hpp"
#include "vpfd/mel.hpp"
#include "vpfd/rng.hpp"
#include "vpfd/synthetic.hpp"
#include "vpfd/tensor.hpp"

namespace vpfd {

struct Utterance {
  std::string id;
  nn::Index speaker = 0;
  nn::Index sentence = 0;
  Waveform wav;
  MelSpectrogram mel;
  nn::Tensor speaker_emb;  // (d_s)
  nn::Tensor content;      // (d_p, F)
};

// Featurized corpus. The evaluation split holds the last sentence of each
// speaker (when a speaker has more than one sentence).
struct Dataset {
  std::vector<Utterance> items;
  std::vector<size_t> train_idx;
  std::vector<size_t> eval_idx;

  const Utterance& item(size_t i) const { return items[i]; }
  size_t size() const { return items.size(); }
};

struct ManifestEntry {
  std::string rel_path;
  nn::Index speaker = 0;
  nn::Index sentence = 0;
};

// Corpus directory layout: one wav per utterance plus manifest.tsv with
// tab-separated "relative-path speaker_id sentence_id" records.
void write_corpus(const std::string& dir, const std::vector<CorpusItem>& items);
std::vector<ManifestEntry> read_manifest(const std::string& dir);

Dataset load_dataset(const std::string& dir, const MelConfig& mel_cfg,
                     const ConditioningProviders& providers);

// Mean and standard deviation over every training-split mel cell; the
// diffusion models operate on (mel - mean) / scale so the forward process
// noise levels are meaningful at desk scale.
struct MelNorm {
  double mean = 0.0;
  double scale = 1.0;
};
MelNorm mel_stats(const Dataset& ds);

// Aligned training batch; wav_seg is filled only when wav_hop > 0.
struct Batch {
  nn::Tensor mel;      // (N, M, Tc)
  nn::Tensor content;  // (N, d_p, Tc)
  nn::Tensor speaker;  // (N, d_s)
  nn::Tensor wav_seg;  // (N, Tc * hop) when requested
  std::vector<size_t> items;
};

Batch sample_batch(const Dataset& ds, const std::vector<size_t>& pool, nn::Index batch,
                   nn::Index crop_frames, Rng& rng, nn::Index wav_hop = 0);
// Explicit items and crop starts.
Batch crop_batch(const Dataset& ds, const std::vector<size_t>& items,
                 const std::vector<nn::Index>& starts, nn::Index crop_frames, nn::Index wav_hop = 0);
// Deterministic crop at frame 0 of the given items (evaluation fixtures).
Batch fixed_batch(const Dataset& ds, const std::vector<size_t>& idx, nn::Index crop_frames,
                  nn::Index wav_hop = 0);

}  // namespace vpfd
