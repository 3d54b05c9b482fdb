#pragma once

#include <filesystem>
#include <string>

#include "vpfd/checkpoint.hpp"
#include "vpfd/conditioning.hpp"
#include "vpfd/dataset.hpp"
#include "vpfd/denoiser.hpp"
#include "vpfd/mel.hpp"
#include "vpfd/synthetic.hpp"
#include "vpfd/vocoder.hpp"

namespace vpfd::testutil {

// fast toy geometry used across the unit tests: hop 16 = 4*4
inline MelConfig tiny_mel() {
  MelConfig m;
  m.n_mels = 16;
  m.fft_size = 64;
  m.hop = 16;
  m.window = 64;
  return m;
}

inline VocoderConfig tiny_vocoder() {
  VocoderConfig v;
  v.n_mels = 16;
  v.upsample_rates = {4, 4};
  v.base_channels = 8;
  v.resblock_kernels = {3};
  v.resblock_dilations = {1, 2};
  return v;
}

inline DenoiserConfig tiny_denoiser() {
  DenoiserConfig d;
  d.n_mels = 16;
  d.hidden = 8;
  d.content_dim = 4;
  d.speaker_dim = 8;
  d.kernel = 3;
  d.time_dim = 8;
  return d;
}

inline CondConfig tiny_cond() {
  CondConfig c;
  c.speaker_dim = 8;
  c.content_dim = 4;
  return c;
}

inline Dataset tiny_dataset(uint64_t seed = 5, int64_t speakers = 2, int64_t sentences = 2,
                            double duration = 0.4) {
  SyntheticCorpusSpec spec;
  spec.n_speakers = speakers;
  spec.sentences_per_speaker = sentences;
  spec.duration_s = duration;
  spec.seed = seed;
  const auto items = generate_corpus(spec);

  const MelConfig mel = tiny_mel();
  ConditioningProviders providers(tiny_cond(), mel.n_mels);
  Dataset ds;
  for (const CorpusItem& it : items) {
    Utterance u;
    u.id = it.id;
    u.speaker = it.speaker_id;
    u.sentence = it.sentence_id;
    u.wav = it.wav;
    u.mel = extract_mel(u.wav, mel);
    u.speaker_emb = providers.embed_speaker(u.mel);
    u.content = providers.embed_content(u.mel);
    ds.items.push_back(std::move(u));
  }
  for (size_t i = 0; i < ds.items.size(); ++i) {
    (ds.items[i].sentence == sentences - 1 && sentences > 1 ? ds.eval_idx : ds.train_idx).push_back(i);
  }
  if (ds.eval_idx.empty()) ds.eval_idx = ds.train_idx;
  return ds;
}

inline std::string tmp_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / "vpfd_tests" / name;
  std::filesystem::create_directories(dir);
  return dir.string();
}

// unpretrained checkpoints are enough for contract tests
inline std::string save_vocoder_ckpt(Vocoder& v, const std::string& dir) {
  CheckpointData ck;
  ck.meta["kind"] = "vocoder";
  store_params(ck, v.params());
  const std::string path = dir + "/vocoder.ckpt";
  save_checkpoint(path, ck);
  return path;
}

inline std::string save_teacher_ckpt(Denoiser& d, const std::string& dir) {
  CheckpointData ck;
  ck.meta["kind"] = "teacher";
  store_params(ck, d.params());
  const std::string path = dir + "/teacher.ckpt";
  save_checkpoint(path, ck);
  return path;
}

inline bool params_equal(const nn::ParamStore& a, const nn::ParamStore& b) {
  auto pa = a.all();
  auto pb = b.all();
  if (pa.size() != pb.size()) return false;
  for (size_t i = 0; i < pa.size(); ++i) {
    if (pa[i]->name != pb[i]->name || pa[i]->value.data != pb[i]->value.data) return false;
  }
  return true;
}

inline std::vector<nn::Tensor> snapshot_params(const nn::ParamStore& s) {
  std::vector<nn::Tensor> out;
  for (const nn::Param* p : s.all()) out.push_back(p->value);
  return out;
}

inline bool snapshot_equal(const std::vector<nn::Tensor>& snap, const nn::ParamStore& s) {
  auto ps = s.all();
  if (snap.size() != ps.size()) return false;
  for (size_t i = 0; i < snap.size(); ++i) {
    if (snap[i].data != ps[i]->value.data) return false;
  }
  return true;
}

}  // namespace vpfd::testutil
