#include "vpfd/dataset.hpp"

#include <filesystem>
#include <fstream>
#include <cmath>
#include <map>
#include <sstream>

#include "vpfd/errors.hpp"

namespace vpfd {

namespace fs = std::filesystem;
using nn::Index;
using nn::Tensor;

void write_corpus(const std::string& dir, const std::vector<CorpusItem>& items) {
  fs::create_directories(dir);
  std::ofstream manifest(fs::path(dir) / "manifest.tsv");
  if (!manifest) throw DataError("cannot write manifest in " + dir);
  for (const CorpusItem& it : items) {
    const std::string name = it.id + ".wav";
    save_wav(it.wav, (fs::path(dir) / name).string());
    manifest << name << "\t" << it.speaker_id << "\t" << it.sentence_id << "\n";
  }
}

std::vector<ManifestEntry> read_manifest(const std::string& dir) {
  const fs::path path = fs::path(dir) / "manifest.tsv";
  std::ifstream f(path);
  if (!f) throw DependencyError("missing corpus manifest: " + path.string() + " (run gen-data first)");
  std::vector<ManifestEntry> out;
  std::string line;
  int lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::stringstream ss(line);
    ManifestEntry e;
    std::string spk, sen;
    if (!std::getline(ss, e.rel_path, '\t') || !std::getline(ss, spk, '\t') || !std::getline(ss, sen)) {
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": expected path<TAB>speaker<TAB>sentence");
    }
    e.speaker = std::stoll(spk);
    e.sentence = std::stoll(sen);
    out.push_back(std::move(e));
  }
  if (out.empty()) throw DataError("empty corpus manifest: " + path.string());
  return out;
}

Dataset load_dataset(const std::string& dir, const MelConfig& mel_cfg,
                     const ConditioningProviders& providers) {
  Dataset ds;
  std::map<Index, Index> max_sentence;
  for (const ManifestEntry& e : read_manifest(dir)) {
    Utterance u;
    u.speaker = e.speaker;
    u.sentence = e.sentence;
    const fs::path p = fs::path(dir) / e.rel_path;
    u.id = p.stem().string();
    u.wav = load_wav(p.string());
    u.mel = extract_mel(u.wav, mel_cfg);
    u.speaker_emb = providers.speaker_for(u.id, u.mel);
    u.content = providers.content_for(u.id, u.mel);
    auto it = max_sentence.find(u.speaker);
    if (it == max_sentence.end() || u.sentence > it->second) max_sentence[u.speaker] = u.sentence;
    ds.items.push_back(std::move(u));
  }
  for (size_t i = 0; i < ds.items.size(); ++i) {
    const Utterance& u = ds.items[i];
    const bool held_out = max_sentence[u.speaker] > 0 && u.sentence == max_sentence[u.speaker];
    (held_out ? ds.eval_idx : ds.train_idx).push_back(i);
  }
  if (ds.train_idx.empty()) ds.train_idx = ds.eval_idx;
  if (ds.eval_idx.empty()) ds.eval_idx = ds.train_idx;
  return ds;
}

namespace {

Batch assemble(const Dataset& ds, const std::vector<size_t>& items, const std::vector<Index>& starts,
               Index crop_frames, Index wav_hop) {
  const Index N = static_cast<Index>(items.size());
  const Utterance& first = ds.items[items[0]];
  const Index M = first.mel.n_mels;
  const Index dp = first.content.dim(0);
  const Index dsp = first.speaker_emb.dim(0);

  Batch b;
  b.items = items;
  b.mel = Tensor({N, M, crop_frames});
  b.content = Tensor({N, dp, crop_frames});
  b.speaker = Tensor({N, dsp});
  if (wav_hop > 0) b.wav_seg = Tensor({N, crop_frames * wav_hop});

  for (Index n = 0; n < N; ++n) {
    const Utterance& u = ds.items[items[static_cast<size_t>(n)]];
    const Index start = starts[static_cast<size_t>(n)];
    if (u.mel.frames < start + crop_frames) {
      throw DataError("utterance " + u.id + " has " + std::to_string(u.mel.frames) +
                      " frames, need " + std::to_string(start + crop_frames));
    }
    for (Index m = 0; m < M; ++m)
      for (Index f = 0; f < crop_frames; ++f) b.mel.at(n, m, f) = u.mel.at(m, start + f);
    for (Index d = 0; d < dp; ++d)
      for (Index f = 0; f < crop_frames; ++f) b.content.at(n, d, f) = u.content.at(d, start + f);
    for (Index d = 0; d < dsp; ++d) b.speaker.at(n, d) = u.speaker_emb.at(d);
    if (wav_hop > 0) {
      const Index s0 = start * wav_hop;
      for (Index i = 0; i < crop_frames * wav_hop; ++i) {
        const Index idx = s0 + i;
        b.wav_seg.at(n, i) = idx < u.wav.size() ? u.wav.samples[static_cast<size_t>(idx)] : 0.0;
      }
    }
  }
  return b;
}

}  // namespace

MelNorm mel_stats(const Dataset& ds) {
  double sum = 0.0;
  int64_t count = 0;
  for (size_t i : ds.train_idx) {
    for (double v : ds.items[i].mel.values) sum += v;
    count += static_cast<int64_t>(ds.items[i].mel.values.size());
  }
  MelNorm n;
  n.mean = sum / static_cast<double>(count);
  double ss = 0.0;
  for (size_t i : ds.train_idx) {
    for (double v : ds.items[i].mel.values) {
      const double d = v - n.mean;
      ss += d * d;
    }
  }
  n.scale = std::sqrt(ss / static_cast<double>(count));
  if (n.scale < 1e-6) n.scale = 1.0;
  return n;
}

Batch sample_batch(const Dataset& ds, const std::vector<size_t>& pool, Index batch, Index crop_frames,
                   Rng& rng, Index wav_hop) {
  if (pool.empty()) throw DataError("sample_batch: empty item pool");
  std::vector<size_t> items;
  std::vector<Index> starts;
  for (Index n = 0; n < batch; ++n) {
    const size_t pick = pool[static_cast<size_t>(rng.uniform_int(0, static_cast<int64_t>(pool.size()) - 1))];
    const Utterance& u = ds.items[pick];
    if (u.mel.frames < crop_frames) {
      throw DataError("utterance " + u.id + " shorter than crop (" + std::to_string(u.mel.frames) +
                      " < " + std::to_string(crop_frames) + " frames)");
    }
    items.push_back(pick);
    starts.push_back(rng.uniform_int(0, u.mel.frames - crop_frames));
  }
  return assemble(ds, items, starts, crop_frames, wav_hop);
}

Batch crop_batch(const Dataset& ds, const std::vector<size_t>& items, const std::vector<Index>& starts,
                 Index crop_frames, Index wav_hop) {
  return assemble(ds, items, starts, crop_frames, wav_hop);
}

Batch fixed_batch(const Dataset& ds, const std::vector<size_t>& idx, Index crop_frames, Index wav_hop) {
  std::vector<Index> starts(idx.size(), 0);
  return assemble(ds, idx, starts, crop_frames, wav_hop);
}

}  // namespace vpfd
