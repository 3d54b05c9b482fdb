#include "vpfd/trainers.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "vpfd/adam.hpp"
#include "vpfd/errors.hpp"
#include "vpfd/ops.hpp"

namespace vpfd {

using nn::Index;
using nn::Tape;
using nn::Tensor;
using nn::Var;

namespace {

std::string fmt_row(std::initializer_list<double> vals) {
  std::string s;
  char buf[64];
  for (double v : vals) {
    std::snprintf(buf, sizeof(buf), ",%.17g", v);
    s += buf;
  }
  return s;
}

// spectral reconstruction terms against a constant reference waveform
Var spectral_loss(Tape& tape, Var synth_flat, const Tensor& ref_flat,
                  const std::vector<StftRes>& resolutions, const MelConfig& mel_cfg,
                  Var* mel_term_out, Var* stft_term_out) {
  const Tensor fb_t = [&] {
    const std::vector<double> fb = mel_filterbank(mel_cfg);
    Tensor t({mel_cfg.n_mels, mel_cfg.fft_size / 2 + 1});
    t.data = fb;
    return t;
  }();

  Var ref = tape.constant(ref_flat);
  const StftPlan mel_plan = mel_cfg.stft_plan();
  Var mag_s = nn::stft_mag(tape, synth_flat, mel_plan);
  Var mag_r = nn::stft_mag(tape, ref, mel_plan);
  Var mel_s = nn::log_clamp(tape, nn::matmul_const_left(tape, fb_t, mag_s), mel_cfg.log_floor);
  Var mel_r = nn::log_clamp(tape, nn::matmul_const_left(tape, fb_t, mag_r), mel_cfg.log_floor);
  Var mel_term = nn::l1_mean(tape, mel_s, mel_r);

  Var stft_term{};
  for (const StftRes& r : resolutions) {
    StftPlan plan(r.fft, r.hop, r.win, true);
    Var ms = nn::stft_mag(tape, synth_flat, plan);
    Var mr = nn::stft_mag(tape, ref, plan);
    Var lin = nn::l1_mean(tape, ms, mr);
    Var logt = nn::l1_mean(tape, nn::log_clamp(tape, ms, 1e-5), nn::log_clamp(tape, mr, 1e-5));
    Var term = nn::add(tape, lin, logt);
    stft_term = stft_term.valid() ? nn::add(tape, stft_term, term) : term;
  }
  stft_term = nn::mul_scalar(tape, stft_term, 1.0 / static_cast<double>(resolutions.size()));

  *mel_term_out = mel_term;
  *stft_term_out = stft_term;
  return nn::add(tape, mel_term, stft_term);
}

}  // namespace

PretrainStats pretrain_vocoder(Vocoder& vocoder, const Dataset& ds, const VocoderPretrainConfig& cfg) {
  if (ds.items.empty()) throw DataError("pretrain_vocoder: empty dataset");
  if (!vocoder.full()) throw std::logic_error("pretrain_vocoder: needs the full generator");
  const Index hop = vocoder.config().hop();
  Rng rng(cfg.seed);
  Rng batch_rng = rng.fork(11);

  std::ofstream log;
  if (!cfg.log_path.empty()) {
    log.open(cfg.log_path);
    log << "step,loss,mel_l1,stft\n";
  }

  // fixed fixture for the before/after comparison
  std::vector<size_t> eval_items;
  for (size_t i = 0; i < std::min<size_t>(4, ds.eval_idx.size()); ++i) eval_items.push_back(ds.eval_idx[i]);
  Batch eval_b = fixed_batch(ds, eval_items, cfg.crop_frames, hop);

  auto eval_loss = [&]() {
    Tape tape;
    Var mel = tape.constant(eval_b.mel);
    Var synth = vocoder.synthesize_var(tape, mel, false);
    Var flat = nn::reshape(tape, synth, {eval_b.mel.dim(0), tape.val(synth).dim(2)});
    Var mel_term{}, stft_term{};
    Var loss = spectral_loss(tape, flat, eval_b.wav_seg, cfg.stft_resolutions, cfg.mel, &mel_term, &stft_term);
    return tape.val(loss).at(0);
  };

  PretrainStats stats;
  stats.initial_loss = eval_loss();
  stats.steps = cfg.steps;

  nn::Adam opt(vocoder.params().all(), {cfg.lr, cfg.beta1, cfg.beta2, 1e-8});
  for (Index step = 1; step <= cfg.steps; ++step) {
    Batch b = sample_batch(ds, ds.train_idx, cfg.batch, cfg.crop_frames, batch_rng, hop);
    Tape tape;
    Var mel = tape.constant(b.mel);
    Var synth = vocoder.synthesize_var(tape, mel, true);
    Var flat = nn::reshape(tape, synth, {b.mel.dim(0), tape.val(synth).dim(2)});
    Var mel_term{}, stft_term{};
    Var loss = spectral_loss(tape, flat, b.wav_seg, cfg.stft_resolutions, cfg.mel, &mel_term, &stft_term);
    const double lv = tape.val(loss).at(0);
    if (!std::isfinite(lv)) {
      throw NumericError("vocoder pretraining diverged (non-finite loss) at step " + std::to_string(step));
    }
    tape.backward(loss);
    opt.step();
    if (log.is_open()) {
      log << step << fmt_row({lv, tape.val(mel_term).at(0), tape.val(stft_term).at(0)}) << "\n";
    }
  }

  stats.final_loss = eval_loss();
  return stats;
}

PretrainStats pretrain_teacher(Denoiser& denoiser, const NoiseSchedule& sched, const Dataset& ds,
                               const TeacherPretrainConfig& cfg) {
  if (ds.items.empty()) throw DataError("pretrain_teacher: empty dataset");
  const MelNorm norm = mel_stats(ds);
  auto normalize = [&](Tensor t) {
    for (auto& v : t.data) v = (v - norm.mean) / norm.scale;
    return t;
  };
  Rng rng(cfg.seed);
  Rng batch_rng = rng.fork(21);
  Rng noise_rng = rng.fork(22);
  Rng eval_rng = rng.fork(23);

  std::ofstream log;
  if (!cfg.log_path.empty()) {
    log.open(cfg.log_path);
    log << "step,eps_mse\n";
  }

  // held-out fixture with frozen noise draws and steps
  std::vector<size_t> eval_items;
  for (size_t i = 0; i < std::min<size_t>(4, ds.eval_idx.size()); ++i) eval_items.push_back(ds.eval_idx[i]);
  Batch eval_b = fixed_batch(ds, eval_items, cfg.crop_frames);
  eval_b.mel = normalize(eval_b.mel);
  const Index Ne = eval_b.mel.dim(0);
  Tensor eval_eps = Tensor::randn(eval_b.mel.shape, eval_rng);
  std::vector<Index> eval_t;
  for (Index n = 0; n < Ne; ++n) eval_t.push_back(eval_rng.uniform_int(1, sched.steps()));
  const Tensor eval_xt = diffuse(eval_b.mel, eval_t, eval_eps, sched);

  auto eval_mse = [&]() {
    const Tensor pred = denoiser.infer(eval_xt, eval_b.content, eval_b.speaker, eval_t);
    double acc = 0.0;
    for (Index i = 0; i < pred.numel(); ++i) {
      const double d = pred.at(i) - eval_eps.at(i);
      acc += d * d;
    }
    return acc / static_cast<double>(pred.numel());
  };

  PretrainStats stats;
  stats.initial_loss = eval_mse();
  stats.steps = cfg.steps;

  nn::Adam opt(denoiser.params().all(), {cfg.lr, cfg.beta1, cfg.beta2, 1e-8});
  for (Index step = 1; step <= cfg.steps; ++step) {
    Batch b = sample_batch(ds, ds.train_idx, cfg.batch, cfg.crop_frames, batch_rng);
    b.mel = normalize(b.mel);
    std::vector<Index> t;
    for (Index n = 0; n < cfg.batch; ++n) t.push_back(batch_rng.uniform_int(1, sched.steps()));
    Tensor eps = Tensor::randn(b.mel.shape, noise_rng);
    Tensor x_t = diffuse(b.mel, t, eps, sched);

    Tape tape;
    Var x = tape.constant(x_t);
    Var pred = denoiser.forward(tape, x, b.content, b.speaker, t, true);
    Var loss = nn::mse_mean(tape, pred, tape.constant(eps));
    const double lv = tape.val(loss).at(0);
    if (!std::isfinite(lv)) {
      throw NumericError("teacher pretraining diverged (non-finite loss) at step " + std::to_string(step));
    }
    tape.backward(loss);
    opt.step();
    if (log.is_open()) log << step << fmt_row({lv}) << "\n";
  }

  stats.final_loss = eval_mse();
  return stats;
}

}  // namespace vpfd
