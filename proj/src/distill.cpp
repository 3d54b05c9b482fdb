#include "vpfd/distill.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "vpfd/adam.hpp"
#include "vpfd/checkpoint.hpp"
#include "vpfd/errors.hpp"
#include "vpfd/ops.hpp"

namespace vpfd {

namespace fs = std::filesystem;
using nn::Index;
using nn::Tape;
using nn::Tensor;
using nn::Var;

DiscVariant parse_variant(const std::string& name) {
  if (name == "vpfd") return DiscVariant::Vpfd;
  if (name == "vwd") return DiscVariant::Vwd;
  if (name == "vwd_no_mpd") return DiscVariant::VwdNoMpd;
  if (name == "vwd_no_mrd") return DiscVariant::VwdNoMrd;
  if (name == "meld_small") return DiscVariant::MeldSmall;
  if (name == "meld_large") return DiscVariant::MeldLarge;
  throw ConfigError("unknown discriminator variant: " + name);
}

std::string variant_name(DiscVariant v) {
  switch (v) {
    case DiscVariant::Vpfd: return "vpfd";
    case DiscVariant::Vwd: return "vwd";
    case DiscVariant::VwdNoMpd: return "vwd_no_mpd";
    case DiscVariant::VwdNoMrd: return "vwd_no_mrd";
    case DiscVariant::MeldSmall: return "meld_small";
    case DiscVariant::MeldLarge: return "meld_large";
  }
  return "?";
}

nn::Tensor one_step_generate(Denoiser& student, const Tensor& x_r, const Tensor& content,
                             const Tensor& speaker, const NoiseSchedule& sched, Index t_s,
                             const Tensor& eps) {
  sched.check_t(t_s);
  const std::vector<Index> t(static_cast<size_t>(x_r.dim(0)), t_s);
  const Tensor x_t = diffuse(x_r, t, eps, sched);
  const Tensor eps_pred = student.infer(x_t, content, speaker, t);
  return reverse_mu(x_t, t, eps_pred, sched);
}

void init_student(Denoiser& student, const Denoiser& teacher) {
  student.params().copy_values_from(teacher.params());
}

nn::Tensor DistillTrainer::normalize_mel(const Tensor& mel) const {
  Tensor out = mel;
  for (auto& v : out.data) v = (v - norm_.mean) / norm_.scale;
  return out;
}

nn::Tensor DistillTrainer::denormalize_mel(const Tensor& mel) const {
  Tensor out = mel;
  for (auto& v : out.data) v = v * norm_.scale + norm_.mean;
  return out;
}

DistillTrainer::DistillTrainer(const DistillConfig& cfg, const Dataset& ds, const NoiseSchedule& sched,
                               const DenoiserConfig& dn_cfg, const VocoderConfig& voc_cfg,
                               const std::string& teacher_ckpt_path,
                               const std::string& vocoder_ckpt_path,
                               const ConditioningProviders* providers)
    : cfg_(cfg),
      ds_(ds),
      norm_(mel_stats(ds)),
      sched_(sched),
      t_s_(cfg.student_t == 0 ? sched.steps() : cfg.student_t),
      rng_(cfg.seed),
      batch_rng_(rng_.fork(31)),
      noise_rng_(rng_.fork(32)),
      distill_rng_(rng_.fork(33)),
      providers_(providers) {
  sched_.check_t(t_s_);
  if (cfg_.batch < 1 || cfg_.crop_frames < 4) throw ConfigError("distill: bad batch or crop");

  teacher_ = std::make_unique<Denoiser>(dn_cfg, rng_.fork(41).seed());
  load_params(load_checkpoint(teacher_ckpt_path), teacher_->params());
  student_ = std::make_unique<Denoiser>(dn_cfg, rng_.fork(42).seed());
  init_student(*student_, *teacher_);

  vocoder_full_ = std::make_unique<Vocoder>(voc_cfg, rng_.fork(43).seed());
  const CheckpointData voc_ck = load_checkpoint(vocoder_ckpt_path);
  load_params(voc_ck, vocoder_full_->params());

  std::vector<nn::Param*> d_params;
  const uint64_t head_seed = rng_.fork(44).seed();
  switch (cfg_.variant) {
    case DiscVariant::Vpfd: {
      extractor_ = std::make_unique<Vocoder>(voc_cfg, rng_.fork(45).seed(), cfg_.vpfd.L);
      if (cfg_.extractor_pretrained) load_params(voc_ck, extractor_->params());
      head_ = std::make_unique<VpfdHead>(voc_cfg, cfg_.vpfd, head_seed);
      for (auto* p : head_->params().all()) d_params.push_back(p);
      if (!cfg_.extractor_frozen) {
        for (auto* p : extractor_->params().all()) d_params.push_back(p);
      }
      break;
    }
    case DiscVariant::Vwd:
    case DiscVariant::VwdNoMpd:
    case DiscVariant::VwdNoMrd: {
      if (cfg_.variant != DiscVariant::VwdNoMpd) {
        mpd_ = std::make_unique<Mpd>(cfg_.mpd, head_seed);
        for (auto* p : mpd_->params().all()) d_params.push_back(p);
      }
      if (cfg_.variant != DiscVariant::VwdNoMrd) {
        mrd_ = std::make_unique<Mrd>(cfg_.mrd, rng_.fork(46).seed());
        for (auto* p : mrd_->params().all()) d_params.push_back(p);
      }
      break;
    }
    case DiscVariant::MeldSmall:
    case DiscVariant::MeldLarge: {
      MeldConfig mc;
      mc.channels = cfg_.variant == DiscVariant::MeldSmall ? cfg_.meld_small_channels
                                                           : cfg_.meld_large_channels;
      meld_ = std::make_unique<Meld>(mc, dn_cfg.n_mels, head_seed);
      for (auto* p : meld_->params().all()) d_params.push_back(p);
      break;
    }
  }

  opt_d_ = std::make_unique<nn::Adam>(std::move(d_params), nn::AdamConfig{cfg_.lr, cfg_.beta1, cfg_.beta2, 1e-8});
  opt_g_ = std::make_unique<nn::Adam>(student_->params().all(),
                                      nn::AdamConfig{cfg_.lr, cfg_.beta1, cfg_.beta2, 1e-8});

  if (providers_ == nullptr) {
    CondConfig cc;
    cc.speaker_dim = dn_cfg.speaker_dim;
    cc.content_dim = dn_cfg.content_dim;
    owned_providers_.emplace(cc, dn_cfg.n_mels);
    providers_ = &*owned_providers_;
  }

  // evaluation fixtures: held-out items, frozen noise, teacher reference
  std::vector<size_t> eval_items;
  for (size_t i = 0; i < std::min<size_t>(static_cast<size_t>(cfg_.eval_items), ds_.eval_idx.size()); ++i) {
    eval_items.push_back(ds_.eval_idx[i]);
  }
  eval_batch_ = fixed_batch(ds_, eval_items, cfg_.crop_frames);
  Rng eval_rng = rng_.fork(47);
  eval_eps_ = Tensor::randn(eval_batch_.mel.shape, eval_rng);
  const Tensor x_ts = diffuse(normalize_mel(eval_batch_.mel), t_s_, eval_eps_, sched_);
  eval_teacher_ref_ = denormalize_mel(multi_step_reverse(x_ts, eval_batch_.content, eval_batch_.speaker,
                                                         *teacher_, sched_, cfg_.teacher_ref_steps, t_s_));
}

std::vector<DiscOutput> DistillTrainer::discriminate(Tape& tape, const Tensor* mel_const, Var mel_var,
                                                     bool head_trainable, bool extractor_trainable) {
  Var mel = mel_const != nullptr ? tape.constant(*mel_const) : mel_var;
  switch (cfg_.variant) {
    case DiscVariant::Vpfd: {
      FeaturePyramid pyr = extractor_->features(tape, mel, cfg_.vpfd.L, extractor_trainable);
      return {head_->score(tape, pyr, head_trainable)};
    }
    case DiscVariant::Vwd:
    case DiscVariant::VwdNoMpd:
    case DiscVariant::VwdNoMrd: {
      Var wav = vocoder_full_->synthesize_var(tape, mel, false);
      std::vector<DiscOutput> outs;
      if (mpd_) {
        for (auto& o : mpd_->score(tape, wav, head_trainable)) outs.push_back(std::move(o));
      }
      if (mrd_) {
        for (auto& o : mrd_->score(tape, wav, head_trainable)) outs.push_back(std::move(o));
      }
      return outs;
    }
    case DiscVariant::MeldSmall:
    case DiscVariant::MeldLarge:
      return {meld_->score(tape, mel, head_trainable)};
  }
  return {};
}

LossReport DistillTrainer::step() { return step_on(nullptr); }

LossReport DistillTrainer::step_on(const std::vector<size_t>* forced_items) {
  Batch b;
  if (forced_items != nullptr) {
    std::vector<Index> starts;
    for (size_t pick : *forced_items) {
      starts.push_back(batch_rng_.uniform_int(0, ds_.items[pick].mel.frames - cfg_.crop_frames));
    }
    b = crop_batch(ds_, *forced_items, starts, cfg_.crop_frames);
  } else {
    b = sample_batch(ds_, ds_.train_idx, cfg_.batch, cfg_.crop_frames, batch_rng_);
  }
  const Index N = b.mel.dim(0);
  const std::vector<Index> ts(static_cast<size_t>(N), t_s_);
  LossReport report;

  // single student forward per step: its value feeds the discriminator update
  // behind a stop gradient, its graph then drives the generator update against
  // the freshly updated discriminator
  Tape tape;
  const Tensor eps_g = Tensor::randn(b.mel.shape, noise_rng_);
  const Tensor x_ts_g = diffuse(normalize_mel(b.mel), ts, eps_g, sched_);
  Var x_t = tape.constant(x_ts_g);
  Var eps_pred = student_->forward(tape, x_t, b.content, b.speaker, ts, true);
  // reverse mean, affine in the prediction
  const double a = sched_.alpha_at(t_s_);
  const double ab = sched_.alpha_bar_at(t_s_);
  const double coef = (1.0 - a) / std::sqrt(1.0 - ab);
  const double inv = 1.0 / std::sqrt(a);
  Var x_g = nn::mul_scalar(tape, nn::sub(tape, x_t, nn::mul_scalar(tape, eps_pred, coef)), inv);
  // discriminators and the vocoder consume raw-scale mels
  Var x_g_mel = nn::add_scalar(tape, nn::mul_scalar(tape, x_g, norm_.scale), norm_.mean);

  {
    Tape d_tape;
    const Tensor x_g_d = tape.val(x_g_mel);
    std::vector<DiscOutput> real = discriminate(d_tape, &b.mel, {}, true, !cfg_.extractor_frozen);
    std::vector<DiscOutput> fake = discriminate(d_tape, &x_g_d, {}, true, !cfg_.extractor_frozen);
    Var d_loss = total_d(d_tape, lsgan_d(d_tape, real, fake));
    report.d_loss = d_tape.val(d_loss).at(0);
    if (std::isfinite(report.d_loss)) {
      d_tape.backward(d_loss);
      opt_d_->step();
    }
  }

  {
    std::vector<DiscOutput> real = discriminate(tape, &b.mel, {}, false, false);
    std::vector<DiscOutput> fake = discriminate(tape, nullptr, x_g_mel, false, false);
    Var adv = lsgan_g(tape, fake);
    Var fm = feature_matching(tape, detach_features(tape, real), fake);

    // distillation branch: teacher reconstructs the re-noised student output
    // behind a stop gradient
    std::vector<Index> td;
    for (Index n = 0; n < N; ++n) td.push_back(distill_rng_.uniform_int(1, sched_.steps()));
    const Tensor x_phi = tape.val(x_g);
    const Tensor eps_t = Tensor::randn(x_phi.shape, distill_rng_);
    const Tensor x_phi_t = diffuse(x_phi, td, eps_t, sched_);
    const Tensor x_theta = reverse_mu(x_phi_t, td, teacher_->infer(x_phi_t, b.content, b.speaker, td), sched_);
    Var dist = score_distillation(tape, x_g, x_theta, td, sched_, cfg_.distill_l2);

    Var g_loss = total_g(tape, adv, fm, dist, cfg_.weights);
    report.g_adv = tape.val(adv).at(0);
    report.g_fm = tape.val(fm).at(0);
    report.g_distill = tape.val(dist).at(0);
    report.g_total = tape.val(g_loss).at(0);
    if (report.finite()) {
      tape.backward(g_loss);
      opt_g_->step();
    }
  }

  ++steps_done_;
  if (!report.finite()) {
    throw NumericError("distillation diverged (non-finite loss) at step " + std::to_string(steps_done_));
  }
  return report;
}

DistillTrainer::EvalMetrics DistillTrainer::evaluate() {
  EvalMetrics m;
  const Tensor x_stu = denormalize_mel(one_step_generate(*student_, normalize_mel(eval_batch_.mel),
                                                         eval_batch_.content, eval_batch_.speaker,
                                                         sched_, t_s_, eval_eps_));

  double l1 = 0.0;
  for (Index i = 0; i < x_stu.numel(); ++i) l1 += std::abs(x_stu.at(i) - eval_teacher_ref_.at(i));
  m.mel_l1_teacher = l1 / static_cast<double>(x_stu.numel());

  // audio-domain proxy: log-spectral distance between re-synthesized outputs
  const Tensor wav_stu = vocoder_full_->synthesize_tensor(x_stu);
  const Tensor wav_ref = vocoder_full_->synthesize_tensor(eval_teacher_ref_);
  const StftPlan plan = cfg_.mel.stft_plan();
  const Index bins = plan.bins();
  const Index frames = plan.frames_for(wav_stu.dim(1));
  std::vector<double> ms(static_cast<size_t>(bins * frames)), mr(ms.size());
  double lsd = 0.0;
  for (Index n = 0; n < wav_stu.dim(0); ++n) {
    plan.magnitude(wav_stu.ptr() + n * wav_stu.dim(1), wav_stu.dim(1), ms.data());
    plan.magnitude(wav_ref.ptr() + n * wav_ref.dim(1), wav_ref.dim(1), mr.data());
    double item = 0.0;
    for (Index f = 0; f < frames; ++f) {
      double acc = 0.0;
      for (Index k = 0; k < bins; ++k) {
        const double d = std::log(std::max(ms[static_cast<size_t>(k * frames + f)], 1e-8)) -
                         std::log(std::max(mr[static_cast<size_t>(k * frames + f)], 1e-8));
        acc += d * d;
      }
      item += std::sqrt(acc / static_cast<double>(bins));
    }
    lsd += item / static_cast<double>(frames);
  }
  m.lsd = lsd / static_cast<double>(wav_stu.dim(0));

  // speaker proxy: cosine between toy embeddings of output and source
  double cos_acc = 0.0;
  for (Index n = 0; n < x_stu.dim(0); ++n) {
    const Tensor es = providers_->embed_speaker(tensor_to_mel(x_stu, n));
    const Tensor er = providers_->embed_speaker(tensor_to_mel(eval_batch_.mel, n));
    double dot = 0.0;
    for (Index i = 0; i < es.numel(); ++i) dot += es.at(i) * er.at(i);
    cos_acc += dot;
  }
  m.spk_cos = cos_acc / static_cast<double>(x_stu.dim(0));
  return m;
}

void DistillTrainer::run(const std::string& run_dir) {
  fs::create_directories(run_dir);
  std::ofstream losses(fs::path(run_dir) / "losses.csv");
  losses << "step,d_loss,g_adv,g_fm,g_distill,g_total\n";
  std::ofstream metrics(fs::path(run_dir) / "metrics.csv");
  metrics << "step,mel_l1_teacher,lsd,spk_cos\n";

  char buf[512];
  auto log_metrics = [&](Index step) {
    const EvalMetrics m = evaluate();
    std::snprintf(buf, sizeof(buf), "%lld,%.17g,%.17g,%.17g\n", static_cast<long long>(step),
                  m.mel_l1_teacher, m.lsd, m.spk_cos);
    metrics << buf;
    return m;
  };

  const EvalMetrics init_m = log_metrics(0);

  CheckpointData last_good;
  auto snapshot = [&]() {
    CheckpointData ck;
    ck.meta["kind"] = "student";
    ck.meta["steps"] = std::to_string(steps_done_);
    ck.meta["variant"] = variant_name(cfg_.variant);
    ck.meta["student_t"] = std::to_string(t_s_);
    char normbuf[64];
    std::snprintf(normbuf, sizeof(normbuf), "%.17g", norm_.mean);
    ck.meta["mel_mean"] = normbuf;
    std::snprintf(normbuf, sizeof(normbuf), "%.17g", norm_.scale);
    ck.meta["mel_scale"] = normbuf;
    store_params(ck, student_->params());
    return ck;
  };
  last_good = snapshot();

  bool done = false;
  for (Index epoch = 0; epoch < cfg_.epochs && !done; ++epoch) {
    // shuffled pass over the training items; short corpora wrap around so a
    // full batch is always formed
    std::vector<size_t> order = ds_.train_idx;
    for (size_t i = order.size(); i > 1; --i) {
      const size_t j = static_cast<size_t>(batch_rng_.uniform_int(0, static_cast<int64_t>(i) - 1));
      std::swap(order[i - 1], order[j]);
    }
    const Index per_epoch =
        std::max<Index>(1, (static_cast<Index>(order.size()) + cfg_.batch - 1) / cfg_.batch);
    for (Index it = 0; it < per_epoch && !done; ++it) {
      std::vector<size_t> items;
      for (Index n = 0; n < cfg_.batch; ++n) {
        items.push_back(order[static_cast<size_t>((it * cfg_.batch + n) % static_cast<Index>(order.size()))]);
      }
      LossReport r;
      try {
        r = step_on(&items);
      } catch (const NumericError&) {
        save_checkpoint((fs::path(run_dir) / "student_lastgood.ckpt").string(), last_good);
        throw;
      }
      std::snprintf(buf, sizeof(buf), "%lld,%.17g,%.17g,%.17g,%.17g,%.17g\n",
                    static_cast<long long>(steps_done_), r.d_loss, r.g_adv, r.g_fm, r.g_distill,
                    r.g_total);
      losses << buf;
      last_good = snapshot();
      if (cfg_.eval_every > 0 && steps_done_ % cfg_.eval_every == 0) log_metrics(steps_done_);
      if (cfg_.checkpoint_every > 0 && steps_done_ % cfg_.checkpoint_every == 0) {
        save_checkpoint((fs::path(run_dir) / ("student_step" + std::to_string(steps_done_) + ".ckpt")).string(),
                        last_good);
      }
      if (cfg_.max_steps > 0 && steps_done_ >= cfg_.max_steps) done = true;
    }
  }

  const EvalMetrics final_m = log_metrics(steps_done_);
  CheckpointData final_ck = snapshot();
  final_ck.meta["mel_l1_teacher_init"] = std::to_string(init_m.mel_l1_teacher);
  final_ck.meta["mel_l1_teacher_final"] = std::to_string(final_m.mel_l1_teacher);
  save_checkpoint((fs::path(run_dir) / "student.ckpt").string(), final_ck);

  std::ofstream report(fs::path(run_dir) / "report.txt");
  report << "variant: " << variant_name(cfg_.variant) << "\n"
         << "steps: " << steps_done_ << "\n"
         << "mel_l1_teacher: init " << init_m.mel_l1_teacher << " -> final " << final_m.mel_l1_teacher << "\n"
         << "lsd: init " << init_m.lsd << " -> final " << final_m.lsd << "\n"
         << "spk_cos: init " << init_m.spk_cos << " -> final " << final_m.spk_cos << "\n";
}

Waveform convert_voice(const Waveform& source, const Waveform& target, Denoiser& student,
                       Vocoder& vocoder, const ConditioningProviders& providers, const MelConfig& mel_cfg,
                       const NoiseSchedule& sched, Index t_s, uint64_t seed, const MelNorm& norm) {
  const MelSpectrogram mel_src = extract_mel(source, mel_cfg);
  const MelSpectrogram mel_tgt = extract_mel(target, mel_cfg);

  Tensor x_r = mel_to_tensor(mel_src);
  for (auto& v : x_r.data) v = (v - norm.mean) / norm.scale;
  Tensor content({1, providers.config().content_dim, mel_src.frames});
  const Tensor p = providers.embed_content(mel_src);
  content.data = p.data;
  Tensor speaker({1, providers.config().speaker_dim});
  const Tensor s = providers.embed_speaker(mel_tgt);
  speaker.data = s.data;

  Rng rng(seed);
  const Tensor eps = Tensor::randn(x_r.shape, rng);
  if (t_s == 0) t_s = sched.steps();
  Tensor x_g = one_step_generate(student, x_r, content, speaker, sched, t_s, eps);
  for (auto& v : x_g.data) v = v * norm.scale + norm.mean;

  const Tensor wav = vocoder.synthesize_tensor(x_g);
  Waveform out;
  out.sample_rate = source.sample_rate;
  out.samples.assign(wav.data.begin(), wav.data.end());
  return out;
}

}  // namespace vpfd
