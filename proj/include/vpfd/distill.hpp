#pragma once

#include <memory>
#include <optional>
#include <string>

#include "vpfd/adam.hpp"
#include "vpfd/conditioning.hpp"
#include "vpfd/dataset.hpp"
#include "vpfd/denoiser.hpp"
#include "vpfd/discriminators.hpp"
#include "vpfd/losses.hpp"
#include "vpfd/schedule.hpp"
#include "vpfd/trainers.hpp"
#include "vpfd/vocoder.hpp"

namespace vpfd {

enum class DiscVariant { Vpfd, Vwd, VwdNoMpd, VwdNoMrd, MeldSmall, MeldLarge };

DiscVariant parse_variant(const std::string& name);
std::string variant_name(DiscVariant v);

struct DistillConfig {
  nn::Index epochs = 100;
  nn::Index max_steps = 0;  // 0 = epochs only
  nn::Index batch = 32;
  double lr = 2e-4;
  double beta1 = 0.5;
  double beta2 = 0.9;

  DiscVariant variant = DiscVariant::Vpfd;
  VpfdHeadConfig vpfd;
  MpdConfig mpd;
  MrdConfig mrd;
  nn::Index meld_small_channels = 4;
  nn::Index meld_large_channels = 8;

  bool extractor_pretrained = true;
  bool extractor_frozen = true;

  nn::Index student_t = 0;  // 0 = full noise (t = T)
  bool distill_l2 = false;
  LossWeights weights;

  nn::Index crop_frames = 128;
  uint64_t seed = 1;
  nn::Index eval_every = 100;
  nn::Index eval_items = 4;
  nn::Index teacher_ref_steps = 10;
  nn::Index checkpoint_every = 0;

  MelConfig mel;  // used by the audio-domain proxy metric
};

// x_g = one reverse-mean step applied to x_r diffused to t_s with the given
// noise; this is the student's entire generation path.
nn::Tensor one_step_generate(Denoiser& student, const nn::Tensor& x_r, const nn::Tensor& content,
                             const nn::Tensor& speaker, const NoiseSchedule& sched, nn::Index t_s,
                             const nn::Tensor& eps);

// Copies every teacher parameter value into the student.
void init_student(Denoiser& student, const Denoiser& teacher);

// Adversarial distillation of the teacher's reverse process into a one-step
// student. One step() = one discriminator update followed by one generator
// update; the teacher is never touched, and frozen extractors receive no
// optimizer slot at all.
class DistillTrainer {
 public:
  DistillTrainer(const DistillConfig& cfg, const Dataset& ds, const NoiseSchedule& sched,
                 const DenoiserConfig& dn_cfg, const VocoderConfig& voc_cfg,
                 const std::string& teacher_ckpt_path, const std::string& vocoder_ckpt_path,
                 const ConditioningProviders* providers = nullptr);

  LossReport step();
  // explicit batch items (the epoch loop's shuffled chunks); crops stay random
  LossReport step_on(const std::vector<size_t>* forced_items);

  struct EvalMetrics {
    double mel_l1_teacher = 0.0;  // student one-step vs teacher multi-step reference
    double lsd = 0.0;             // log-spectral distance of re-synthesized audio
    double spk_cos = 0.0;         // toy speaker-embedding cosine to the source
  };
  EvalMetrics evaluate();

  // epoch loop + CSV logs + checkpoints under run_dir
  void run(const std::string& run_dir);

  Denoiser& student() { return *student_; }
  const MelNorm& mel_norm() const { return norm_; }
  Denoiser& teacher() { return *teacher_; }
  Vocoder& vocoder_full() { return *vocoder_full_; }
  Vocoder* extractor() { return extractor_.get(); }  // null for mel-domain variants
  nn::Index steps_done() const { return steps_done_; }
  const DistillConfig& config() const { return cfg_; }
  nn::Index student_step_t() const { return t_s_; }

 private:
  std::vector<DiscOutput> discriminate(nn::Tape& tape, const nn::Tensor* mel_const, nn::Var mel_var,
                                       bool head_trainable, bool extractor_trainable);
  nn::Tensor normalize_mel(const nn::Tensor& mel) const;
  nn::Tensor denormalize_mel(const nn::Tensor& mel) const;

  DistillConfig cfg_;
  const Dataset& ds_;
  MelNorm norm_;
  NoiseSchedule sched_;
  nn::Index t_s_;

  std::unique_ptr<Denoiser> teacher_;
  std::unique_ptr<Denoiser> student_;
  std::unique_ptr<Vocoder> vocoder_full_;
  std::unique_ptr<Vocoder> extractor_;
  std::unique_ptr<VpfdHead> head_;
  std::unique_ptr<Mpd> mpd_;
  std::unique_ptr<Mrd> mrd_;
  std::unique_ptr<Meld> meld_;

  std::unique_ptr<nn::Adam> opt_d_;
  std::unique_ptr<nn::Adam> opt_g_;

  Rng rng_;
  Rng batch_rng_;
  Rng noise_rng_;
  Rng distill_rng_;

  // frozen evaluation fixtures
  Batch eval_batch_;
  nn::Tensor eval_eps_;
  nn::Tensor eval_teacher_ref_;
  const ConditioningProviders* providers_;
  std::optional<ConditioningProviders> owned_providers_;

  nn::Index steps_done_ = 0;
};

// One-shot conversion: content/timbre from source, speaker identity from
// target, one student step, full vocoder synthesis.
Waveform convert_voice(const Waveform& source, const Waveform& target, Denoiser& student,
                       Vocoder& vocoder, const ConditioningProviders& providers, const MelConfig& mel_cfg,
                       const NoiseSchedule& sched, nn::Index t_s, uint64_t seed,
                       const MelNorm& norm = MelNorm{});

}  // namespace vpfd
