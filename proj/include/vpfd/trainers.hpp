#pragma once

#include <string>

#include "vpfd/dataset.hpp"
#include "vpfd/discriminators.hpp"
#include "vpfd/denoiser.hpp"
#include "vpfd/schedule.hpp"
#include "vpfd/vocoder.hpp"

namespace vpfd {

struct PretrainStats {
  double initial_loss = 0.0;
  double final_loss = 0.0;
  nn::Index steps = 0;
};

// Reconstruction pretraining: L1 between log-mels of the synthesized and real
// segments plus a multi-resolution STFT magnitude loss (linear + log L1). No
// adversarial term; this is a deterministic recipe for producing the frozen
// feature extractor, with real full-scale weights loadable through the same
// checkpoint path.
struct VocoderPretrainConfig {
  nn::Index steps = 1200;
  nn::Index batch = 8;
  nn::Index crop_frames = 32;
  double lr = 2e-4;
  double beta1 = 0.8;
  double beta2 = 0.99;
  std::vector<StftRes> stft_resolutions{{128, 32, 128}, {256, 64, 256}, {64, 16, 64}};
  MelConfig mel;
  uint64_t seed = 1;
  std::string log_path;  // CSV (step, loss, mel_l1, stft); empty = no log
};

PretrainStats pretrain_vocoder(Vocoder& vocoder, const Dataset& ds, const VocoderPretrainConfig& cfg);

// Standard noise-prediction objective with same-utterance conditioning.
struct TeacherPretrainConfig {
  nn::Index steps = 1200;
  nn::Index batch = 8;
  nn::Index crop_frames = 64;
  double lr = 2e-4;
  double beta1 = 0.9;
  double beta2 = 0.99;
  uint64_t seed = 1;
  std::string log_path;
};

// initial/final_loss are the held-out noise-prediction MSE on a fixed fixture.
PretrainStats pretrain_teacher(Denoiser& denoiser, const NoiseSchedule& sched, const Dataset& ds,
                               const TeacherPretrainConfig& cfg);

}  // namespace vpfd
