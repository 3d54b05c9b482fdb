#pragma once

#include <string>
#include <vector>

#include "vpfd/ops.hpp"
#include "vpfd/param_store.hpp"
#include "vpfd/schedule.hpp"

namespace vpfd {

// Conditional noise predictor eps(x_t, t, s, p): a U-Net-style stack of 12
// weight-normalized convolutions with gated linear units and two
// downsampling/upsampling stages. Content frames are concatenated to the
// input channel-wise; speaker and time embeddings are projected and
// broadcast-added after the input and each downsampling stage.
struct DenoiserConfig {
  nn::Index n_mels = 80;
  nn::Index hidden = 24;  // 512 at full scale
  nn::Index content_dim = 32;
  nn::Index speaker_dim = 64;
  nn::Index kernel = 5;
  nn::Index down_kernel = 4;  // stride-2 resampling convs
  nn::Index time_dim = 64;

  void validate() const;
};

class Denoiser {
 public:
  Denoiser(const DenoiserConfig& cfg, uint64_t init_seed);

  // x_t (N, n_mels, T), content (N, content_dim, T), speaker (N, speaker_dim),
  // one diffusion step index per item. T is padded internally to a multiple
  // of 4 and the output cropped back.
  nn::Var forward(nn::Tape& tape, nn::Var x_t, const nn::Tensor& content, const nn::Tensor& speaker,
                  const std::vector<nn::Index>& t, bool trainable);

  nn::Tensor infer(const nn::Tensor& x_t, const nn::Tensor& content, const nn::Tensor& speaker,
                   const std::vector<nn::Index>& t);

  nn::ParamStore& params() { return params_; }
  const nn::ParamStore& params() const { return params_; }
  const DenoiserConfig& config() const { return cfg_; }

  // sinusoidal step embedding, (N, time_dim)
  nn::Tensor time_embedding(const std::vector<nn::Index>& t) const;

 private:
  DenoiserConfig cfg_;
  nn::ParamStore params_;
};

// Deterministic strided sampler: applies the reverse mean update at each step
// of an evenly spaced subset of {t_start..1}; no posterior noise is added, so
// trajectories are reproducible fixtures.
nn::Tensor multi_step_reverse(const nn::Tensor& x_start, const nn::Tensor& content,
                              const nn::Tensor& speaker, Denoiser& denoiser, const NoiseSchedule& sched,
                              nn::Index n_steps, nn::Index t_start = 0 /* 0 = sched.steps() */);

}  // namespace vpfd
