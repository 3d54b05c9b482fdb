#include "vpfd/denoiser.hpp"

#include <cmath>

#include "vpfd/errors.hpp"
#include "vpfd/layers.hpp"

namespace vpfd {

using nn::Conv1dSpec;
using nn::Index;
using nn::Tape;
using nn::Tensor;
using nn::Var;

void DenoiserConfig::validate() const {
  if (n_mels < 1 || hidden < 1 || content_dim < 1 || speaker_dim < 1) {
    throw ConfigError("denoiser: dimensions must be positive");
  }
  if (kernel < 1 || kernel % 2 == 0) throw ConfigError("denoiser: kernel must be odd");
  if (down_kernel < 2 || down_kernel % 2 != 0) throw ConfigError("denoiser: down_kernel must be even");
  if (time_dim < 2 || time_dim % 2 != 0) throw ConfigError("denoiser: time_dim must be even");
}

Denoiser::Denoiser(const DenoiserConfig& cfg, uint64_t init_seed) : cfg_(cfg) {
  cfg.validate();
  Rng rng(init_seed);
  const Index h = cfg.hidden, k = cfg.kernel;

  nn::create_wn_conv(params_, "in", {2 * h, cfg.n_mels + cfg.content_dim, k}, rng);
  nn::create_wn_conv(params_, "down1", {2 * h, h, cfg.down_kernel}, rng);
  nn::create_wn_conv(params_, "down2", {2 * h, h, cfg.down_kernel}, rng);
  for (int i = 1; i <= 4; ++i) nn::create_wn_conv(params_, "mid" + std::to_string(i), {2 * h, h, k}, rng);
  nn::create_wn_conv_transpose(params_, "up1", {h, 2 * h, cfg.down_kernel}, rng);
  nn::create_wn_conv_transpose(params_, "up2", {h, 2 * h, cfg.down_kernel}, rng);
  nn::create_wn_conv(params_, "post1", {2 * h, h, k}, rng);
  nn::create_wn_conv(params_, "post2", {2 * h, h, k}, rng);
  nn::create_wn_conv(params_, "out", {cfg.n_mels, h, k}, rng);

  // conditioning produces a per-channel scale and shift (first half scale,
  // second half shift); scale starts at identity via zero-init weights
  for (int i = 0; i < 3; ++i) {
    nn::create_linear(params_, "cond" + std::to_string(i) + ".time", 2 * h, cfg.time_dim, rng);
    nn::create_linear(params_, "cond" + std::to_string(i) + ".spk", 2 * h, cfg.speaker_dim, rng);
  }
}

Tensor Denoiser::time_embedding(const std::vector<Index>& t) const {
  const Index N = static_cast<Index>(t.size());
  const Index half = cfg_.time_dim / 2;
  Tensor emb({N, cfg_.time_dim});
  for (Index n = 0; n < N; ++n) {
    for (Index i = 0; i < half; ++i) {
      const double freq = std::pow(10000.0, -static_cast<double>(i) / static_cast<double>(half));
      const double ang = static_cast<double>(t[static_cast<size_t>(n)]) * freq;
      emb.at(n, 2 * i) = std::sin(ang);
      emb.at(n, 2 * i + 1) = std::cos(ang);
    }
  }
  return emb;
}

Var Denoiser::forward(Tape& tape, Var x_t, const Tensor& content, const Tensor& speaker,
                      const std::vector<Index>& t, bool trainable) {
  const Tensor& vx = tape.val(x_t);
  if (vx.rank() != 3 || vx.dim(1) != cfg_.n_mels) throw std::invalid_argument("denoiser: bad x_t shape");
  if (content.rank() != 3 || content.dim(1) != cfg_.content_dim || content.dim(2) != vx.dim(2) ||
      content.dim(0) != vx.dim(0)) {
    throw std::invalid_argument("denoiser: content shape mismatch");
  }
  if (speaker.rank() != 2 || speaker.dim(1) != cfg_.speaker_dim || speaker.dim(0) != vx.dim(0)) {
    throw std::invalid_argument("denoiser: speaker shape mismatch");
  }
  const Index T = vx.dim(2);
  const Index pad = (4 - T % 4) % 4;
  const Index k = cfg_.kernel, kp = (k - 1) / 2;
  const Index dpad = (cfg_.down_kernel - 2) / 2;

  Var temb = tape.constant(time_embedding(t));
  Var spk = tape.constant(speaker);
  const Index h = cfg_.hidden;
  auto cond = [&](int i, Var feat) {
    const std::string base = "cond" + std::to_string(i);
    Var a = nn::linear_layer(tape, params_, base + ".time", temb, trainable);
    Var b = nn::linear_layer(tape, params_, base + ".spk", spk, trainable);
    Var both = nn::add(tape, a, b);  // (N, 2h): scale offsets then shifts
    Var scale = nn::add_scalar(tape, nn::slice_cols(tape, both, 0, h), 1.0);
    Var shift = nn::slice_cols(tape, both, h, h);
    return nn::add_time_broadcast(tape, nn::mul_time_broadcast(tape, feat, scale), shift);
  };

  Var x = nn::concat_channels(tape, x_t, tape.constant(content));
  if (pad > 0) x = nn::pad_time(tape, x, 0, pad);

  Var h0 = nn::glu(tape, nn::wn_conv1d(tape, params_, "in", x, {1, 1, kp}, trainable));
  h0 = cond(0, h0);

  Var d1 = nn::glu(tape, nn::wn_conv1d(tape, params_, "down1", h0, {2, 1, dpad}, trainable));
  d1 = cond(1, d1);

  Var d2 = nn::glu(tape, nn::wn_conv1d(tape, params_, "down2", d1, {2, 1, dpad}, trainable));
  d2 = cond(2, d2);

  Var m = d2;
  for (int i = 1; i <= 4; ++i) {
    m = nn::glu(tape, nn::wn_conv1d(tape, params_, "mid" + std::to_string(i), m, {1, 1, kp}, trainable));
  }

  Var u1 = nn::glu(tape, nn::wn_conv_transpose1d(tape, params_, "up1", m, 2, dpad, trainable));
  u1 = nn::add(tape, u1, d1);
  Var u2 = nn::glu(tape, nn::wn_conv_transpose1d(tape, params_, "up2", u1, 2, dpad, trainable));
  u2 = nn::add(tape, u2, h0);

  Var p1 = nn::glu(tape, nn::wn_conv1d(tape, params_, "post1", u2, {1, 1, kp}, trainable));
  Var p2 = nn::glu(tape, nn::wn_conv1d(tape, params_, "post2", p1, {1, 1, kp}, trainable));
  Var out = nn::wn_conv1d(tape, params_, "out", p2, {1, 1, kp}, trainable);

  if (pad > 0) out = nn::slice_time(tape, out, 0, T);
  return out;
}

Tensor Denoiser::infer(const Tensor& x_t, const Tensor& content, const Tensor& speaker,
                       const std::vector<Index>& t) {
  Tape tape;
  Var x = tape.constant(x_t);
  Var y = forward(tape, x, content, speaker, t, false);
  return tape.val(y);
}

Tensor multi_step_reverse(const Tensor& x_start, const Tensor& content, const Tensor& speaker,
                          Denoiser& denoiser, const NoiseSchedule& sched, Index n_steps, Index t_start) {
  if (t_start == 0) t_start = sched.steps();
  sched.check_t(t_start);
  if (n_steps < 1 || n_steps > sched.steps()) throw std::out_of_range("multi_step_reverse: bad n_steps");
  Tensor x = x_start;
  const std::vector<Index> schedule = strided_steps(t_start, n_steps);
  const size_t N = static_cast<size_t>(x.dim(0));
  // Deterministic strided updates: estimate the clean signal at the current
  // level, then re-project it to the next level with the same noise estimate.
  // Between adjacent levels (and at t = 1, where 1 - abar_1 = beta_1) this
  // coincides with the reverse mean of the single-step update.
  for (size_t k = 0; k < schedule.size(); ++k) {
    const Index t = schedule[k];
    const std::vector<Index> tv(N, t);
    const Tensor eps = denoiser.infer(x, content, speaker, tv);
    if (k + 1 == schedule.size()) {
      // final step runs at t = 1, where the reverse mean collapses onto the
      // clean-signal estimate exactly
      x = reverse_mu(x, tv, eps, sched);
      break;
    }
    const double ab = sched.alpha_bar_at(t);
    const double sig = std::sqrt(1.0 - ab);
    const double inv = 1.0 / std::sqrt(ab);
    const double ab_next = sched.alpha_bar_at(schedule[k + 1]);
    const double a_next = std::sqrt(ab_next);
    const double s_next = std::sqrt(1.0 - ab_next);
    for (Index i = 0; i < x.numel(); ++i) {
      const double x0_hat = (x.at(i) - sig * eps.at(i)) * inv;
      x.at(i) = a_next * x0_hat + s_next * eps.at(i);
    }
  }
  return x;
}

}  // namespace vpfd
