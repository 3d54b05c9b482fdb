#include "vpfd/losses.hpp"

#include <cmath>
#include <stdexcept>

#include "vpfd/ops.hpp"

namespace vpfd {

using nn::Index;
using nn::Tape;
using nn::Tensor;
using nn::Var;

bool LossReport::finite() const {
  for (double v : {d_loss, g_adv, g_fm, g_distill, g_total}) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

nn::Var lsgan_d(Tape& tape, const std::vector<DiscOutput>& real, const std::vector<DiscOutput>& fake) {
  if (real.size() != fake.size() || real.empty()) {
    throw std::invalid_argument("lsgan_d: discriminator list mismatch");
  }
  Var total{};
  for (size_t i = 0; i < real.size(); ++i) {
    if (!tape.val(real[i].score).same_shape(tape.val(fake[i].score))) {
      throw std::invalid_argument("lsgan_d: score map shape mismatch");
    }
    Var r = nn::mean_all(tape, nn::square(tape, nn::add_scalar(tape, real[i].score, -1.0)));
    Var f = nn::mean_all(tape, nn::square(tape, fake[i].score));
    Var term = nn::add(tape, r, f);
    total = total.valid() ? nn::add(tape, total, term) : term;
  }
  return total;
}

nn::Var lsgan_g(Tape& tape, const std::vector<DiscOutput>& fake) {
  if (fake.empty()) throw std::invalid_argument("lsgan_g: empty discriminator list");
  Var total{};
  for (const DiscOutput& d : fake) {
    Var f = nn::mean_all(tape, nn::square(tape, nn::add_scalar(tape, d.score, -1.0)));
    total = total.valid() ? nn::add(tape, total, f) : f;
  }
  return total;
}

std::vector<std::vector<Tensor>> detach_features(Tape& tape, const std::vector<DiscOutput>& outs) {
  std::vector<std::vector<Tensor>> feats;
  feats.reserve(outs.size());
  for (const DiscOutput& d : outs) {
    std::vector<Tensor> layer;
    layer.reserve(d.features.size());
    for (Var f : d.features) layer.push_back(tape.val(f));
    feats.push_back(std::move(layer));
  }
  return feats;
}

nn::Var feature_matching(Tape& tape, const std::vector<std::vector<Tensor>>& real_feats,
                         const std::vector<DiscOutput>& fake) {
  if (real_feats.size() != fake.size() || fake.empty()) {
    throw std::invalid_argument("feature_matching: discriminator list mismatch");
  }
  Var total{};
  for (size_t d = 0; d < fake.size(); ++d) {
    if (real_feats[d].size() != fake[d].features.size()) {
      throw std::invalid_argument("feature_matching: layer count mismatch");
    }
    for (size_t i = 0; i < real_feats[d].size(); ++i) {
      if (!real_feats[d][i].same_shape(tape.val(fake[d].features[i]))) {
        throw std::invalid_argument("feature_matching: layer shape mismatch");
      }
      Var ref = tape.constant(real_feats[d][i]);
      Var term = nn::mean_all(tape, nn::abs_op(tape, nn::sub(tape, fake[d].features[i], ref)));
      total = total.valid() ? nn::add(tape, total, term) : term;
    }
  }
  return total;
}

nn::Var score_distillation(Tape& tape, Var x_student, const Tensor& x_teacher,
                           const std::vector<Index>& t, const NoiseSchedule& sched, bool norm_l2) {
  const Tensor& vs = tape.val(x_student);
  if (!vs.same_shape(x_teacher)) {
    throw std::invalid_argument("score_distillation: shape mismatch " + vs.shape_str() + " vs " +
                                x_teacher.shape_str());
  }
  const Index N = vs.dim(0);
  if (static_cast<Index>(t.size()) != N) throw std::invalid_argument("score_distillation: t size mismatch");
  Tensor weights({N});
  for (Index n = 0; n < N; ++n) {
    sched.check_t(t[static_cast<size_t>(n)]);
    weights.at(n) = std::sqrt(sched.alpha_bar_at(t[static_cast<size_t>(n)]));
  }
  Var diff = nn::sub(tape, x_student, tape.constant(x_teacher));
  Var per_elem = norm_l2 ? nn::square(tape, diff) : nn::abs_op(tape, diff);
  Var per_item = nn::mean_per_item(tape, per_elem);
  return nn::dot_const(tape, per_item, weights, 1.0 / static_cast<double>(N));
}

nn::Var total_g(Tape& tape, Var adv, Var fm, Var distill, const LossWeights& w) {
  Var out = adv;
  if (fm.valid() && w.lambda_fm != 0.0) out = nn::add(tape, out, nn::mul_scalar(tape, fm, w.lambda_fm));
  if (distill.valid() && w.lambda_distill != 0.0) {
    out = nn::add(tape, out, nn::mul_scalar(tape, distill, w.lambda_distill));
  }
  return out;
}

nn::Var total_d(Tape& tape, Var adv) {
  (void)tape;
  return adv;
}

}  // namespace vpfd
