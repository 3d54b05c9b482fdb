#pragma once

#include <vector>

#include "vpfd/discriminators.hpp"
#include "vpfd/schedule.hpp"

namespace vpfd {

struct LossWeights {
  double lambda_fm = 2.0;
  double lambda_distill = 45.0;
};

// Named per-step scalars appended to the training CSV.
struct LossReport {
  double d_loss = 0.0;
  double g_adv = 0.0;
  double g_fm = 0.0;
  double g_distill = 0.0;
  double g_total = 0.0;

  bool finite() const;
};

// Least-squares adversarial losses over score maps; expectations are means
// over map elements and batch, summed across discriminators in a list.
nn::Var lsgan_d(nn::Tape& tape, const std::vector<DiscOutput>& real, const std::vector<DiscOutput>& fake);
nn::Var lsgan_g(nn::Tape& tape, const std::vector<DiscOutput>& fake);

// sum_i mean|real_i - fake_i| with the real path detached (plain tensors).
nn::Var feature_matching(nn::Tape& tape, const std::vector<std::vector<nn::Tensor>>& real_feats,
                         const std::vector<DiscOutput>& fake);

std::vector<std::vector<nn::Tensor>> detach_features(nn::Tape& tape, const std::vector<DiscOutput>& outs);

// sqrt(abar_t)-weighted distance between the student output (grad) and the
// teacher reconstruction (constant), one t per item, mean over the batch.
// norm_l2 switches the per-element distance from |d| to d^2.
nn::Var score_distillation(nn::Tape& tape, nn::Var x_student, const nn::Tensor& x_teacher,
                           const std::vector<nn::Index>& t, const NoiseSchedule& sched, bool norm_l2 = false);

nn::Var total_g(nn::Tape& tape, nn::Var adv, nn::Var fm, nn::Var distill, const LossWeights& w);
nn::Var total_d(nn::Tape& tape, nn::Var adv);

}  // namespace vpfd
