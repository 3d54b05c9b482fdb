#pragma once

#include "vpfd/stft.hpp"
#include "vpfd/tape.hpp"

namespace vpfd::nn {

// ---- elementwise ----
Var add(Tape& t, Var a, Var b);
Var sub(Tape& t, Var a, Var b);
Var mul(Tape& t, Var a, Var b);
Var add_scalar(Tape& t, Var a, double c);
Var mul_scalar(Tape& t, Var a, double c);
Var abs_op(Tape& t, Var a);
Var square(Tape& t, Var a);
Var log_clamp(Tape& t, Var a, double floor);  // ln(max(a, floor))

// ---- activations ----
Var leaky_relu(Tape& t, Var a, double slope);
Var tanh_op(Tape& t, Var a);
Var sigmoid_op(Tape& t, Var a);
// (N, 2C, T): first half gated by sigmoid of second half -> (N, C, T)
Var glu(Tape& t, Var a);

// ---- shape ----
Var reshape(Tape& t, Var a, std::vector<Index> shape);
Var concat_channels(Tape& t, Var a, Var b);            // rank-3, dim 1
Var pad_time(Tape& t, Var a, Index left, Index right);  // rank-3 zero pad, dim 2
Var slice_time(Tape& t, Var a, Index start, Index len);
Var slice_cols(Tape& t, Var a, Index start, Index len);  // rank-2, dim 1

// ---- linear algebra ----
// x (N, Din), w (Dout, Din), b (Dout) or invalid
Var linear(Tape& t, Var x, Var w, Var b);
// m (R, B) constant, x (N, B, T) -> (N, R, T)
Var matmul_const_left(Tape& t, const Tensor& m, Var x);
// x (N, C, T) + v (N, C) broadcast over time
Var add_time_broadcast(Tape& t, Var x, Var v);
// x (N, C, T) * v (N, C) broadcast over time
Var mul_time_broadcast(Tape& t, Var x, Var v);

// ---- convolutions ----
struct Conv1dSpec {
  Index stride = 1;
  Index dilation = 1;
  Index pad = 0;
};
// x (N, Cin, T), w (Cout, Cin, K), b (Cout) or invalid -> (N, Cout, To)
Var conv1d(Tape& t, Var x, Var w, Var b, const Conv1dSpec& spec);
// x (N, Cin, T), w (Cin, Cout, K) -> (N, Cout, (T-1)*stride - 2*pad + K)
Var conv_transpose1d(Tape& t, Var x, Var w, Var b, Index stride, Index pad);
// x (N, Cin, H, W), w (Cout, Cin, KH, KW)
Var conv2d(Tape& t, Var x, Var w, Var b, Index sh, Index sw, Index ph, Index pw);

// w = g * v / ||v|| with the norm taken per slice along dim 0
Var weight_norm(Tape& t, Var v, Var g);

// ---- reductions ----
Var sum_all(Tape& t, Var a);
Var mean_all(Tape& t, Var a);
Var mean_per_item(Tape& t, Var a);  // (N, ...) -> (N)
// x (N) -> scalar: scale * sum_n w[n] * x[n]
Var dot_const(Tape& t, Var x, const Tensor& w, double scale);

// ---- spectral ----
// x (N, T) -> (N, bins, frames)
Var stft_mag(Tape& t, Var x, const StftPlan& plan);

// ---- composites ----
Var l1_mean(Tape& t, Var a, Var b);
Var mse_mean(Tape& t, Var a, Var b);

}  // namespace vpfd::nn
