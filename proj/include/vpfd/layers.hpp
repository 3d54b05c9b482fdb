#pragma once

#include <string>

#include "vpfd/ops.hpp"
#include "vpfd/param_store.hpp"
#include "vpfd/rng.hpp"

namespace vpfd::nn {

// Parameter triplet for a weight-normalized convolution: direction tensor
// "<name>.v", per-slice gain "<name>.g" (so the effective kernel equals v at
// init), bias "<name>.b".
void create_wn_conv(ParamStore& store, const std::string& name, std::vector<Index> w_shape, Rng& rng);
// Transposed variant: weight shape (Cin, Cout, K), gain per input channel,
// bias per output channel.
void create_wn_conv_transpose(ParamStore& store, const std::string& name, std::vector<Index> w_shape,
                              Rng& rng);

Var wn_conv1d(Tape& t, ParamStore& store, const std::string& name, Var x, const Conv1dSpec& spec,
              bool trainable);
Var wn_conv_transpose1d(Tape& t, ParamStore& store, const std::string& name, Var x, Index stride,
                        Index pad, bool trainable);
Var wn_conv2d(Tape& t, ParamStore& store, const std::string& name, Var x, Index sh, Index sw, Index ph,
              Index pw, bool trainable);

// Plain linear layer parameters "<name>.w" / "<name>.b".
void create_linear(ParamStore& store, const std::string& name, Index out_dim, Index in_dim, Rng& rng);
Var linear_layer(Tape& t, ParamStore& store, const std::string& name, Var x, bool trainable);

}  // namespace vpfd::nn
