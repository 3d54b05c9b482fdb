#include "vpfd/layers.hpp"

#include <cmath>

namespace vpfd::nn {

namespace {

// v initialized at stddev 1/sqrt(slice) and g = ||v_slice||, so the effective
// kernel equals v at init.
void create_wn_pair(ParamStore& store, const std::string& name, std::vector<Index> w_shape, Rng& rng) {
  const Index d0 = w_shape[0];
  Index slice = 1;
  for (size_t i = 1; i < w_shape.size(); ++i) slice *= w_shape[i];
  const double stddev = 1.0 / std::sqrt(static_cast<double>(slice));

  Param& v = store.create(name + ".v", std::move(w_shape));
  for (auto& x : v.value.data) x = stddev * rng.normal();
  Param& g = store.create(name + ".g", {d0});
  for (Index o = 0; o < d0; ++o) {
    double ss = 0.0;
    const double* p = v.value.ptr() + o * slice;
    for (Index i = 0; i < slice; ++i) ss += p[i] * p[i];
    g.value.at(o) = std::sqrt(ss);
  }
}

Var wn_weight(Tape& t, ParamStore& store, const std::string& name, bool trainable) {
  Var v = use_param(t, store.at(name + ".v"), trainable);
  Var g = use_param(t, store.at(name + ".g"), trainable);
  return weight_norm(t, v, g);
}

}  // namespace

void create_wn_conv(ParamStore& store, const std::string& name, std::vector<Index> w_shape, Rng& rng) {
  const Index out_ch = w_shape[0];
  create_wn_pair(store, name, std::move(w_shape), rng);
  store.create(name + ".b", {out_ch});
}

void create_wn_conv_transpose(ParamStore& store, const std::string& name, std::vector<Index> w_shape,
                              Rng& rng) {
  const Index out_ch = w_shape[1];  // (Cin, Cout, K)
  create_wn_pair(store, name, std::move(w_shape), rng);
  store.create(name + ".b", {out_ch});
}

Var wn_conv1d(Tape& t, ParamStore& store, const std::string& name, Var x, const Conv1dSpec& spec,
              bool trainable) {
  Var w = wn_weight(t, store, name, trainable);
  Var b = use_param(t, store.at(name + ".b"), trainable);
  return conv1d(t, x, w, b, spec);
}

Var wn_conv_transpose1d(Tape& t, ParamStore& store, const std::string& name, Var x, Index stride,
                        Index pad, bool trainable) {
  Var w = wn_weight(t, store, name, trainable);
  Var b = use_param(t, store.at(name + ".b"), trainable);
  return conv_transpose1d(t, x, w, b, stride, pad);
}

Var wn_conv2d(Tape& t, ParamStore& store, const std::string& name, Var x, Index sh, Index sw, Index ph,
              Index pw, bool trainable) {
  Var w = wn_weight(t, store, name, trainable);
  Var b = use_param(t, store.at(name + ".b"), trainable);
  return conv2d(t, x, w, b, sh, sw, ph, pw);
}

void create_linear(ParamStore& store, const std::string& name, Index out_dim, Index in_dim, Rng& rng) {
  Param& w = store.create(name + ".w", {out_dim, in_dim});
  const double stddev = 1.0 / std::sqrt(static_cast<double>(in_dim));
  for (auto& x : w.value.data) x = stddev * rng.normal();
  store.create(name + ".b", {out_dim});
}

Var linear_layer(Tape& t, ParamStore& store, const std::string& name, Var x, bool trainable) {
  Var w = use_param(t, store.at(name + ".w"), trainable);
  Var b = use_param(t, store.at(name + ".b"), trainable);
  return linear(t, x, w, b);
}

}  // namespace vpfd::nn
