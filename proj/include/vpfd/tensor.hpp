#pragma once

#include <cassert>
#include <cstdint>
#include <string>
#include <vector>

#include "vpfd/rng.hpp"

namespace vpfd::nn {

using Index = int64_t;

// Dense row-major tensor of doubles. Rank up to 4 is what the models use:
// (N, C, T) for sequence features, (N, C, H, W) for 2-D discriminator maps.
struct Tensor {
  std::vector<Index> shape;
  std::vector<double> data;

  Tensor() = default;
  explicit Tensor(std::vector<Index> s) : shape(std::move(s)) {
    data.assign(static_cast<size_t>(numel_of(shape)), 0.0);
  }

  static Index numel_of(const std::vector<Index>& s) {
    Index n = 1;
    for (Index d : s) n *= d;
    return n;
  }

  static Tensor zeros(std::vector<Index> s) { return Tensor(std::move(s)); }

  static Tensor full(std::vector<Index> s, double v) {
    Tensor t(std::move(s));
    for (auto& x : t.data) x = v;
    return t;
  }

  static Tensor scalar(double v) {
    Tensor t({1});
    t.data[0] = v;
    return t;
  }

  static Tensor randn(std::vector<Index> s, Rng& rng, double stddev = 1.0) {
    Tensor t(std::move(s));
    for (auto& x : t.data) x = stddev * rng.normal();
    return t;
  }

  Index numel() const { return static_cast<Index>(data.size()); }
  int rank() const { return static_cast<int>(shape.size()); }
  Index dim(int i) const { return shape[static_cast<size_t>(i)]; }

  double* ptr() { return data.data(); }
  const double* ptr() const { return data.data(); }

  double& at(Index i) { return data[static_cast<size_t>(i)]; }
  const double& at(Index i) const { return data[static_cast<size_t>(i)]; }

  double& at(Index i, Index j) {
    assert(rank() == 2);
    return data[static_cast<size_t>(i * shape[1] + j)];
  }
  const double& at(Index i, Index j) const {
    assert(rank() == 2);
    return data[static_cast<size_t>(i * shape[1] + j)];
  }

  double& at(Index i, Index j, Index k) {
    assert(rank() == 3);
    return data[static_cast<size_t>((i * shape[1] + j) * shape[2] + k)];
  }
  const double& at(Index i, Index j, Index k) const {
    assert(rank() == 3);
    return data[static_cast<size_t>((i * shape[1] + j) * shape[2] + k)];
  }

  double& at(Index i, Index j, Index k, Index l) {
    assert(rank() == 4);
    return data[static_cast<size_t>(((i * shape[1] + j) * shape[2] + k) * shape[3] + l)];
  }
  const double& at(Index i, Index j, Index k, Index l) const {
    assert(rank() == 4);
    return data[static_cast<size_t>(((i * shape[1] + j) * shape[2] + k) * shape[3] + l)];
  }

  bool same_shape(const Tensor& o) const { return shape == o.shape; }

  void fill(double v) {
    for (auto& x : data) x = v;
  }

  std::string shape_str() const {
    std::string s = "(";
    for (size_t i = 0; i < shape.size(); ++i) {
      if (i) s += ",";
      s += std::to_string(shape[i]);
    }
    return s + ")";
  }
};

}  // namespace vpfd::nn
