#include "vpfd/ops.hpp"

#include "vpfd/parallel.hpp"

#include <cmath>
#include <stdexcept>

namespace vpfd::nn {

namespace {

void check_same_shape(const Tape& t, Var a, Var b, const char* op) {
  if (!t.val(a).same_shape(t.val(b))) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch " + t.val(a).shape_str() + " vs " +
                                t.val(b).shape_str());
  }
}

// Eight-lane manual unrolling so the reductions vectorize without fp
// reassociation flags; the summation order is fixed, so results stay
// bit-reproducible run to run.
inline double dot_fast(const double* __restrict a, const double* __restrict b, Index len) {
  double s0 = 0, s1 = 0, s2 = 0, s3 = 0, s4 = 0, s5 = 0, s6 = 0, s7 = 0;
  Index i = 0;
  for (; i + 8 <= len; i += 8) {
    s0 += a[i] * b[i];
    s1 += a[i + 1] * b[i + 1];
    s2 += a[i + 2] * b[i + 2];
    s3 += a[i + 3] * b[i + 3];
    s4 += a[i + 4] * b[i + 4];
    s5 += a[i + 5] * b[i + 5];
    s6 += a[i + 6] * b[i + 6];
    s7 += a[i + 7] * b[i + 7];
  }
  double acc = ((s0 + s1) + (s2 + s3)) + ((s4 + s5) + (s6 + s7));
  for (; i < len; ++i) acc += a[i] * b[i];
  return acc;
}

inline double sum_fast(const double* __restrict a, Index len) {
  double s0 = 0, s1 = 0, s2 = 0, s3 = 0, s4 = 0, s5 = 0, s6 = 0, s7 = 0;
  Index i = 0;
  for (; i + 8 <= len; i += 8) {
    s0 += a[i];
    s1 += a[i + 1];
    s2 += a[i + 2];
    s3 += a[i + 3];
    s4 += a[i + 4];
    s5 += a[i + 5];
    s6 += a[i + 6];
    s7 += a[i + 7];
  }
  double acc = ((s0 + s1) + (s2 + s3)) + ((s4 + s5) + (s6 + s7));
  for (; i < len; ++i) acc += a[i];
  return acc;
}

// valid output range [lo, hi) of `to` such that 0 <= to*stride + t0 < limit
inline void conv_range(Index t0, Index stride, Index limit, Index out_len, Index& lo, Index& hi) {
  lo = 0;
  if (t0 < 0) lo = (-t0 + stride - 1) / stride;
  hi = out_len;
  if (t0 < limit) {
    const Index h = (limit - t0 + stride - 1) / stride;
    if (h < hi) hi = h;
  } else {
    hi = lo;
  }
}

}  // namespace

// ---------------------------------------------------------------- elementwise

Var add(Tape& t, Var a, Var b) {
  check_same_shape(t, a, b, "add");
  Tensor out = t.val(a);
  const Tensor& vb = t.val(b);
  for (Index i = 0; i < out.numel(); ++i) out.at(i) += vb.at(i);
  const int ia = a.id, ib = b.id;
  return t.node(std::move(out), {ia, ib}, [ia, ib](Tape& tp, int self) {
    const Tensor& g = tp.grad(self);
    if (tp.requires_grad(ia)) {
      Tensor& ga = tp.grad(ia);
      for (Index i = 0; i < g.numel(); ++i) ga.at(i) += g.at(i);
    }
    if (tp.requires_grad(ib)) {
      Tensor& gb = tp.grad(ib);
      for (Index i = 0; i < g.numel(); ++i) gb.at(i) += g.at(i);
    }
  });
}

Var sub(Tape& t, Var a, Var b) {
  check_same_shape(t, a, b, "sub");
  Tensor out = t.val(a);
  const Tensor& vb = t.val(b);
  for (Index i = 0; i < out.numel(); ++i) out.at(i) -= vb.at(i);
  const int ia = a.id, ib = b.id;
  return t.node(std::move(out), {ia, ib}, [ia, ib](Tape& tp, int self) {
    const Tensor& g = tp.grad(self);
    if (tp.requires_grad(ia)) {
      Tensor& ga = tp.grad(ia);
      for (Index i = 0; i < g.numel(); ++i) ga.at(i) += g.at(i);
    }
    if (tp.requires_grad(ib)) {
      Tensor& gb = tp.grad(ib);
      for (Index i = 0; i < g.numel(); ++i) gb.at(i) -= g.at(i);
    }
  });
}

Var mul(Tape& t, Var a, Var b) {
  check_same_shape(t, a, b, "mul");
  Tensor out = t.val(a);
  const Tensor& vb = t.val(b);
  for (Index i = 0; i < out.numel(); ++i) out.at(i) *= vb.at(i);
  const int ia = a.id, ib = b.id;
  return t.node(std::move(out), {ia, ib}, [ia, ib](Tape& tp, int self) {
    const Tensor& g = tp.grad(self);
    const Tensor& va = tp.val(ia);
    const Tensor& vb2 = tp.val(ib);
    if (tp.requires_grad(ia)) {
      Tensor& ga = tp.grad(ia);
      for (Index i = 0; i < g.numel(); ++i) ga.at(i) += g.at(i) * vb2.at(i);
    }
    if (tp.requires_grad(ib)) {
      Tensor& gb = tp.grad(ib);
      for (Index i = 0; i < g.numel(); ++i) gb.at(i) += g.at(i) * va.at(i);
    }
  });
}

Var add_scalar(Tape& t, Var a, double c) {
  Tensor out = t.val(a);
  for (auto& x : out.data) x += c;
  const int ia = a.id;
  return t.node(std::move(out), {ia}, [ia](Tape& tp, int self) {
    const Tensor& g = tp.grad(self);
    Tensor& ga = tp.grad(ia);
    for (Index i = 0; i < g.numel(); ++i) ga.at(i) += g.at(i);
  });
}

Var mul_scalar(Tape& t, Var a, double c) {
  Tensor out = t.val(a);
  for (auto& x : out.data) x *= c;
  const int ia = a.id;
  return t.node(std::move(out), {ia}, [ia, c](Tape& tp, int self) {
    const Tensor& g = tp.grad(self);
    Tensor& ga = tp.grad(ia);
    for (Index i = 0; i < g.numel(); ++i) ga.at(i) += c * g.at(i);
  });
}

Var abs_op(Tape& t, Var a) {
  Tensor out = t.val(a);
  for (auto& x : out.data) x = std::abs(x);
  const int ia = a.id;
  return t.node(std::move(out), {ia}, [ia](Tape& tp, int self) {
    const Tensor& g = tp.grad(self);
    const Tensor& v = tp.val(ia);
    Tensor& ga = tp.grad(ia);
    for (Index i = 0; i < g.numel(); ++i) {
      const double s = v.at(i) > 0.0 ? 1.0 : (v.at(i) < 0.0 ? -1.0 : 0.0);
      ga.at(i) += s * g.at(i);
    }
  });
}

Var square(Tape& t, Var a) {
  Tensor out = t.val(a);
  for (auto& x : out.data) x *= x;
  const int ia = a.id;
  return t.node(std::move(out), {ia}, [ia](Tape& tp, int self) {
    const Tensor& g = tp.grad(self);
    const Tensor& v = tp.val(ia);
    Tensor& ga = tp.grad(ia);
    for (Index i = 0; i < g.numel(); ++i) ga.at(i) += 2.0 * v.at(i) * g.at(i);
  });
}

Var log_clamp(Tape& t, Var a, double floor) {
  Tensor out = t.val(a);
  for (auto& x : out.data) x = std::log(x > floor ? x : floor);
  const int ia = a.id;
  return t.node(std::move(out), {ia}, [ia, floor](Tape& tp, int self) {
    const Tensor& g = tp.grad(self);
    const Tensor& v = tp.val(ia);
    Tensor& ga = tp.grad(ia);
    for (Index i = 0; i < g.numel(); ++i) {
      if (v.at(i) > floor) ga.at(i) += g.at(i) / v.at(i);
    }
  });
}

// ---------------------------------------------------------------- activations

Var leaky_relu(Tape& t, Var a, double slope) {
  Tensor out = t.val(a);
  for (auto& x : out.data) x = x >= 0.0 ? x : slope * x;
  const int ia = a.id;
  return t.node(std::move(out), {ia}, [ia, slope](Tape& tp, int self) {
    const Tensor& g = tp.grad(self);
    const Tensor& v = tp.val(ia);
    Tensor& ga = tp.grad(ia);
    for (Index i = 0; i < g.numel(); ++i) ga.at(i) += (v.at(i) >= 0.0 ? 1.0 : slope) * g.at(i);
  });
}

Var tanh_op(Tape& t, Var a) {
  Tensor out = t.val(a);
  for (auto& x : out.data) x = std::tanh(x);
  const int ia = a.id;
  return t.node(std::move(out), {ia}, [ia](Tape& tp, int self) {
    const Tensor& g = tp.grad(self);
    const Tensor& y = tp.val(self);
    Tensor& ga = tp.grad(ia);
    for (Index i = 0; i < g.numel(); ++i) ga.at(i) += (1.0 - y.at(i) * y.at(i)) * g.at(i);
  });
}

Var sigmoid_op(Tape& t, Var a) {
  Tensor out = t.val(a);
  for (auto& x : out.data) x = 1.0 / (1.0 + std::exp(-x));
  const int ia = a.id;
  return t.node(std::move(out), {ia}, [ia](Tape& tp, int self) {
    const Tensor& g = tp.grad(self);
    const Tensor& y = tp.val(self);
    Tensor& ga = tp.grad(ia);
    for (Index i = 0; i < g.numel(); ++i) ga.at(i) += y.at(i) * (1.0 - y.at(i)) * g.at(i);
  });
}

Var glu(Tape& t, Var a) {
  const Tensor& v = t.val(a);
  if (v.rank() != 3 || v.dim(1) % 2 != 0) throw std::invalid_argument("glu: expects (N, 2C, T)");
  const Index N = v.dim(0), C2 = v.dim(1), T = v.dim(2), C = C2 / 2;
  Tensor out({N, C, T});
  for (Index n = 0; n < N; ++n) {
    for (Index c = 0; c < C; ++c) {
      for (Index x = 0; x < T; ++x) {
        const double g = 1.0 / (1.0 + std::exp(-v.at(n, C + c, x)));
        out.at(n, c, x) = v.at(n, c, x) * g;
      }
    }
  }
  const int ia = a.id;
  return t.node(std::move(out), {ia}, [ia, N, C, T](Tape& tp, int self) {
    const Tensor& g = tp.grad(self);
    const Tensor& v2 = tp.val(ia);
    Tensor& ga = tp.grad(ia);
    for (Index n = 0; n < N; ++n) {
      for (Index c = 0; c < C; ++c) {
        for (Index x = 0; x < T; ++x) {
          const double s = 1.0 / (1.0 + std::exp(-v2.at(n, C + c, x)));
          const double go = g.at(n, c, x);
          ga.at(n, c, x) += go * s;
          ga.at(n, C + c, x) += go * v2.at(n, c, x) * s * (1.0 - s);
        }
      }
    }
  });
}

// ---------------------------------------------------------------------- shape

Var reshape(Tape& t, Var a, std::vector<Index> shape) {
  const Tensor& v = t.val(a);
  if (Tensor::numel_of(shape) != v.numel()) throw std::invalid_argument("reshape: numel mismatch");
  Tensor out;
  out.shape = std::move(shape);
  out.data = v.data;
  const int ia = a.id;
  return t.node(std::move(out), {ia}, [ia](Tape& tp, int self) {
    const Tensor& g = tp.grad(self);
    Tensor& ga = tp.grad(ia);
    for (Index i = 0; i < g.numel(); ++i) ga.at(i) += g.at(i);
  });
}

Var concat_channels(Tape& t, Var a, Var b) {
  const Tensor& va = t.val(a);
  const Tensor& vb = t.val(b);
  if (va.rank() != 3 || vb.rank() != 3 || va.dim(0) != vb.dim(0) || va.dim(2) != vb.dim(2)) {
    throw std::invalid_argument("concat_channels: incompatible shapes " + va.shape_str() + " vs " + vb.shape_str());
  }
  const Index N = va.dim(0), Ca = va.dim(1), Cb = vb.dim(1), T = va.dim(2);
  Tensor out({N, Ca + Cb, T});
  for (Index n = 0; n < N; ++n) {
    for (Index c = 0; c < Ca; ++c)
      for (Index x = 0; x < T; ++x) out.at(n, c, x) = va.at(n, c, x);
    for (Index c = 0; c < Cb; ++c)
      for (Index x = 0; x < T; ++x) out.at(n, Ca + c, x) = vb.at(n, c, x);
  }
  const int ia = a.id, ib = b.id;
  return t.node(std::move(out), {ia, ib}, [ia, ib, N, Ca, Cb, T](Tape& tp, int self) {
    const Tensor& g = tp.grad(self);
    if (tp.requires_grad(ia)) {
      Tensor& ga = tp.grad(ia);
      for (Index n = 0; n < N; ++n)
        for (Index c = 0; c < Ca; ++c)
          for (Index x = 0; x < T; ++x) ga.at(n, c, x) += g.at(n, c, x);
    }
    if (tp.requires_grad(ib)) {
      Tensor& gb = tp.grad(ib);
      for (Index n = 0; n < N; ++n)
        for (Index c = 0; c < Cb; ++c)
          for (Index x = 0; x < T; ++x) gb.at(n, c, x) += g.at(n, Ca + c, x);
    }
  });
}

Var pad_time(Tape& t, Var a, Index left, Index right) {
  const Tensor& v = t.val(a);
  if (v.rank() != 3) throw std::invalid_argument("pad_time: expects rank 3");
  const Index N = v.dim(0), C = v.dim(1), T = v.dim(2);
  Tensor out({N, C, T + left + right});
  for (Index n = 0; n < N; ++n)
    for (Index c = 0; c < C; ++c)
      for (Index x = 0; x < T; ++x) out.at(n, c, left + x) = v.at(n, c, x);
  const int ia = a.id;
  return t.node(std::move(out), {ia}, [ia, N, C, T, left](Tape& tp, int self) {
    const Tensor& g = tp.grad(self);
    Tensor& ga = tp.grad(ia);
    for (Index n = 0; n < N; ++n)
      for (Index c = 0; c < C; ++c)
        for (Index x = 0; x < T; ++x) ga.at(n, c, x) += g.at(n, c, left + x);
  });
}

Var slice_time(Tape& t, Var a, Index start, Index len) {
  const Tensor& v = t.val(a);
  if (v.rank() != 3 || start < 0 || start + len > v.dim(2)) throw std::invalid_argument("slice_time: out of range");
  const Index N = v.dim(0), C = v.dim(1);
  Tensor out({N, C, len});
  for (Index n = 0; n < N; ++n)
    for (Index c = 0; c < C; ++c)
      for (Index x = 0; x < len; ++x) out.at(n, c, x) = v.at(n, c, start + x);
  const int ia = a.id;
  return t.node(std::move(out), {ia}, [ia, N, C, len, start](Tape& tp, int self) {
    const Tensor& g = tp.grad(self);
    Tensor& ga = tp.grad(ia);
    for (Index n = 0; n < N; ++n)
      for (Index c = 0; c < C; ++c)
        for (Index x = 0; x < len; ++x) ga.at(n, c, start + x) += g.at(n, c, x);
  });
}

Var slice_cols(Tape& t, Var a, Index start, Index len) {
  const Tensor& v = t.val(a);
  if (v.rank() != 2 || start < 0 || start + len > v.dim(1)) {
    throw std::invalid_argument("slice_cols: out of range");
  }
  const Index N = v.dim(0), D = v.dim(1);
  Tensor out({N, len});
  for (Index n = 0; n < N; ++n)
    for (Index j = 0; j < len; ++j) out.at(n, j) = v.at(n, start + j);
  const int ia = a.id;
  return t.node(std::move(out), {ia}, [ia, N, D, len, start](Tape& tp, int self) {
    (void)D;
    const Tensor& g = tp.grad(self);
    Tensor& ga = tp.grad(ia);
    for (Index n = 0; n < N; ++n)
      for (Index j = 0; j < len; ++j) ga.at(n, start + j) += g.at(n, j);
  });
}

// -------------------------------------------------------------- linear algebra

Var linear(Tape& t, Var x, Var w, Var b) {
  const Tensor& vx = t.val(x);
  const Tensor& vw = t.val(w);
  if (vx.rank() != 2 || vw.rank() != 2 || vx.dim(1) != vw.dim(1)) {
    throw std::invalid_argument("linear: shape mismatch");
  }
  const Index N = vx.dim(0), Din = vx.dim(1), Dout = vw.dim(0);
  Tensor out({N, Dout});
  for (Index n = 0; n < N; ++n) {
    for (Index o = 0; o < Dout; ++o) {
      double acc = b.valid() ? t.val(b).at(o) : 0.0;
      for (Index i = 0; i < Din; ++i) acc += vw.at(o, i) * vx.at(n, i);
      out.at(n, o) = acc;
    }
  }
  const int ix = x.id, iw = w.id, ib = b.valid() ? b.id : -1;
  return t.node(std::move(out), {ix, iw, ib}, [ix, iw, ib, N, Din, Dout](Tape& tp, int self) {
    const Tensor& g = tp.grad(self);
    const Tensor& vx2 = tp.val(ix);
    const Tensor& vw2 = tp.val(iw);
    if (tp.requires_grad(ix)) {
      Tensor& gx = tp.grad(ix);
      for (Index n = 0; n < N; ++n)
        for (Index o = 0; o < Dout; ++o) {
          const double go = g.at(n, o);
          for (Index i = 0; i < Din; ++i) gx.at(n, i) += go * vw2.at(o, i);
        }
    }
    if (tp.requires_grad(iw)) {
      Tensor& gw = tp.grad(iw);
      for (Index n = 0; n < N; ++n)
        for (Index o = 0; o < Dout; ++o) {
          const double go = g.at(n, o);
          for (Index i = 0; i < Din; ++i) gw.at(o, i) += go * vx2.at(n, i);
        }
    }
    if (ib >= 0 && tp.requires_grad(ib)) {
      Tensor& gb = tp.grad(ib);
      for (Index n = 0; n < N; ++n)
        for (Index o = 0; o < Dout; ++o) gb.at(o) += g.at(n, o);
    }
  });
}

Var matmul_const_left(Tape& t, const Tensor& m, Var x) {
  const Tensor& vx = t.val(x);
  if (m.rank() != 2 || vx.rank() != 3 || m.dim(1) != vx.dim(1)) {
    throw std::invalid_argument("matmul_const_left: shape mismatch");
  }
  const Index N = vx.dim(0), B = vx.dim(1), T = vx.dim(2), R = m.dim(0);
  Tensor out({N, R, T});
  for (Index n = 0; n < N; ++n) {
    for (Index r = 0; r < R; ++r) {
      double* orow = &out.at(n, r, 0);
      for (Index b = 0; b < B; ++b) {
        const double w = m.at(r, b);
        if (w == 0.0) continue;
        const double* irow = &vx.at(n, b, 0);
        for (Index s = 0; s < T; ++s) orow[s] += w * irow[s];
      }
    }
  }
  const int ix = x.id;
  Tensor mcopy = m;
  return t.node(std::move(out), {ix}, [ix, mcopy, N, B, T, R](Tape& tp, int self) {
    const Tensor& g = tp.grad(self);
    Tensor& gx = tp.grad(ix);
    for (Index n = 0; n < N; ++n) {
      for (Index r = 0; r < R; ++r) {
        const double* grow = &g.at(n, r, 0);
        for (Index b = 0; b < B; ++b) {
          const double w = mcopy.at(r, b);
          if (w == 0.0) continue;
          double* xrow = &gx.at(n, b, 0);
          for (Index s = 0; s < T; ++s) xrow[s] += w * grow[s];
        }
      }
    }
  });
}

Var add_time_broadcast(Tape& t, Var x, Var v) {
  const Tensor& vx = t.val(x);
  const Tensor& vv = t.val(v);
  if (vx.rank() != 3 || vv.rank() != 2 || vx.dim(0) != vv.dim(0) || vx.dim(1) != vv.dim(1)) {
    throw std::invalid_argument("add_time_broadcast: shape mismatch");
  }
  const Index N = vx.dim(0), C = vx.dim(1), T = vx.dim(2);
  Tensor out = vx;
  for (Index n = 0; n < N; ++n)
    for (Index c = 0; c < C; ++c) {
      const double a = vv.at(n, c);
      for (Index s = 0; s < T; ++s) out.at(n, c, s) += a;
    }
  const int ix = x.id, iv = v.id;
  return t.node(std::move(out), {ix, iv}, [ix, iv, N, C, T](Tape& tp, int self) {
    const Tensor& g = tp.grad(self);
    if (tp.requires_grad(ix)) {
      Tensor& gx = tp.grad(ix);
      for (Index i = 0; i < g.numel(); ++i) gx.at(i) += g.at(i);
    }
    if (tp.requires_grad(iv)) {
      Tensor& gv = tp.grad(iv);
      for (Index n = 0; n < N; ++n)
        for (Index c = 0; c < C; ++c) {
          double acc = 0.0;
          for (Index s = 0; s < T; ++s) acc += g.at(n, c, s);
          gv.at(n, c) += acc;
        }
    }
  });
}

Var mul_time_broadcast(Tape& t, Var x, Var v) {
  const Tensor& vx = t.val(x);
  const Tensor& vv = t.val(v);
  if (vx.rank() != 3 || vv.rank() != 2 || vx.dim(0) != vv.dim(0) || vx.dim(1) != vv.dim(1)) {
    throw std::invalid_argument("mul_time_broadcast: shape mismatch");
  }
  const Index N = vx.dim(0), C = vx.dim(1), T = vx.dim(2);
  Tensor out = vx;
  for (Index n = 0; n < N; ++n)
    for (Index c = 0; c < C; ++c) {
      const double a = vv.at(n, c);
      double* row = &out.at(n, c, 0);
      for (Index s = 0; s < T; ++s) row[s] *= a;
    }
  const int ix = x.id, iv = v.id;
  return t.node(std::move(out), {ix, iv}, [ix, iv, N, C, T](Tape& tp, int self) {
    const Tensor& g = tp.grad(self);
    const Tensor& vx2 = tp.val(ix);
    const Tensor& vv2 = tp.val(iv);
    if (tp.requires_grad(ix)) {
      Tensor& gx = tp.grad(ix);
      for (Index n = 0; n < N; ++n)
        for (Index c = 0; c < C; ++c) {
          const double a = vv2.at(n, c);
          const double* grow = &g.at(n, c, 0);
          double* xrow = &gx.at(n, c, 0);
          for (Index s = 0; s < T; ++s) xrow[s] += a * grow[s];
        }
    }
    if (tp.requires_grad(iv)) {
      Tensor& gv = tp.grad(iv);
      for (Index n = 0; n < N; ++n)
        for (Index c = 0; c < C; ++c) {
          gv.at(n, c) += dot_fast(&g.at(n, c, 0), &vx2.at(n, c, 0), T);
        }
    }
  });
}

// --------------------------------------------------------------- convolutions

namespace {

inline Index floor_div(Index a, Index b) { return a >= 0 ? a / b : -((-a + b - 1) / b); }

// polyphase split of a row: phase r holds row[j*s + r]; tail zero-padded
inline void poly_build(const double* __restrict row, Index len, Index s, Index jmax,
                       double* __restrict poly) {
  for (Index r = 0; r < s; ++r) {
    double* __restrict dst = poly + r * jmax;
    Index j = 0;
    for (Index i = r; i < len; i += s, ++j) dst[j] = row[i];
    for (; j < jmax; ++j) dst[j] = 0.0;
  }
}

inline void poly_scatter_add(const double* __restrict poly, Index s, Index jmax,
                             double* __restrict row, Index len) {
  for (Index r = 0; r < s; ++r) {
    const double* __restrict src = poly + r * jmax;
    Index j = 0;
    for (Index i = r; i < len; i += s, ++j) row[i] += src[j];
  }
}

inline void axpy(double* __restrict y, const double* __restrict x, double a, Index len) {
  for (Index i = 0; i < len; ++i) y[i] += a * x[i];
}

}  // namespace

Var conv1d(Tape& t, Var x, Var w, Var b, const Conv1dSpec& spec) {
  const Tensor& vx = t.val(x);
  const Tensor& vw = t.val(w);
  if (vx.rank() != 3 || vw.rank() != 3 || vx.dim(1) != vw.dim(1)) {
    throw std::invalid_argument("conv1d: shape mismatch " + vx.shape_str() + " w " + vw.shape_str());
  }
  const Index N = vx.dim(0), Cin = vx.dim(1), T = vx.dim(2);
  const Index Cout = vw.dim(0), K = vw.dim(2);
  const Index st = spec.stride, dil = spec.dilation, pad = spec.pad;
  const Index To = (T + 2 * pad - dil * (K - 1) - 1) / st + 1;
  if (To < 1) throw std::invalid_argument("conv1d: input too short");

  const Index jmax = (T + st - 1) / st;
  Tensor out({N, Cout, To});
  parallel_n(N, [&](Index nb, Index ne, int) {
  std::vector<double> poly;
  if (st > 1) poly.resize(static_cast<size_t>(st * jmax));
  for (Index n = nb; n < ne; ++n) {
    if (b.valid()) {
      for (Index oc = 0; oc < Cout; ++oc) {
        const double bv = t.val(b).at(oc);
        double* orow = &out.at(n, oc, 0);
        for (Index to = 0; to < To; ++to) orow[to] = bv;
      }
    }
    for (Index ic = 0; ic < Cin; ++ic) {
      const double* __restrict irow = &vx.at(n, ic, 0);
      if (st > 1) poly_build(irow, T, st, jmax, poly.data());
      for (Index oc = 0; oc < Cout; ++oc) {
        const double* __restrict wrow = &vw.at(oc, ic, 0);
        double* __restrict orow = &out.at(n, oc, 0);
        for (Index k = 0; k < K; ++k) {
          const double wv = wrow[k];
          const Index t0 = k * dil - pad;
          Index lo, hi;
          conv_range(t0, st, T, To, lo, hi);
          if (hi <= lo) continue;
          if (st == 1) {
            axpy(orow + lo, irow + t0 + lo, wv, hi - lo);
          } else {
            const Index q = floor_div(t0, st);
            const Index r = t0 - q * st;
            axpy(orow + lo, poly.data() + r * jmax + lo + q, wv, hi - lo);
          }
        }
      }
    }
  }
  });

  const int ix = x.id, iw = w.id, ib = b.valid() ? b.id : -1;
  return t.node(std::move(out), {ix, iw, ib},
                [ix, iw, ib, N, Cin, T, Cout, K, st, dil, pad, To, jmax](Tape& tp, int self) {
    const Tensor& g = tp.grad(self);
    const Tensor& vx2 = tp.val(ix);
    const Tensor& vw2 = tp.val(iw);
    const bool want_x = tp.requires_grad(ix);
    const bool want_w = tp.requires_grad(iw);
    Tensor* gx = want_x ? &tp.grad(ix) : nullptr;
    Tensor* gw = want_w ? &tp.grad(iw) : nullptr;
    const int shards = static_cast<int>(std::min<Index>(worker_count(), N));
    std::vector<Tensor> gw_local(want_w && shards > 1 ? shards - 1 : 0, Tensor(vw2.shape));
    parallel_n(N, [&](Index nb, Index ne, int tid) {
    Tensor* gw_t = want_w ? (tid == 0 ? gw : &gw_local[static_cast<size_t>(tid - 1)]) : nullptr;
    std::vector<double> poly, gpoly;
    if (st > 1) {
      if (want_w) poly.resize(static_cast<size_t>(st * jmax));
      if (want_x) gpoly.resize(static_cast<size_t>(st * jmax));
    }
    for (Index n = nb; n < ne; ++n) {
      for (Index ic = 0; ic < Cin; ++ic) {
        const double* __restrict irow = &vx2.at(n, ic, 0);
        if (st > 1 && want_w) poly_build(irow, T, st, jmax, poly.data());
        if (st > 1 && want_x) std::fill(gpoly.begin(), gpoly.end(), 0.0);
        double* __restrict gxrow = want_x ? &gx->at(n, ic, 0) : nullptr;
        for (Index oc = 0; oc < Cout; ++oc) {
          const double* __restrict grow = &g.at(n, oc, 0);
          const double* __restrict wrow = &vw2.at(oc, ic, 0);
          double* __restrict gwrow = want_w ? &gw_t->at(oc, ic, 0) : nullptr;
          for (Index k = 0; k < K; ++k) {
            const Index t0 = k * dil - pad;
            Index lo, hi;
            conv_range(t0, st, T, To, lo, hi);
            if (hi <= lo) continue;
            const Index len = hi - lo;
            const Index q = st > 1 ? floor_div(t0, st) : 0;
            const Index r = st > 1 ? t0 - q * st : 0;
            if (want_x) {
              const double wv = wrow[k];
              if (st == 1) {
                axpy(gxrow + t0 + lo, grow + lo, wv, len);
              } else {
                axpy(gpoly.data() + r * jmax + lo + q, grow + lo, wv, len);
              }
            }
            if (want_w) {
              const double* base = st == 1 ? irow + t0 + lo : poly.data() + r * jmax + lo + q;
              gwrow[k] += dot_fast(grow + lo, base, len);
            }
          }
        }
        if (st > 1 && want_x) poly_scatter_add(gpoly.data(), st, jmax, gxrow, T);
      }
    }
    });
    for (const Tensor& shard : gw_local) {
      for (Index i = 0; i < shard.numel(); ++i) gw->at(i) += shard.at(i);
    }
    if (ib >= 0 && tp.requires_grad(ib)) {
      Tensor& gb = tp.grad(ib);
      for (Index n = 0; n < N; ++n)
        for (Index oc = 0; oc < Cout; ++oc) gb.at(oc) += sum_fast(&g.at(n, oc, 0), To);
    }
  });
}

Var conv_transpose1d(Tape& t, Var x, Var w, Var b, Index stride, Index pad) {
  const Tensor& vx = t.val(x);
  const Tensor& vw = t.val(w);
  if (vx.rank() != 3 || vw.rank() != 3 || vx.dim(1) != vw.dim(0)) {
    throw std::invalid_argument("conv_transpose1d: shape mismatch");
  }
  const Index N = vx.dim(0), Cin = vx.dim(1), T = vx.dim(2);
  const Index Cout = vw.dim(1), K = vw.dim(2);
  const Index To = (T - 1) * stride - 2 * pad + K;
  if (To < 1) throw std::invalid_argument("conv_transpose1d: invalid geometry");

  // out[s*stride + t0] += w * in[s]; polyphase over the output axis
  const Index jmax = (To + stride - 1) / stride;
  Tensor out({N, Cout, To});
  parallel_n(N, [&](Index nb, Index ne, int) {
  std::vector<double> opoly(static_cast<size_t>(stride * jmax));
  for (Index n = nb; n < ne; ++n) {
    for (Index oc = 0; oc < Cout; ++oc) {
      std::fill(opoly.begin(), opoly.end(), 0.0);
      for (Index ic = 0; ic < Cin; ++ic) {
        const double* __restrict irow = &vx.at(n, ic, 0);
        const double* __restrict wrow = &vw.at(ic, oc, 0);
        for (Index k = 0; k < K; ++k) {
          const double wv = wrow[k];
          const Index t0 = k - pad;
          Index lo, hi;
          conv_range(t0, stride, To, T, lo, hi);
          if (hi <= lo) continue;
          const Index q = floor_div(t0, stride);
          const Index r = t0 - q * stride;
          axpy(opoly.data() + r * jmax + lo + q, irow + lo, wv, hi - lo);
        }
      }
      double* __restrict orow = &out.at(n, oc, 0);
      if (b.valid()) {
        const double bv = t.val(b).at(oc);
        for (Index to = 0; to < To; ++to) orow[to] = bv;
      }
      poly_scatter_add(opoly.data(), stride, jmax, orow, To);
    }
  }
  });

  const int ix = x.id, iw = w.id, ib = b.valid() ? b.id : -1;
  return t.node(std::move(out), {ix, iw, ib},
                [ix, iw, ib, N, Cin, T, Cout, K, stride, pad, To, jmax](Tape& tp, int self) {
    const Tensor& g = tp.grad(self);
    const Tensor& vx2 = tp.val(ix);
    const Tensor& vw2 = tp.val(iw);
    const bool want_x = tp.requires_grad(ix);
    const bool want_w = tp.requires_grad(iw);
    Tensor* gx = want_x ? &tp.grad(ix) : nullptr;
    Tensor* gw = want_w ? &tp.grad(iw) : nullptr;
    const int shards = static_cast<int>(std::min<Index>(worker_count(), N));
    std::vector<Tensor> gw_local(want_w && shards > 1 ? shards - 1 : 0, Tensor(vw2.shape));
    parallel_n(N, [&](Index nb, Index ne, int tid) {
    Tensor* gw_t = want_w ? (tid == 0 ? gw : &gw_local[static_cast<size_t>(tid - 1)]) : nullptr;
    std::vector<double> gpoly(static_cast<size_t>(stride * jmax));
    for (Index n = nb; n < ne; ++n) {
      for (Index oc = 0; oc < Cout; ++oc) {
        const double* __restrict grow = &g.at(n, oc, 0);
        poly_build(grow, To, stride, jmax, gpoly.data());
        for (Index ic = 0; ic < Cin; ++ic) {
          const double* __restrict irow = &vx2.at(n, ic, 0);
          const double* __restrict wrow = &vw2.at(ic, oc, 0);
          double* __restrict gxrow = want_x ? &gx->at(n, ic, 0) : nullptr;
          double* __restrict gwrow = want_w ? &gw_t->at(ic, oc, 0) : nullptr;
          for (Index k = 0; k < K; ++k) {
            const Index t0 = k - pad;
            Index lo, hi;
            conv_range(t0, stride, To, T, lo, hi);
            if (hi <= lo) continue;
            const Index len = hi - lo;
            const Index q = floor_div(t0, stride);
            const Index r = t0 - q * stride;
            const double* __restrict gsrc = gpoly.data() + r * jmax + lo + q;
            if (want_x) axpy(gxrow + lo, gsrc, wrow[k], len);
            if (want_w) gwrow[k] += dot_fast(irow + lo, gsrc, len);
          }
        }
      }
    }
    });
    for (const Tensor& shard : gw_local) {
      for (Index i = 0; i < shard.numel(); ++i) gw->at(i) += shard.at(i);
    }
    if (ib >= 0 && tp.requires_grad(ib)) {
      Tensor& gb = tp.grad(ib);
      for (Index n = 0; n < N; ++n)
        for (Index oc = 0; oc < Cout; ++oc) gb.at(oc) += sum_fast(&g.at(n, oc, 0), To);
    }
  });
}

Var conv2d(Tape& t, Var x, Var w, Var b, Index sh, Index sw, Index ph, Index pw) {
  const Tensor& vx = t.val(x);
  const Tensor& vw = t.val(w);
  if (vx.rank() != 4 || vw.rank() != 4 || vx.dim(1) != vw.dim(1)) {
    throw std::invalid_argument("conv2d: shape mismatch");
  }
  const Index N = vx.dim(0), Cin = vx.dim(1), H = vx.dim(2), W = vx.dim(3);
  const Index Cout = vw.dim(0), KH = vw.dim(2), KW = vw.dim(3);
  const Index OH = (H + 2 * ph - KH) / sh + 1;
  const Index OW = (W + 2 * pw - KW) / sw + 1;
  if (OH < 1 || OW < 1) throw std::invalid_argument("conv2d: input too small");

  const Index jmax = (W + sw - 1) / sw;
  Tensor out({N, Cout, OH, OW});
  parallel_n(N, [&](Index nb, Index ne, int) {
  std::vector<double> poly;
  if (sw > 1) poly.resize(static_cast<size_t>(H * sw * jmax));
  for (Index n = nb; n < ne; ++n) {
    if (b.valid()) {
      for (Index oc = 0; oc < Cout; ++oc) {
        const double bv = t.val(b).at(oc);
        double* obase = &out.at(n, oc, 0, 0);
        for (Index i = 0; i < OH * OW; ++i) obase[i] = bv;
      }
    }
    for (Index ic = 0; ic < Cin; ++ic) {
      if (sw > 1) {
        for (Index ih = 0; ih < H; ++ih) {
          poly_build(&vx.at(n, ic, ih, 0), W, sw, jmax, poly.data() + ih * sw * jmax);
        }
      }
      for (Index oc = 0; oc < Cout; ++oc) {
        for (Index kh = 0; kh < KH; ++kh) {
          const Index h0 = kh - ph;
          Index ohlo, ohhi;
          conv_range(h0, sh, H, OH, ohlo, ohhi);
          const double* __restrict wrow = &vw.at(oc, ic, kh, 0);
          for (Index oh = ohlo; oh < ohhi; ++oh) {
            const Index ih = oh * sh + h0;
            const double* __restrict irow = &vx.at(n, ic, ih, 0);
            double* __restrict orow = &out.at(n, oc, oh, 0);
            for (Index kw = 0; kw < KW; ++kw) {
              const double wv = wrow[kw];
              const Index w0 = kw - pw;
              Index lo, hi;
              conv_range(w0, sw, W, OW, lo, hi);
              if (hi <= lo) continue;
              if (sw == 1) {
                axpy(orow + lo, irow + w0 + lo, wv, hi - lo);
              } else {
                const Index q = floor_div(w0, sw);
                const Index r = w0 - q * sw;
                axpy(orow + lo, poly.data() + (ih * sw + r) * jmax + lo + q, wv, hi - lo);
              }
            }
          }
        }
      }
    }
  }
  });

  const int ix = x.id, iw = w.id, ib = b.valid() ? b.id : -1;
  return t.node(std::move(out), {ix, iw, ib},
                [ix, iw, ib, N, Cin, H, W, Cout, KH, KW, sh, sw, ph, pw, OH, OW, jmax](Tape& tp, int self) {
    const Tensor& g = tp.grad(self);
    const Tensor& vx2 = tp.val(ix);
    const Tensor& vw2 = tp.val(iw);
    const bool want_x = tp.requires_grad(ix);
    const bool want_w = tp.requires_grad(iw);
    Tensor* gx = want_x ? &tp.grad(ix) : nullptr;
    Tensor* gw = want_w ? &tp.grad(iw) : nullptr;
    const int shards = static_cast<int>(std::min<Index>(worker_count(), N));
    std::vector<Tensor> gw_local(want_w && shards > 1 ? shards - 1 : 0, Tensor(vw2.shape));
    parallel_n(N, [&](Index nb, Index ne, int tid) {
    Tensor* gw_t = want_w ? (tid == 0 ? gw : &gw_local[static_cast<size_t>(tid - 1)]) : nullptr;
    std::vector<double> poly, gpoly;
    if (sw > 1) {
      if (want_w) poly.resize(static_cast<size_t>(H * sw * jmax));
      if (want_x) gpoly.resize(static_cast<size_t>(H * sw * jmax));
    }
    for (Index n = nb; n < ne; ++n) {
      for (Index ic = 0; ic < Cin; ++ic) {
        if (sw > 1 && want_w) {
          for (Index ih = 0; ih < H; ++ih) {
            poly_build(&vx2.at(n, ic, ih, 0), W, sw, jmax, poly.data() + ih * sw * jmax);
          }
        }
        if (sw > 1 && want_x) std::fill(gpoly.begin(), gpoly.end(), 0.0);
        for (Index oc = 0; oc < Cout; ++oc) {
          for (Index kh = 0; kh < KH; ++kh) {
            const Index h0 = kh - ph;
            Index ohlo, ohhi;
            conv_range(h0, sh, H, OH, ohlo, ohhi);
            const double* __restrict wrow = &vw2.at(oc, ic, kh, 0);
            double* __restrict gwrow = want_w ? &gw_t->at(oc, ic, kh, 0) : nullptr;
            for (Index oh = ohlo; oh < ohhi; ++oh) {
              const Index ih = oh * sh + h0;
              const double* __restrict grow = &g.at(n, oc, oh, 0);
              const double* __restrict irow = &vx2.at(n, ic, ih, 0);
              double* __restrict gxrow = want_x ? &gx->at(n, ic, ih, 0) : nullptr;
              for (Index kw = 0; kw < KW; ++kw) {
                const Index w0 = kw - pw;
                Index lo, hi;
                conv_range(w0, sw, W, OW, lo, hi);
                if (hi <= lo) continue;
                const Index len = hi - lo;
                const Index q = sw > 1 ? floor_div(w0, sw) : 0;
                const Index r = sw > 1 ? w0 - q * sw : 0;
                if (want_x) {
                  const double wv = wrow[kw];
                  if (sw == 1) {
                    axpy(gxrow + w0 + lo, grow + lo, wv, len);
                  } else {
                    axpy(gpoly.data() + (ih * sw + r) * jmax + lo + q, grow + lo, wv, len);
                  }
                }
                if (want_w) {
                  const double* base = sw == 1 ? irow + w0 + lo
                                               : poly.data() + (ih * sw + r) * jmax + lo + q;
                  gwrow[kw] += dot_fast(grow + lo, base, len);
                }
              }
            }
          }
        }
        if (sw > 1 && want_x) {
          for (Index ih = 0; ih < H; ++ih) {
            poly_scatter_add(gpoly.data() + ih * sw * jmax, sw, jmax, &gx->at(n, ic, ih, 0), W);
          }
        }
      }
    }
    });
    for (const Tensor& shard : gw_local) {
      for (Index i = 0; i < shard.numel(); ++i) gw->at(i) += shard.at(i);
    }
    if (ib >= 0 && tp.requires_grad(ib)) {
      Tensor& gb = tp.grad(ib);
      for (Index n = 0; n < N; ++n)
        for (Index oc = 0; oc < Cout; ++oc) gb.at(oc) += sum_fast(&g.at(n, oc, 0, 0), OH * OW);
    }
  });
}

Var weight_norm(Tape& t, Var v, Var g) {
  const Tensor& vv = t.val(v);
  const Tensor& vg = t.val(g);
  const Index OC = vv.dim(0);
  if (vg.numel() != OC) throw std::invalid_argument("weight_norm: gain size mismatch");
  const Index slice = vv.numel() / OC;
  Tensor out = vv;
  std::vector<double> norms(static_cast<size_t>(OC));
  for (Index oc = 0; oc < OC; ++oc) {
    const double* p = vv.ptr() + oc * slice;
    const double ss = dot_fast(p, p, slice);
    const double norm = std::sqrt(ss) + 1e-12;
    norms[static_cast<size_t>(oc)] = norm;
    const double scale = vg.at(oc) / norm;
    double* q = out.ptr() + oc * slice;
    for (Index i = 0; i < slice; ++i) q[i] *= scale;
  }
  const int iv = v.id, ig = g.id;
  return t.node(std::move(out), {iv, ig}, [iv, ig, OC, slice, norms](Tape& tp, int self) {
    const Tensor& gr = tp.grad(self);
    const Tensor& vv2 = tp.val(iv);
    const Tensor& vg2 = tp.val(ig);
    const bool want_v = tp.requires_grad(iv);
    const bool want_g = tp.requires_grad(ig);
    Tensor* gv = want_v ? &tp.grad(iv) : nullptr;
    Tensor* gg = want_g ? &tp.grad(ig) : nullptr;
    for (Index oc = 0; oc < OC; ++oc) {
      const double norm = norms[static_cast<size_t>(oc)];
      const double* vp = vv2.ptr() + oc * slice;
      const double* gp = gr.ptr() + oc * slice;
      // u = v / norm ; dot = <g_out, u>
      double dot = dot_fast(gp, vp, slice);
      dot /= norm;
      if (want_g) gg->at(oc) += dot;
      if (want_v) {
        const double gain = vg2.at(oc);
        double* ov = gv->ptr() + oc * slice;
        const double a = gain / norm;
        const double bcoef = gain * dot / (norm * norm);
        for (Index i = 0; i < slice; ++i) ov[i] += a * gp[i] - bcoef * vp[i];
      }
    }
  });
}

// ----------------------------------------------------------------- reductions

Var sum_all(Tape& t, Var a) {
  const Tensor& v = t.val(a);
  const double s = sum_fast(v.ptr(), v.numel());
  const int ia = a.id;
  return t.node(Tensor::scalar(s), {ia}, [ia](Tape& tp, int self) {
    const double g = tp.grad(self).at(0);
    Tensor& ga = tp.grad(ia);
    for (Index i = 0; i < ga.numel(); ++i) ga.at(i) += g;
  });
}

Var mean_all(Tape& t, Var a) {
  const Tensor& v = t.val(a);
  const double s = sum_fast(v.ptr(), v.numel());
  const double inv = 1.0 / static_cast<double>(v.numel());
  const int ia = a.id;
  return t.node(Tensor::scalar(s * inv), {ia}, [ia, inv](Tape& tp, int self) {
    const double g = tp.grad(self).at(0) * inv;
    Tensor& ga = tp.grad(ia);
    for (Index i = 0; i < ga.numel(); ++i) ga.at(i) += g;
  });
}

Var mean_per_item(Tape& t, Var a) {
  const Tensor& v = t.val(a);
  const Index N = v.dim(0);
  const Index rest = v.numel() / N;
  Tensor out({N});
  for (Index n = 0; n < N; ++n) {
    out.at(n) = sum_fast(v.ptr() + n * rest, rest) / static_cast<double>(rest);
  }
  const int ia = a.id;
  return t.node(std::move(out), {ia}, [ia, N, rest](Tape& tp, int self) {
    const Tensor& g = tp.grad(self);
    Tensor& ga = tp.grad(ia);
    const double inv = 1.0 / static_cast<double>(rest);
    for (Index n = 0; n < N; ++n) {
      const double gn = g.at(n) * inv;
      double* p = ga.ptr() + n * rest;
      for (Index i = 0; i < rest; ++i) p[i] += gn;
    }
  });
}

Var dot_const(Tape& t, Var x, const Tensor& w, double scale) {
  const Tensor& v = t.val(x);
  if (v.numel() != w.numel()) throw std::invalid_argument("dot_const: size mismatch");
  double s = 0.0;
  for (Index i = 0; i < v.numel(); ++i) s += v.at(i) * w.at(i);
  const int ix = x.id;
  Tensor wc = w;
  return t.node(Tensor::scalar(s * scale), {ix}, [ix, wc, scale](Tape& tp, int self) {
    const double g = tp.grad(self).at(0) * scale;
    Tensor& gx = tp.grad(ix);
    for (Index i = 0; i < gx.numel(); ++i) gx.at(i) += g * wc.at(i);
  });
}

// ------------------------------------------------------------------- spectral

Var stft_mag(Tape& t, Var x, const StftPlan& plan) {
  const Tensor& v = t.val(x);
  if (v.rank() != 2) throw std::invalid_argument("stft_mag: expects (N, T)");
  const Index N = v.dim(0), T = v.dim(2 - 1);
  const Index nbins = plan.bins();
  const Index nframes = plan.frames_for(T);
  Tensor out({N, nbins, nframes});
  parallel_n(N, [&](Index nb, Index ne, int) {
    for (Index n = nb; n < ne; ++n) {
      plan.magnitude(v.ptr() + n * T, T, out.ptr() + n * nbins * nframes);
    }
  });
  const int ix = x.id;
  StftPlan pcopy = plan;
  return t.node(std::move(out), {ix}, [ix, pcopy, N, T](Tape& tp, int self) {
    const Tensor& g = tp.grad(self);
    const Tensor& v2 = tp.val(ix);
    Tensor& gx = tp.grad(ix);
    const Index per = g.numel() / N;
    parallel_n(N, [&](Index nb, Index ne, int) {
      for (Index n = nb; n < ne; ++n) {
        pcopy.magnitude_backward(v2.ptr() + n * T, T, g.ptr() + n * per, gx.ptr() + n * T);
      }
    });
  });
}

// ----------------------------------------------------------------- composites

Var l1_mean(Tape& t, Var a, Var b) { return mean_all(t, abs_op(t, sub(t, a, b))); }

Var mse_mean(Tape& t, Var a, Var b) { return mean_all(t, square(t, sub(t, a, b))); }

}  // namespace vpfd::nn
