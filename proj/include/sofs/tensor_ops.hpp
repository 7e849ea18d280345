#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <vector>

#include "sofs/tensor.hpp"

// Value-level kernels shared by the autodiff tape (binary32) and the eager
// reference path (binary64) used for finite-difference verification. All
// reductions and matrix-product inner loops accumulate in binary64
// regardless of the storage scalar.
namespace sofs::ops {

template <typename T>
using EMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatMap = Eigen::Map<EMat<T>>;
template <typename T>
using CMatMap = Eigen::Map<const EMat<T>>;
template <typename T>
using CArrMap = Eigen::Map<const Eigen::Array<T, Eigen::Dynamic, 1>>;
template <typename T>
using ArrMap = Eigen::Map<Eigen::Array<T, Eigen::Dynamic, 1>>;

template <typename T>
CMatMap<T> mat(const TensorT<T>& t) {
  if (t.ndim() != 2) throw DimensionError("expected 2-D tensor, got " + shape_str(t.shape()));
  return CMatMap<T>(t.data(), t.dim(0), t.dim(1));
}

template <typename T>
MatMap<T> mat(TensorT<T>& t) {
  if (t.ndim() != 2) throw DimensionError("expected 2-D tensor, got " + shape_str(t.shape()));
  return MatMap<T>(t.data(), t.dim(0), t.dim(1));
}

// ---- matrix products ----

template <typename T>
TensorT<T> matmul(const TensorT<T>& a, const TensorT<T>& b) {
  if (a.ndim() != 2 || b.ndim() != 2 || a.dim(1) != b.dim(0)) {
    throw DimensionError("matmul: incompatible shapes " + shape_str(a.shape()) + " and " +
                         shape_str(b.shape()));
  }
  TensorT<T> out({a.dim(0), b.dim(1)});
  if constexpr (std::is_same_v<T, double>) {
    mat(out).noalias() = mat(a) * mat(b);
  } else {
    EMat<double> prod = mat(a).template cast<double>() * mat(b).template cast<double>();
    MatMap<T>(out.data(), out.dim(0), out.dim(1)) = prod.cast<T>();
  }
  return out;
}

// a (m x k) times b^T (k x n), with b given as n x k.
template <typename T>
TensorT<T> matmul_nt(const TensorT<T>& a, const TensorT<T>& b) {
  if (a.ndim() != 2 || b.ndim() != 2 || a.dim(1) != b.dim(1)) {
    throw DimensionError("matmul_nt: incompatible shapes " + shape_str(a.shape()) + " and " +
                         shape_str(b.shape()));
  }
  TensorT<T> out({a.dim(0), b.dim(0)});
  if constexpr (std::is_same_v<T, double>) {
    mat(out).noalias() = mat(a) * mat(b).transpose();
  } else {
    EMat<double> prod =
        mat(a).template cast<double>() * mat(b).template cast<double>().transpose();
    MatMap<T>(out.data(), out.dim(0), out.dim(1)) = prod.cast<T>();
  }
  return out;
}

template <typename T>
TensorT<T> transpose(const TensorT<T>& a) {
  TensorT<T> out({a.dim(1), a.dim(0)});
  mat(out) = mat(a).transpose();
  return out;
}

// ---- elementwise ----

template <typename T, typename F>
TensorT<T> map_unary(const TensorT<T>& a, F f) {
  TensorT<T> out(a.shape());
  for (long long i = 0; i < a.size(); ++i) out[i] = f(a[i]);
  return out;
}

template <typename T, typename F>
TensorT<T> map_binary(const char* op, const TensorT<T>& a, const TensorT<T>& b, F f) {
  require_same_shape(op, a.shape(), b.shape());
  TensorT<T> out(a.shape());
  for (long long i = 0; i < a.size(); ++i) out[i] = f(a[i], b[i]);
  return out;
}

template <typename T>
TensorT<T> add(const TensorT<T>& a, const TensorT<T>& b) {
  return map_binary("add", a, b, [](T x, T y) { return x + y; });
}
template <typename T>
TensorT<T> sub(const TensorT<T>& a, const TensorT<T>& b) {
  return map_binary("sub", a, b, [](T x, T y) { return x - y; });
}
template <typename T>
TensorT<T> mul(const TensorT<T>& a, const TensorT<T>& b) {
  return map_binary("mul", a, b, [](T x, T y) { return x * y; });
}
template <typename T>
TensorT<T> div(const TensorT<T>& a, const TensorT<T>& b) {
  return map_binary("div", a, b, [](T x, T y) { return x / y; });
}
template <typename T>
TensorT<T> scale(const TensorT<T>& a, T s) {
  return map_unary(a, [s](T x) { return x * s; });
}
template <typename T>
TensorT<T> add_scalar(const TensorT<T>& a, T s) {
  return map_unary(a, [s](T x) { return x + s; });
}
template <typename T>
TensorT<T> relu(const TensorT<T>& a) {
  return map_unary(a, [](T x) { return x > T(0) ? x : T(0); });
}
template <typename T>
TensorT<T> lognat(const TensorT<T>& a) {
  return map_unary(a, [](T x) { return static_cast<T>(std::log(static_cast<double>(x))); });
}
template <typename T>
TensorT<T> clamp_min(const TensorT<T>& a, T lo) {
  return map_unary(a, [lo](T x) { return x < lo ? lo : x; });
}
template <typename T>
TensorT<T> clamp(const TensorT<T>& a, T lo, T hi) {
  return map_unary(a, [lo, hi](T x) { return x < lo ? lo : (x > hi ? hi : x); });
}

// Sigmoid outputs are pinned inside the open unit interval even after
// rounding to the storage scalar; the bounds are exact in binary32.
inline constexpr double kSigmoidLo = 1e-30;
inline constexpr double kSigmoidHi = 1.0 - 0x1.0p-24;

template <typename T>
TensorT<T> sigmoid(const TensorT<T>& a) {
  return map_unary(a, [](T x) {
    double s = 1.0 / (1.0 + std::exp(-static_cast<double>(x)));
    s = std::min(std::max(s, kSigmoidLo), kSigmoidHi);
    return static_cast<T>(s);
  });
}

// ---- reductions ----

template <typename T>
double sum_all_d(const TensorT<T>& a) {
  double s = 0.0;
  for (long long i = 0; i < a.size(); ++i) s += static_cast<double>(a[i]);
  return s;
}

template <typename T>
TensorT<T> sum_all(const TensorT<T>& a) {
  return TensorT<T>::scalar(static_cast<T>(sum_all_d(a)));
}

template <typename T>
TensorT<T> mean_all(const TensorT<T>& a) {
  return TensorT<T>::scalar(static_cast<T>(sum_all_d(a) / static_cast<double>(a.size())));
}

// Row-wise maximum of a 2-D tensor; optionally reports argmax per row.
template <typename T>
TensorT<T> rowmax(const TensorT<T>& a, std::vector<int>* argmax = nullptr) {
  if (a.ndim() != 2) throw DimensionError("rowmax: expected 2-D, got " + shape_str(a.shape()));
  int n = a.dim(0), c = a.dim(1);
  TensorT<T> out({n, 1});
  if (argmax) argmax->assign(static_cast<size_t>(n), 0);
  for (int i = 0; i < n; ++i) {
    T best = a.at(i, 0);
    int bj = 0;
    for (int j = 1; j < c; ++j) {
      if (a.at(i, j) > best) {
        best = a.at(i, j);
        bj = j;
      }
    }
    out[i] = best;
    if (argmax) (*argmax)[static_cast<size_t>(i)] = bj;
  }
  return out;
}

// ---- softmax / normalization ----

// Softmax along `axis` with temperature, stabilized by max subtraction.
// Slice sums are accumulated in binary64.
template <typename T>
TensorT<T> softmax_axis(const TensorT<T>& x, int axis, T temperature) {
  if (!(temperature > T(0))) throw ParameterError("softmax_axis: temperature must be positive");
  if (axis < 0 || axis >= x.ndim())
    throw ParameterError("softmax_axis: axis " + std::to_string(axis) + " out of range for " +
                         shape_str(x.shape()));
  long long outer = 1, inner = 1;
  for (int i = 0; i < axis; ++i) outer *= x.dim(i);
  for (int i = axis + 1; i < x.ndim(); ++i) inner *= x.dim(i);
  long long n = x.dim(axis);

  TensorT<T> out(x.shape());
  const double inv_t = 1.0 / static_cast<double>(temperature);
  std::vector<double> e(static_cast<size_t>(n));
  for (long long o = 0; o < outer; ++o) {
    for (long long in = 0; in < inner; ++in) {
      const long long base = o * n * inner + in;
      double mx = -std::numeric_limits<double>::infinity();
      for (long long j = 0; j < n; ++j)
        mx = std::max(mx, static_cast<double>(x[base + j * inner]));
      double denom = 0.0;
      for (long long j = 0; j < n; ++j) {
        double v = std::exp((static_cast<double>(x[base + j * inner]) - mx) * inv_t);
        e[static_cast<size_t>(j)] = v;
        denom += v;
      }
      for (long long j = 0; j < n; ++j)
        out[base + j * inner] = static_cast<T>(e[static_cast<size_t>(j)] / denom);
    }
  }
  return out;
}

// Rows scaled to unit Euclidean norm; rows with norm below epsilon are
// divided by epsilon instead (zero rows stay zero).
template <typename T>
TensorT<T> l2_normalize_rows(const TensorT<T>& x, T epsilon) {
  if (x.ndim() != 2)
    throw DimensionError("l2_normalize_rows: expected 2-D, got " + shape_str(x.shape()));
  int n = x.dim(0), c = x.dim(1);
  TensorT<T> out(x.shape());
  for (int i = 0; i < n; ++i) {
    double ss = 0.0;
    for (int j = 0; j < c; ++j) {
      double v = x.at(i, j);
      ss += v * v;
    }
    double norm = std::max(std::sqrt(ss), static_cast<double>(epsilon));
    for (int j = 0; j < c; ++j) out.at(i, j) = static_cast<T>(x.at(i, j) / norm);
  }
  return out;
}

// ---- layout ----

template <typename T>
TensorT<T> concat_rows(const std::vector<const TensorT<T>*>& parts) {
  if (parts.empty()) throw ParameterError("concat_rows: no inputs");
  int c = parts[0]->dim(1), n = 0;
  for (auto* p : parts) {
    if (p->ndim() != 2 || p->dim(1) != c)
      throw DimensionError("concat_rows: column mismatch at " + shape_str(p->shape()));
    n += p->dim(0);
  }
  TensorT<T> out({n, c});
  T* dst = out.data();
  for (auto* p : parts) {
    std::copy(p->data(), p->data() + p->size(), dst);
    dst += p->size();
  }
  return out;
}

template <typename T>
TensorT<T> concat_cols(const std::vector<const TensorT<T>*>& parts) {
  if (parts.empty()) throw ParameterError("concat_cols: no inputs");
  int n = parts[0]->dim(0), c = 0;
  for (auto* p : parts) {
    if (p->ndim() != 2 || p->dim(0) != n)
      throw DimensionError("concat_cols: row mismatch at " + shape_str(p->shape()));
    c += p->dim(1);
  }
  TensorT<T> out({n, c});
  int col = 0;
  for (auto* p : parts) {
    int pc = p->dim(1);
    for (int i = 0; i < n; ++i)
      std::copy(p->data() + static_cast<size_t>(i) * pc, p->data() + static_cast<size_t>(i + 1) * pc,
                out.data() + static_cast<size_t>(i) * c + col);
    col += pc;
  }
  return out;
}

template <typename T>
TensorT<T> slice_cols(const TensorT<T>& x, int c0, int c1) {
  if (x.ndim() != 2 || c0 < 0 || c1 > x.dim(1) || c0 >= c1)
    throw DimensionError("slice_cols: range [" + std::to_string(c0) + "," + std::to_string(c1) +
                         ") invalid for " + shape_str(x.shape()));
  int n = x.dim(0), w = c1 - c0;
  TensorT<T> out({n, w});
  for (int i = 0; i < n; ++i)
    std::copy(x.data() + static_cast<size_t>(i) * x.dim(1) + c0,
              x.data() + static_cast<size_t>(i) * x.dim(1) + c1,
              out.data() + static_cast<size_t>(i) * w);
  return out;
}

// Repeat a length-c row vector (shape {c} or {1,c}) n times -> n x c.
template <typename T>
TensorT<T> broadcast_row(const TensorT<T>& v, int n) {
  long long c = v.size();
  TensorT<T> out({n, static_cast<int>(c)});
  for (int i = 0; i < n; ++i)
    std::copy(v.data(), v.data() + c, out.data() + static_cast<size_t>(i) * c);
  return out;
}

// Row i of x (n x c) scaled by m[i].
template <typename T>
TensorT<T> scale_rows(const TensorT<T>& x, const TensorT<T>& m) {
  if (x.ndim() != 2 || m.size() != x.dim(0))
    throw DimensionError("scale_rows: " + shape_str(x.shape()) + " vs " + shape_str(m.shape()));
  TensorT<T> out(x.shape());
  int n = x.dim(0), c = x.dim(1);
  for (int i = 0; i < n; ++i) {
    T s = m[i];
    for (int j = 0; j < c; ++j) out.at(i, j) = x.at(i, j) * s;
  }
  return out;
}

// Column j of x (n x c) scaled by m[j].
template <typename T>
TensorT<T> scale_cols(const TensorT<T>& x, const TensorT<T>& m) {
  if (x.ndim() != 2 || m.size() != x.dim(1))
    throw DimensionError("scale_cols: " + shape_str(x.shape()) + " vs " + shape_str(m.shape()));
  TensorT<T> out(x.shape());
  int n = x.dim(0), c = x.dim(1);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < c; ++j) out.at(i, j) = x.at(i, j) * m[j];
  return out;
}

// ---- spatial ops on H x W x C tensors ----

inline void require_hwc(const char* op, const std::vector<int>& s) {
  if (s.size() != 3)
    throw DimensionError(std::string(op) + ": expected H x W x C, got " + shape_str(s));
}

// 2-D convolution, zero padding. Weights are kh x kw x Cin x Cout.
// Realized as im2col followed by a matrix product so the inner loops share
// the binary64-accumulating GEMM.
template <typename T>
TensorT<T> conv2d(const TensorT<T>& x, const TensorT<T>& w, const TensorT<T>& b, int stride,
                  int pad) {
  require_hwc("conv2d", x.shape());
  if (w.ndim() != 4 || w.dim(2) != x.dim(2))
    throw DimensionError("conv2d: weight " + shape_str(w.shape()) + " does not match input " +
                         shape_str(x.shape()));
  const int H = x.dim(0), W = x.dim(1), Cin = x.dim(2);
  const int kh = w.dim(0), kw = w.dim(1), Cout = w.dim(3);
  if (b.size() != Cout)
    throw DimensionError("conv2d: bias " + shape_str(b.shape()) + " vs Cout " + std::to_string(Cout));
  const int Ho = (H + 2 * pad - kh) / stride + 1;
  const int Wo = (W + 2 * pad - kw) / stride + 1;
  if (Ho <= 0 || Wo <= 0) throw DimensionError("conv2d: kernel larger than padded input");

  const int patch = kh * kw * Cin;
  TensorT<T> cols({Ho * Wo, patch});
  T* cp = cols.data();
  for (int oy = 0; oy < Ho; ++oy) {
    for (int ox = 0; ox < Wo; ++ox) {
      for (int ky = 0; ky < kh; ++ky) {
        const int iy = oy * stride + ky - pad;
        for (int kx = 0; kx < kw; ++kx) {
          const int ix = ox * stride + kx - pad;
          if (iy >= 0 && iy < H && ix >= 0 && ix < W) {
            const T* src = x.data() + (static_cast<size_t>(iy) * W + ix) * Cin;
            std::copy(src, src + Cin, cp);
          } else {
            std::fill(cp, cp + Cin, T(0));
          }
          cp += Cin;
        }
      }
    }
  }
  TensorT<T> wm = w.reshaped({patch, Cout});
  TensorT<T> prod = matmul(cols, wm);
  TensorT<T> out({Ho, Wo, Cout});
  for (long long i = 0; i < static_cast<long long>(Ho) * Wo; ++i)
    for (int c = 0; c < Cout; ++c) out[i * Cout + c] = prod[i * Cout + c] + b[c];
  return out;
}

// 2 x 2 average pooling, stride 2. H and W must be even.
template <typename T>
TensorT<T> avg_pool2(const TensorT<T>& x) {
  require_hwc("avg_pool2", x.shape());
  const int H = x.dim(0), W = x.dim(1), C = x.dim(2);
  if (H % 2 || W % 2)
    throw DimensionError("avg_pool2: odd spatial size " + shape_str(x.shape()));
  TensorT<T> out({H / 2, W / 2, C});
  for (int y = 0; y < H / 2; ++y)
    for (int xo = 0; xo < W / 2; ++xo)
      for (int c = 0; c < C; ++c) {
        double s = static_cast<double>(x[(static_cast<long long>(2 * y) * W + 2 * xo) * C + c]) +
                   x[(static_cast<long long>(2 * y) * W + 2 * xo + 1) * C + c] +
                   x[(static_cast<long long>(2 * y + 1) * W + 2 * xo) * C + c] +
                   x[(static_cast<long long>(2 * y + 1) * W + 2 * xo + 1) * C + c];
        out[(static_cast<long long>(y) * (W / 2) + xo) * C + c] = static_cast<T>(s * 0.25);
      }
  return out;
}

inline int nearest_src(int i, int in, int out) {
  // half-pixel centers; matches the usual align_corners=false convention
  double scale = static_cast<double>(in) / out;
  int s = static_cast<int>(std::floor((i + 0.5) * scale));
  return std::min(std::max(s, 0), in - 1);
}

template <typename T>
TensorT<T> resample_nearest(const TensorT<T>& x, int Ho, int Wo) {
  require_hwc("resample_nearest", x.shape());
  const int H = x.dim(0), W = x.dim(1), C = x.dim(2);
  TensorT<T> out({Ho, Wo, C});
  for (int y = 0; y < Ho; ++y) {
    const int sy = nearest_src(y, H, Ho);
    for (int xo = 0; xo < Wo; ++xo) {
      const int sx = nearest_src(xo, W, Wo);
      const T* src = x.data() + (static_cast<size_t>(sy) * W + sx) * C;
      std::copy(src, src + C, out.data() + (static_cast<size_t>(y) * Wo + xo) * C);
    }
  }
  return out;
}

struct BilinearTap {
  int i0, i1;
  double w0, w1;
};

inline BilinearTap bilinear_tap(int i, int in, int out) {
  double src = (i + 0.5) * (static_cast<double>(in) / out) - 0.5;
  double f = std::floor(src);
  int i0 = static_cast<int>(f);
  double t = src - f;
  int i1 = i0 + 1;
  i0 = std::min(std::max(i0, 0), in - 1);
  i1 = std::min(std::max(i1, 0), in - 1);
  return {i0, i1, 1.0 - t, t};
}

// Bilinear resize (both directions), half-pixel centers, edge clamped.
template <typename T>
TensorT<T> resize_bilinear(const TensorT<T>& x, int Ho, int Wo) {
  require_hwc("resize_bilinear", x.shape());
  const int H = x.dim(0), W = x.dim(1), C = x.dim(2);
  TensorT<T> out({Ho, Wo, C});
  std::vector<BilinearTap> tx(static_cast<size_t>(Wo));
  for (int xo = 0; xo < Wo; ++xo) tx[static_cast<size_t>(xo)] = bilinear_tap(xo, W, Wo);
  for (int y = 0; y < Ho; ++y) {
    BilinearTap ty = bilinear_tap(y, H, Ho);
    for (int xo = 0; xo < Wo; ++xo) {
      const BilinearTap& t = tx[static_cast<size_t>(xo)];
      for (int c = 0; c < C; ++c) {
        auto px = [&](int yy, int xx) {
          return static_cast<double>(x[(static_cast<long long>(yy) * W + xx) * C + c]);
        };
        double v = ty.w0 * (t.w0 * px(ty.i0, t.i0) + t.w1 * px(ty.i0, t.i1)) +
                   ty.w1 * (t.w0 * px(ty.i1, t.i0) + t.w1 * px(ty.i1, t.i1));
        out[(static_cast<long long>(y) * Wo + xo) * C + c] = static_cast<T>(v);
      }
    }
  }
  return out;
}

}  // namespace sofs::ops
