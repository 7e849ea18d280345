#pragma once

#include "sofs/autodiff.hpp"
#include "sofs/tensor_ops.hpp"

namespace sofs {

// The model forward is written once against this implicit interface and
// instantiated twice: on the binary32 tape for training/inference, and on
// eager binary64 tensors for the finite-difference gradient oracle.

struct TapeBackend {
  Graph& g;
  using Val = Var;
  static constexpr bool kTape = true;

  Val constant(const Tensor& t) { return g.constant(t); }
  Val matmul(Val a, Val b) { return g.matmul(a, b); }
  Val matmul_nt(Val a, Val b) { return g.matmul_nt(a, b); }
  Val add(Val a, Val b) { return g.add(a, b); }
  Val sub(Val a, Val b) { return g.sub(a, b); }
  Val mul(Val a, Val b) { return g.mul(a, b); }
  Val div(Val a, Val b) { return g.div(a, b); }
  Val scale(Val a, double s) { return g.scale(a, static_cast<float>(s)); }
  Val add_scalar(Val a, double s) { return g.add_scalar(a, static_cast<float>(s)); }
  Val sigmoid(Val a) { return g.sigmoid(a); }
  Val lognat(Val a) { return g.lognat(a); }
  Val clamp_min(Val a, double lo) { return g.clamp_min(a, static_cast<float>(lo)); }
  Val clamp(Val a, double lo, double hi) {
    return g.clamp(a, static_cast<float>(lo), static_cast<float>(hi));
  }
  Val softmax_axis(Val a, int axis, double t) {
    return g.softmax_axis(a, axis, static_cast<float>(t));
  }
  Val l2_normalize_rows(Val a, double eps) {
    return g.l2_normalize_rows(a, static_cast<float>(eps));
  }
  Val sum_all(Val a) { return g.sum_all(a); }
  Val mean_all(Val a) { return g.mean_all(a); }
  Val reshape(Val a, std::vector<int> s) { return g.reshape(a, std::move(s)); }
  Val concat_rows(const std::vector<Val>& v) { return g.concat_rows(v); }
  Val concat_cols(const std::vector<Val>& v) { return g.concat_cols(v); }
  Val slice_cols(Val a, int c0, int c1) { return g.slice_cols(a, c0, c1); }
  Val broadcast_row(Val v, int n) { return g.broadcast_row(v, n); }
  Val scale_rows(Val a, const Tensor& w) { return g.scale_rows(a, w); }
  Val upsample_bilinear(Val a, int Ho, int Wo) { return g.upsample_bilinear(a, Ho, Wo); }

  int rows(Val a) const { return g.value(a).dim(0); }
  int cols(Val a) const { return g.value(a).dim(1); }
};

template <typename T>
struct EagerBackend {
  using Val = TensorT<T>;
  static constexpr bool kTape = false;

  Val constant(const Tensor& t) { return t.template cast<T>(); }
  Val matmul(const Val& a, const Val& b) { return ops::matmul(a, b); }
  Val matmul_nt(const Val& a, const Val& b) { return ops::matmul_nt(a, b); }
  Val add(const Val& a, const Val& b) { return ops::add(a, b); }
  Val sub(const Val& a, const Val& b) { return ops::sub(a, b); }
  Val mul(const Val& a, const Val& b) { return ops::mul(a, b); }
  Val div(const Val& a, const Val& b) { return ops::div(a, b); }
  Val scale(const Val& a, double s) { return ops::scale(a, static_cast<T>(s)); }
  Val add_scalar(const Val& a, double s) { return ops::add_scalar(a, static_cast<T>(s)); }
  Val sigmoid(const Val& a) { return ops::sigmoid(a); }
  Val lognat(const Val& a) { return ops::lognat(a); }
  Val clamp_min(const Val& a, double lo) { return ops::clamp_min(a, static_cast<T>(lo)); }
  Val clamp(const Val& a, double lo, double hi) {
    return ops::clamp(a, static_cast<T>(lo), static_cast<T>(hi));
  }
  Val softmax_axis(const Val& a, int axis, double t) {
    return ops::softmax_axis(a, axis, static_cast<T>(t));
  }
  Val l2_normalize_rows(const Val& a, double eps) {
    return ops::l2_normalize_rows(a, static_cast<T>(eps));
  }
  Val sum_all(const Val& a) { return ops::sum_all(a); }
  Val mean_all(const Val& a) { return ops::mean_all(a); }
  Val reshape(const Val& a, std::vector<int> s) { return a.reshaped(std::move(s)); }
  Val concat_rows(const std::vector<Val>& v) {
    std::vector<const Val*> ptrs;
    for (const auto& x : v) ptrs.push_back(&x);
    return ops::concat_rows(ptrs);
  }
  Val concat_cols(const std::vector<Val>& v) {
    std::vector<const Val*> ptrs;
    for (const auto& x : v) ptrs.push_back(&x);
    return ops::concat_cols(ptrs);
  }
  Val slice_cols(const Val& a, int c0, int c1) { return ops::slice_cols(a, c0, c1); }
  Val broadcast_row(const Val& v, int n) { return ops::broadcast_row(v, n); }
  Val scale_rows(const Val& a, const Tensor& w) {
    return ops::scale_rows(a, w.template cast<T>());
  }
  Val upsample_bilinear(const Val& a, int Ho, int Wo) {
    return ops::resize_bilinear(a, Ho, Wo);
  }

  int rows(const Val& a) const { return a.dim(0); }
  int cols(const Val& a) const { return a.dim(1); }
};

}  // namespace sofs
