#pragma once

#include "sofs/backend.hpp"
#include "sofs/tensor.hpp"

namespace sofs {

struct LossConfig {
  float eta = 1e5f;      // steepness of the normal-sample penalty
  float beta = 1.0f;     // weight of the normal-sample penalty
  float gamma = 0.01f;   // weight of the cross-entropy term
  float dice_eps = 1.0f; // smoothing added to the Dice numerator/denominator
  float prob_eps = 1e-7f;

  void validate() const {
    if (!(eta > 0.0f)) throw ParameterError("loss: eta must be positive");
    if (!(dice_eps > 0.0f)) throw ParameterError("loss: dice_eps must be positive");
    if (beta < 0.0f || gamma < 0.0f) throw ParameterError("loss: negative weight");
  }
};

namespace detail {

template <typename T>
double tensor_sum(const TensorT<T>& t) {
  double s = 0.0;
  for (long long i = 0; i < t.size(); ++i) s += static_cast<double>(t[i]);
  return s;
}

// Dice on defective targets, steep hyperbolic penalty on empty targets:
//   t * (1 - (2*sum(X.Y) + eps) / (sum(X) + sum(Y) + eps))
//   + beta * (1-t) * (1 - 1 / (eta*sum(X) + 1)),   t = [sum(Y) > 0].
// The target branch is decided from Y, which is never parameter-dependent.
template <class B, typename V = typename B::Val>
V mixed_normal_dice_t(B& b, V X, const Tensor& Y, const LossConfig& cfg) {
  const double sy = tensor_sum(Y);
  V one = b.constant(Tensor::scalar(1.0f));
  if (sy > 0.0) {
    V inter = b.sum_all(b.mul(X, b.constant(Y)));
    V num = b.add_scalar(b.scale(inter, 2.0), cfg.dice_eps);
    V den = b.add_scalar(b.sum_all(X), sy + cfg.dice_eps);
    return b.sub(one, b.div(num, den));
  }
  V den = b.add_scalar(b.scale(b.sum_all(X), cfg.eta), 1.0);
  return b.scale(b.sub(one, b.div(one, den)), cfg.beta);
}

// Pixel-mean binary cross entropy on probabilities clamped away from {0,1}.
// The clamp bounds are binary32 values so both instantiations compute the
// same function.
template <class B, typename V = typename B::Val>
V bce_t(B& b, V X, const Tensor& Y, const LossConfig& cfg) {
  const double lo = static_cast<double>(cfg.prob_eps);
  const double hi = static_cast<double>(1.0f - cfg.prob_eps);
  V xc = b.clamp(X, lo, hi);
  V ones = b.constant(Tensor::full(Y.shape(), 1.0f));
  Tensor y_neg(Y.shape());
  for (long long i = 0; i < Y.size(); ++i) y_neg[i] = 1.0f - Y[i];
  V pos = b.mul(b.constant(Y), b.lognat(xc));
  V neg = b.mul(b.constant(y_neg), b.lognat(b.sub(ones, xc)));
  return b.scale(b.mean_all(b.add(pos, neg)), -1.0);
}

template <class B, typename V = typename B::Val>
V total_loss_t(B& b, V X, const Tensor& Y, const LossConfig& cfg) {
  V mndl = mixed_normal_dice_t(b, X, Y, cfg);
  if (cfg.gamma == 0.0f) return mndl;
  return b.add(mndl, b.scale(bce_t(b, X, Y, cfg), cfg.gamma));
}

// Plain smoothed Dice everywhere (the mixed loss with its normal branch
// removed); training ablation baseline.
template <class B, typename V = typename B::Val>
V plain_dice_t(B& b, V X, const Tensor& Y, const LossConfig& cfg) {
  const double sy = tensor_sum(Y);
  V one = b.constant(Tensor::scalar(1.0f));
  V inter = b.sum_all(b.mul(X, b.constant(Y)));
  V num = b.add_scalar(b.scale(inter, 2.0), cfg.dice_eps);
  V den = b.add_scalar(b.sum_all(X), sy + cfg.dice_eps);
  return b.sub(one, b.div(num, den));
}

}  // namespace detail

// Eager binary32 entry points.

inline float mixed_normal_dice(const Tensor& X, const Tensor& Y, const LossConfig& cfg) {
  require_same_shape("mixed_normal_dice", X.shape(), Y.shape());
  cfg.validate();
  EagerBackend<float> b;
  return detail::mixed_normal_dice_t(b, X, Y, cfg)[0];
}

inline float bce(const Tensor& X, const Tensor& Y, const LossConfig& cfg = {}) {
  require_same_shape("bce", X.shape(), Y.shape());
  EagerBackend<float> b;
  return detail::bce_t(b, X, Y, cfg)[0];
}

inline float total_loss(const Tensor& X, const Tensor& Y, const LossConfig& cfg) {
  require_same_shape("total_loss", X.shape(), Y.shape());
  cfg.validate();
  EagerBackend<float> b;
  return detail::total_loss_t(b, X, Y, cfg)[0];
}

}  // namespace sofs
