#pragma once

#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

#include "sofs/backend.hpp"
#include "sofs/tensor.hpp"

namespace sofs {

// Axis of the reverse softmax in the non-learnable fusion. QueryAxis
// normalizes each support column over query positions (inverted softmax);
// SupportAxis is the conventional per-query row normalization, kept for
// ablation.
enum class FuseAxis { QueryAxis, SupportAxis };

enum class MaskDownsample { PrototypeIntensity, Bilinear };

struct HeadConfig {
  int channels = 96;  // C, encoder feature width
  int embed = 64;     // C1, width after the 1x1 projections
  int heads = 4;
  float tau = 0.1f;  // fixed fusion temperature, non-trainable
  float l2_eps = 1e-12f;
  FuseAxis fuse_axis = FuseAxis::QueryAxis;
  MaskDownsample mask_downsample = MaskDownsample::PrototypeIntensity;
};

// Trainable parameters: two 1x1 projections (query branch sees two extra
// prior channels) and one shared residual self-attention block.
struct HeadParams {
  Tensor conv_q_w, conv_q_b;
  Tensor conv_s_w, conv_s_b;
  Tensor attn_q_w, attn_q_b;
  Tensor attn_k_w, attn_k_b;
  Tensor attn_v_w, attn_v_b;
  Tensor attn_o_w, attn_o_b;

  static HeadParams init(const HeadConfig& cfg, uint64_t seed);

  // Stable name -> tensor listing; the order defines checkpoint layout and
  // optimizer slot order.
  std::vector<std::pair<std::string, Tensor*>> named();
  std::vector<std::pair<std::string, const Tensor*>> named() const;
};

template <typename V>
struct HeadParamVars {
  V conv_q_w, conv_q_b, conv_s_w, conv_s_b;
  V attn_q_w, attn_q_b, attn_k_w, attn_k_b, attn_v_w, attn_v_b, attn_o_w, attn_o_b;
};

// ---- mask downsampling ----

// Block mean of an H̄ x W̄ mask over l x l blocks: each output cell reports
// the exact fraction of set pixels in its receptive block.
Tensor downsample_mask(const Tensor& mask, int l);

// Bilinear baseline (4-tap), for the ablation of the block-mean variant.
Tensor bilinear_downsample_mask(const Tensor& mask, int l);

// ---- prior generation (frozen-feature side, eager binary32) ----

// Weighted spatial mean: sum_xy F[xy] * M[xy] / sum(M). F is HW x C (or
// H x W x C), M has HW entries. sum(M) must be positive.
Tensor masked_avg_pool(const Tensor& features, const Tensor& mask_weights);

// Per query location, max over support locations of cos(Fq_j, Fs_k) * m̂_k.
Tensor semantic_prior_map(const Tensor& Fq, const Tensor& Fs, const Tensor& m_hat,
                          float l2_eps = 1e-12f);

// 1 - max over support locations of cos(Fq_j, Fs_k) * (1 - m̂_k).
Tensor abnormal_prior_map(const Tensor& Fq, const Tensor& Fs, const Tensor& m_hat,
                          float l2_eps = 1e-12f);

// ---- episode-level assembly ----

// Everything the trainable head consumes, all constant w.r.t. HeadParams.
// Feature matrices are HW x C; prior maps and mask weights are flat HW.
struct EpisodeFeatures {
  int h = 0, w = 0;            // query grid
  Tensor query;                // HW x C
  std::vector<Tensor> support;        // per support crop, HWs x C
  std::vector<Tensor> support_m_hat;  // per support crop, HWs
  double raw_mask_sum = 0.0;   // over all raw support masks, pre-downsampling
  Tensor proto;                // {1, C}; complement-mask pool when raw_mask_sum == 0
  Tensor prior_semantic;       // {HW}
  Tensor prior_abnormal;       // {HW}
};

// Builds m̂, the prototype and the K-averaged prior maps from frozen
// features and raw support masks.
EpisodeFeatures build_episode_features(const Tensor& query_hwc,
                                       const std::vector<Tensor>& support_hwc,
                                       const std::vector<Tensor>& raw_support_masks, int l,
                                       const HeadConfig& cfg);

struct EpisodeOutput {
  bool fad = false;
  Tensor prediction;   // {H, W}, probabilities in [0,1]
  Tensor fused;        // HW x C1
  Tensor proto_fused;  // {1, C1}
};

// Full head forward for one episode (any K >= 1), eager binary32.
EpisodeOutput forward_episode(const EpisodeFeatures& ef, const HeadParams& params,
                              const HeadConfig& cfg);

// ---- 1-shot operations (spec surface, eager binary32) ----

std::pair<Tensor, Tensor> augment(const Tensor& Fq, const Tensor& Fs, const Tensor& proto,
                                  const Tensor& prior_semantic, const Tensor& prior_abnormal,
                                  const HeadParams& params, const HeadConfig& cfg);

Tensor fuse(const Tensor& Fq_aug, const Tensor& Fs_aug, const Tensor& m_hat, float tau,
            FuseAxis axis = FuseAxis::QueryAxis, float l2_eps = 1e-12f);

Tensor meta_predict(const Tensor& fused, const Tensor& Fs_aug, const Tensor& m_hat,
                    double raw_mask_sum, const Tensor& prior_abnormal);

// ---- templated forward (tape and binary64 instantiations) ----

// Flat {n} or {n,1} mask weights concatenated into one {total} tensor.
Tensor concat_mask_weights(const std::vector<Tensor>& parts);

namespace detail {

template <class B, typename V = typename B::Val>
V linear(B& b, V x, V w, V bias) {
  V y = b.matmul(x, w);
  return b.add(y, b.broadcast_row(bias, b.rows(y)));
}

// One residual multi-head self-attention block, shared between the query
// and support branches. No positional encoding, no normalization layers.
template <class B, typename V = typename B::Val>
V attention_block(B& b, V x, const HeadParamVars<V>& p, int heads) {
  const int c1 = b.cols(x);
  const int d = c1 / heads;
  V q = linear(b, x, p.attn_q_w, p.attn_q_b);
  V k = linear(b, x, p.attn_k_w, p.attn_k_b);
  V v = linear(b, x, p.attn_v_w, p.attn_v_b);
  std::vector<V> outs;
  outs.reserve(static_cast<size_t>(heads));
  const double scale_t = std::sqrt(static_cast<double>(d));
  for (int h = 0; h < heads; ++h) {
    V qh = b.slice_cols(q, h * d, (h + 1) * d);
    V kh = b.slice_cols(k, h * d, (h + 1) * d);
    V vh = b.slice_cols(v, h * d, (h + 1) * d);
    V att = b.softmax_axis(b.matmul_nt(qh, kh), 1, scale_t);
    outs.push_back(b.matmul(att, vh));
  }
  V merged = b.concat_cols(outs);
  return b.add(x, linear(b, merged, p.attn_o_w, p.attn_o_b));
}

template <class B, typename V = typename B::Val>
V augment_query(B& b, V Fq, V proto_row, V prior_s_col, V prior_a_col,
                const HeadParamVars<V>& p, const HeadConfig& cfg) {
  const int n = b.rows(Fq);
  V x = b.concat_cols({Fq, b.broadcast_row(proto_row, n), prior_s_col, prior_a_col});
  return attention_block(b, linear(b, x, p.conv_q_w, p.conv_q_b), p, cfg.heads);
}

template <class B, typename V = typename B::Val>
V augment_support(B& b, V Fs, V proto_row, const HeadParamVars<V>& p, const HeadConfig& cfg) {
  const int n = b.rows(Fs);
  V x = b.concat_cols({Fs, b.broadcast_row(proto_row, n)});
  return attention_block(b, linear(b, x, p.conv_s_w, p.conv_s_b), p, cfg.heads);
}

// Non-learnable fusion. Under QueryAxis the attended support term is the
// mean over the K support tiles, so duplicated supports leave the output
// unchanged; under SupportAxis the row softmax renormalizes by itself.
template <class B, typename V = typename B::Val>
V fuse_multi(B& b, V Fq_aug, V Fs_aug_all, const Tensor& m_hat_all, int k_supports, float tau,
             FuseAxis axis, float l2_eps) {
  V qn = b.l2_normalize_rows(Fq_aug, l2_eps);
  V sn = b.l2_normalize_rows(Fs_aug_all, l2_eps);
  V sim = b.matmul_nt(qn, sn);
  V att = b.softmax_axis(sim, axis == FuseAxis::QueryAxis ? 0 : 1, tau);
  V masked = b.scale_rows(Fs_aug_all, m_hat_all);
  V term = b.matmul(att, masked);
  if (axis == FuseAxis::QueryAxis && k_supports > 1)
    term = b.scale(term, 1.0 / k_supports);
  return b.add(term, Fq_aug);
}

template <class B, typename V = typename B::Val>
V pool_rows(B& b, V features, const Tensor& weights) {
  double total = 0.0;
  for (long long i = 0; i < weights.size(); ++i) total += weights[i];
  if (!(total > 0.0)) throw ContractError("pool_rows: mask weights sum to zero");
  Tensor row = weights.reshaped({1, static_cast<int>(weights.size())});
  V pooled = b.matmul(b.constant(row), features);
  return b.scale(pooled, 1.0 / total);
}

template <typename V>
struct ForwardParts {
  V probs;        // {HW, 1}
  V fused;        // HW x C1
  V proto_fused;  // {1, C1}
};

// Complete trainable forward for the FSS branch (the FAD branch is a
// constant and never enters the tape).
template <class B, typename V = typename B::Val>
ForwardParts<V> forward_fss(B& b, const EpisodeFeatures& ef, const HeadParamVars<V>& p,
                            const HeadConfig& cfg) {
  const int hw = ef.query.dim(0);
  V proto_row = b.constant(ef.proto);
  V prior_s = b.constant(ef.prior_semantic.reshaped({hw, 1}));
  V prior_a = b.constant(ef.prior_abnormal.reshaped({hw, 1}));
  V fq = augment_query(b, b.constant(ef.query), proto_row, prior_s, prior_a, p, cfg);

  std::vector<V> fs_parts;
  fs_parts.reserve(ef.support.size());
  for (const Tensor& fs : ef.support)
    fs_parts.push_back(augment_support(b, b.constant(fs), proto_row, p, cfg));
  V fs_all = fs_parts.size() == 1 ? fs_parts[0] : b.concat_rows(fs_parts);
  Tensor m_hat_all = concat_mask_weights(ef.support_m_hat);

  V fused = fuse_multi(b, fq, fs_all, m_hat_all, static_cast<int>(ef.support.size()), cfg.tau,
                       cfg.fuse_axis, cfg.l2_eps);
  V proto_fused = pool_rows(b, fs_all, m_hat_all);
  V logits = b.matmul_nt(fused, proto_fused);
  return {b.sigmoid(logits), fused, proto_fused};
}

}  // namespace detail

// Binds concrete parameters as tape leaves (requires_grad = trainable).
HeadParamVars<Var> bind_params(Graph& g, const HeadParams& p, bool trainable);

// Binds binary64 copies laid out in HeadParams::named() order.
HeadParamVars<TensorD> bind_params_f64(const std::vector<TensorD>& flat);

}  // namespace sofs
