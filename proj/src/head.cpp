#include "sofs/head.hpp"

#include <cmath>

#include "sofs/rng.hpp"
#include "sofs/tensor_ops.hpp"

namespace sofs {

namespace {

Tensor xavier_uniform(int rows, int cols, Philox rng) {
  const float a = std::sqrt(6.0f / static_cast<float>(rows + cols));
  Tensor t({rows, cols});
  for (long long i = 0; i < t.size(); ++i) t[i] = rng.uniform(-a, a);
  return t;
}

// Accepts H x W x C or HW x C and returns an HW x C view copy.
Tensor as_rows(const Tensor& f) {
  if (f.ndim() == 3) return f.reshaped({f.dim(0) * f.dim(1), f.dim(2)});
  if (f.ndim() == 2) return f;
  throw DimensionError("expected H x W x C or HW x C features, got " + shape_str(f.shape()));
}

Tensor as_flat(const Tensor& m) {
  return m.reshaped({static_cast<int>(m.size())});
}

}  // namespace

HeadParams HeadParams::init(const HeadConfig& cfg, uint64_t seed) {
  const int c = cfg.channels, c1 = cfg.embed;
  HeadParams p;
  Philox root(seed, 0x48454150ull);  // head parameter stream
  int slot = 0;
  auto next = [&] { return root.split(static_cast<uint64_t>(slot++)); };
  p.conv_q_w = xavier_uniform(2 * c + 2, c1, next());
  p.conv_q_b = Tensor({1, c1});
  p.conv_s_w = xavier_uniform(2 * c, c1, next());
  p.conv_s_b = Tensor({1, c1});
  p.attn_q_w = xavier_uniform(c1, c1, next());
  p.attn_q_b = Tensor({1, c1});
  p.attn_k_w = xavier_uniform(c1, c1, next());
  p.attn_k_b = Tensor({1, c1});
  p.attn_v_w = xavier_uniform(c1, c1, next());
  p.attn_v_b = Tensor({1, c1});
  p.attn_o_w = xavier_uniform(c1, c1, next());
  p.attn_o_b = Tensor({1, c1});
  return p;
}

std::vector<std::pair<std::string, Tensor*>> HeadParams::named() {
  return {{"head.conv_q.w", &conv_q_w}, {"head.conv_q.b", &conv_q_b},
          {"head.conv_s.w", &conv_s_w}, {"head.conv_s.b", &conv_s_b},
          {"head.attn.q.w", &attn_q_w}, {"head.attn.q.b", &attn_q_b},
          {"head.attn.k.w", &attn_k_w}, {"head.attn.k.b", &attn_k_b},
          {"head.attn.v.w", &attn_v_w}, {"head.attn.v.b", &attn_v_b},
          {"head.attn.o.w", &attn_o_w}, {"head.attn.o.b", &attn_o_b}};
}

std::vector<std::pair<std::string, const Tensor*>> HeadParams::named() const {
  auto mutable_named = const_cast<HeadParams*>(this)->named();
  std::vector<std::pair<std::string, const Tensor*>> out;
  out.reserve(mutable_named.size());
  for (auto& [n, t] : mutable_named) out.emplace_back(n, t);
  return out;
}

HeadParamVars<Var> bind_params(Graph& g, const HeadParams& p, bool trainable) {
  auto named = p.named();
  std::vector<Var> vars;
  vars.reserve(named.size());
  for (auto& [name, t] : named) vars.push_back(g.leaf(*t, trainable, name));
  return {vars[0], vars[1], vars[2],  vars[3], vars[4],  vars[5],
          vars[6], vars[7], vars[8],  vars[9], vars[10], vars[11]};
}

HeadParamVars<TensorD> bind_params_f64(const std::vector<TensorD>& flat) {
  if (flat.size() != 12) throw ParameterError("bind_params_f64: expected 12 tensors");
  return {flat[0], flat[1], flat[2], flat[3], flat[4],  flat[5],
          flat[6], flat[7], flat[8], flat[9], flat[10], flat[11]};
}

// ---- mask downsampling ----

Tensor downsample_mask(const Tensor& mask, int l) {
  if (mask.ndim() != 2)
    throw DimensionError("downsample_mask: expected H x W, got " + shape_str(mask.shape()));
  if (l <= 0) throw ParameterError("downsample_mask: l must be positive");
  const int H = mask.dim(0), W = mask.dim(1);
  if (H % l || W % l)
    throw DimensionError("downsample_mask: " + shape_str(mask.shape()) +
                         " not divisible by l=" + std::to_string(l));
  const int h = H / l, w = W / l;
  Tensor out({h, w});
  const double inv = 1.0 / (static_cast<double>(l) * l);
  for (int by = 0; by < h; ++by)
    for (int bx = 0; bx < w; ++bx) {
      double s = 0.0;
      for (int y = by * l; y < (by + 1) * l; ++y)
        for (int x = bx * l; x < (bx + 1) * l; ++x) s += mask.at(y, x);
      out.at(by, bx) = static_cast<float>(s * inv);
    }
  return out;
}

Tensor bilinear_downsample_mask(const Tensor& mask, int l) {
  if (mask.ndim() != 2)
    throw DimensionError("bilinear_downsample_mask: expected H x W, got " +
                         shape_str(mask.shape()));
  const int H = mask.dim(0), W = mask.dim(1);
  if (H % l || W % l)
    throw DimensionError("bilinear_downsample_mask: " + shape_str(mask.shape()) +
                         " not divisible by l=" + std::to_string(l));
  Tensor hwc = mask.reshaped({H, W, 1});
  return ops::resize_bilinear(hwc, H / l, W / l).reshaped({H / l, W / l});
}

// ---- priors ----

Tensor masked_avg_pool(const Tensor& features, const Tensor& mask_weights) {
  Tensor f = as_rows(features);
  Tensor m = as_flat(mask_weights);
  if (m.size() != f.dim(0))
    throw DimensionError("masked_avg_pool: " + shape_str(features.shape()) + " vs " +
                         shape_str(mask_weights.shape()));
  double total = 0.0;
  for (long long i = 0; i < m.size(); ++i) total += m[i];
  if (!(total > 0.0)) throw ContractError("masked_avg_pool: mask weights sum to zero");
  const int c = f.dim(1);
  Tensor out({c});
  for (int j = 0; j < c; ++j) {
    double s = 0.0;
    for (int i = 0; i < f.dim(0); ++i) s += static_cast<double>(f.at(i, j)) * m[i];
    out[j] = static_cast<float>(s / total);
  }
  return out;
}

namespace {

// max over support locations of cos(Fq_j, Fs_k) * w_k, as a flat {HWq} map.
Tensor weighted_max_similarity(const Tensor& Fq, const Tensor& Fs, const Tensor& weights,
                               float l2_eps) {
  Tensor fq = as_rows(Fq), fs = as_rows(Fs);
  if (fq.dim(1) != fs.dim(1))
    throw DimensionError("prior map: channel mismatch " + shape_str(Fq.shape()) + " vs " +
                         shape_str(Fs.shape()));
  Tensor w = as_flat(weights);
  if (w.size() != fs.dim(0))
    throw DimensionError("prior map: weights " + shape_str(weights.shape()) +
                         " do not match support " + shape_str(Fs.shape()));
  Tensor sim = ops::matmul_nt(ops::l2_normalize_rows(fq, l2_eps),
                              ops::l2_normalize_rows(fs, l2_eps));
  Tensor weighted = ops::scale_cols(sim, w);
  return ops::rowmax(weighted).reshaped({fq.dim(0)});
}

}  // namespace

Tensor semantic_prior_map(const Tensor& Fq, const Tensor& Fs, const Tensor& m_hat,
                          float l2_eps) {
  return weighted_max_similarity(Fq, Fs, m_hat, l2_eps);
}

Tensor abnormal_prior_map(const Tensor& Fq, const Tensor& Fs, const Tensor& m_hat,
                          float l2_eps) {
  Tensor w = as_flat(m_hat);
  Tensor complement(w.shape());
  for (long long i = 0; i < w.size(); ++i) complement[i] = 1.0f - w[i];
  Tensor mx = weighted_max_similarity(Fq, Fs, complement, l2_eps);
  for (long long i = 0; i < mx.size(); ++i) mx[i] = 1.0f - mx[i];
  return mx;
}

Tensor concat_mask_weights(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ContractError("concat_mask_weights: empty");
  long long total = 0;
  for (const auto& p : parts) total += p.size();
  Tensor out({static_cast<int>(total)});
  long long at = 0;
  for (const auto& p : parts) {
    std::copy(p.data(), p.data() + p.size(), out.data() + at);
    at += p.size();
  }
  return out;
}

// ---- episode assembly ----

EpisodeFeatures build_episode_features(const Tensor& query_hwc,
                                       const std::vector<Tensor>& support_hwc,
                                       const std::vector<Tensor>& raw_support_masks, int l,
                                       const HeadConfig& cfg) {
  if (support_hwc.empty() || support_hwc.size() != raw_support_masks.size())
    throw ContractError("build_episode_features: need K >= 1 supports with masks");
  if (query_hwc.ndim() != 3)
    throw DimensionError("build_episode_features: query must be H x W x C, got " +
                         shape_str(query_hwc.shape()));

  EpisodeFeatures ef;
  ef.h = query_hwc.dim(0);
  ef.w = query_hwc.dim(1);
  ef.query = as_rows(query_hwc);

  double raw_sum = 0.0;
  for (size_t i = 0; i < support_hwc.size(); ++i) {
    ef.support.push_back(as_rows(support_hwc[i]));
    Tensor m_hat = cfg.mask_downsample == MaskDownsample::PrototypeIntensity
                       ? downsample_mask(raw_support_masks[i], l)
                       : bilinear_downsample_mask(raw_support_masks[i], l);
    if (m_hat.size() != ef.support.back().dim(0))
      throw DimensionError("build_episode_features: support mask grid does not match features");
    ef.support_m_hat.push_back(as_flat(m_hat));
    for (long long j = 0; j < raw_support_masks[i].size(); ++j)
      raw_sum += raw_support_masks[i][j];
  }
  ef.raw_mask_sum = raw_sum;

  // Prototype: mean of per-support defect pools; normal-region pools when
  // the episode has no defect pixels at all (the conditioning vector for
  // anomaly-mode queries).
  const int c = ef.query.dim(1);
  Tensor proto_sum({c});
  int proto_n = 0;
  for (size_t i = 0; i < ef.support.size(); ++i) {
    double mh_sum = 0.0;
    for (long long j = 0; j < ef.support_m_hat[i].size(); ++j) mh_sum += ef.support_m_hat[i][j];
    Tensor weights = ef.support_m_hat[i];
    if (raw_sum > 0.0 && mh_sum > 0.0) {
      // defect pool
    } else {
      for (long long j = 0; j < weights.size(); ++j) weights[j] = 1.0f - weights[j];
      double comp_sum = 0.0;
      for (long long j = 0; j < weights.size(); ++j) comp_sum += weights[j];
      if (!(comp_sum > 0.0)) continue;
    }
    Tensor p = masked_avg_pool(ef.support[i], weights);
    for (int j = 0; j < c; ++j) proto_sum[j] += p[j];
    ++proto_n;
  }
  if (proto_n == 0) throw ContractError("build_episode_features: no usable support prototype");
  for (int j = 0; j < c; ++j) proto_sum[j] /= static_cast<float>(proto_n);
  ef.proto = proto_sum.reshaped({1, c});

  // Prior maps: per-support maps averaged over K.
  const int hw = ef.query.dim(0);
  Tensor ps({hw}), pa({hw});
  for (size_t i = 0; i < ef.support.size(); ++i) {
    Tensor s = semantic_prior_map(ef.query, ef.support[i], ef.support_m_hat[i], cfg.l2_eps);
    Tensor a = abnormal_prior_map(ef.query, ef.support[i], ef.support_m_hat[i], cfg.l2_eps);
    for (int j = 0; j < hw; ++j) {
      ps[j] += s[j];
      pa[j] += a[j];
    }
  }
  const float inv_k = 1.0f / static_cast<float>(ef.support.size());
  for (int j = 0; j < hw; ++j) {
    ps[j] *= inv_k;
    pa[j] *= inv_k;
  }
  ef.prior_semantic = std::move(ps);
  ef.prior_abnormal = std::move(pa);
  return ef;
}

// ---- 1-shot spec surface ----

namespace {

HeadParamVars<Tensor> bind_params_f32(const HeadParams& p) {
  return {p.conv_q_w, p.conv_q_b, p.conv_s_w, p.conv_s_b, p.attn_q_w, p.attn_q_b,
          p.attn_k_w, p.attn_k_b, p.attn_v_w, p.attn_v_b, p.attn_o_w, p.attn_o_b};
}

}  // namespace

std::pair<Tensor, Tensor> augment(const Tensor& Fq, const Tensor& Fs, const Tensor& proto,
                                  const Tensor& prior_semantic, const Tensor& prior_abnormal,
                                  const HeadParams& params, const HeadConfig& cfg) {
  EagerBackend<float> b;
  auto p = bind_params_f32(params);
  Tensor fq = as_rows(Fq), fs = as_rows(Fs);
  Tensor proto_row = proto.reshaped({1, static_cast<int>(proto.size())});
  Tensor ps = as_flat(prior_semantic).reshaped({fq.dim(0), 1});
  Tensor pa = as_flat(prior_abnormal).reshaped({fq.dim(0), 1});
  Tensor q_aug = detail::augment_query(b, fq, proto_row, ps, pa, p, cfg);
  Tensor s_aug = detail::augment_support(b, fs, proto_row, p, cfg);
  return {std::move(q_aug), std::move(s_aug)};
}

Tensor fuse(const Tensor& Fq_aug, const Tensor& Fs_aug, const Tensor& m_hat, float tau,
            FuseAxis axis, float l2_eps) {
  if (!(tau > 0.0f)) throw ParameterError("fuse: tau must be positive");
  EagerBackend<float> b;
  return detail::fuse_multi(b, as_rows(Fq_aug), as_rows(Fs_aug), as_flat(m_hat), 1, tau, axis,
                            l2_eps);
}

Tensor meta_predict(const Tensor& fused, const Tensor& Fs_aug, const Tensor& m_hat,
                    double raw_mask_sum, const Tensor& prior_abnormal) {
  if (raw_mask_sum > 0.0) {
    EagerBackend<float> b;
    Tensor proto = detail::pool_rows(b, as_rows(Fs_aug), as_flat(m_hat));
    Tensor probs = ops::sigmoid(ops::matmul_nt(as_rows(fused), proto));
    return probs.reshaped({probs.dim(0)});
  }
  // anomaly branch: the clamped abnormal prior map, bit for bit
  Tensor out = as_flat(prior_abnormal);
  for (long long i = 0; i < out.size(); ++i)
    out[i] = std::min(std::max(out[i], 0.0f), 1.0f);
  return out;
}

EpisodeOutput forward_episode(const EpisodeFeatures& ef, const HeadParams& params,
                              const HeadConfig& cfg) {
  EagerBackend<float> b;
  auto p = bind_params_f32(params);
  EpisodeOutput out;
  out.fad = !(ef.raw_mask_sum > 0.0);

  if (!out.fad) {
    auto parts = detail::forward_fss(b, ef, p, cfg);
    out.prediction = parts.probs.reshaped({ef.h, ef.w});
    out.fused = std::move(parts.fused);
    out.proto_fused = std::move(parts.proto_fused);
    return out;
  }

  // Anomaly mode: the prediction is the clamped mean abnormal prior map.
  // Fusion still runs (its masked support term vanishes); the fused
  // prototype pools over normal regions since no defect weights exist.
  Tensor proto_row = ef.proto;
  Tensor prior_s = ef.prior_semantic.reshaped({ef.query.dim(0), 1});
  Tensor prior_a = ef.prior_abnormal.reshaped({ef.query.dim(0), 1});
  Tensor fq = detail::augment_query(b, ef.query, proto_row, prior_s, prior_a, p, cfg);
  std::vector<Tensor> fs_parts;
  for (const Tensor& fs : ef.support)
    fs_parts.push_back(detail::augment_support(b, fs, proto_row, p, cfg));
  std::vector<const Tensor*> fs_ptrs;
  for (auto& t : fs_parts) fs_ptrs.push_back(&t);
  Tensor fs_all = fs_parts.size() == 1 ? fs_parts[0] : ops::concat_rows(fs_ptrs);
  Tensor m_hat_all = concat_mask_weights(ef.support_m_hat);
  out.fused = detail::fuse_multi(b, fq, fs_all, m_hat_all,
                                 static_cast<int>(ef.support.size()), cfg.tau, cfg.fuse_axis,
                                 cfg.l2_eps);
  Tensor complement(m_hat_all.shape());
  for (long long i = 0; i < complement.size(); ++i) complement[i] = 1.0f - m_hat_all[i];
  out.proto_fused = masked_avg_pool(fs_all, complement).reshaped({1, cfg.embed});
  Tensor pred = ef.prior_abnormal;
  for (long long i = 0; i < pred.size(); ++i)
    pred[i] = std::min(std::max(pred[i], 0.0f), 1.0f);
  out.prediction = pred.reshaped({ef.h, ef.w});
  return out;
}

}  // namespace sofs
