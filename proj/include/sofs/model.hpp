#pragma once

#include "sofs/checkpoint.hpp"
#include "sofs/config.hpp"
#include "sofs/encoder.hpp"
#include "sofs/head.hpp"
#include "sofs/losses.hpp"

namespace sofs {

struct Model {
  ToyCnnEncoder encoder;
  HeadParams params;
  HeadConfig head_cfg;
};

Model model_from_config(const RunConfig& cfg);
Model model_from_checkpoint(const Checkpoint& ckpt);
Checkpoint make_checkpoint(const RunConfig& cfg, const Model& model, uint64_t step);

namespace detail {

template <typename V>
struct EpisodeLossParts {
  V loss;
  V probs;       // at loss resolution
  Tensor target; // binary, matching probs
};

// Head forward plus the training objective. With `loss_at_input_res` the
// head map is bilinearly upsampled by l and scored against the raw crop
// mask; otherwise the mask must already live on the feature grid.
template <class B, typename V = typename B::Val>
EpisodeLossParts<V> episode_loss(B& b, const EpisodeFeatures& ef, const HeadParamVars<V>& p,
                                 const HeadConfig& hc, const LossConfig& lc,
                                 const Tensor& query_mask, bool loss_at_input_res, int l,
                                 bool plain_dice) {
  auto parts = forward_fss(b, ef, p, hc);
  V x = b.reshape(parts.probs, {ef.h, ef.w, 1});
  Tensor y;
  if (loss_at_input_res) {
    x = b.upsample_bilinear(x, ef.h * l, ef.w * l);
    y = query_mask.reshaped({ef.h * l, ef.w * l, 1});
  } else {
    y = query_mask.reshaped({ef.h, ef.w, 1});
  }
  V loss = plain_dice ? plain_dice_t(b, x, y, lc) : total_loss_t(b, x, y, lc);
  return {loss, x, y};
}

}  // namespace detail

}  // namespace sofs
