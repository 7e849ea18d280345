#include "sofs/inference.hpp"

#include <algorithm>
#include <cmath>

#include "sofs/episodes.hpp"
#include "sofs/tensor_ops.hpp"

namespace sofs {

namespace {

std::vector<int> axis_offsets(int dim, int window, int stride) {
  std::vector<int> out;
  int o = 0;
  while (true) {
    out.push_back(std::min(o, dim - window));
    if (o + window >= dim) break;
    o += stride;
  }
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

}  // namespace

TilePlan plan_tiles(int image_h, int image_w, int window, int stride) {
  if (window <= 0 || stride <= 0 || stride > window)
    throw ParameterError("plan_tiles: need 0 < stride <= window");
  TilePlan plan;
  plan.window = window;
  plan.stride = stride;
  plan.image_h = image_h;
  plan.image_w = image_w;
  plan.padded_h = std::max(image_h, window);
  plan.padded_w = std::max(image_w, window);
  for (int oy : axis_offsets(plan.padded_h, window, stride))
    for (int ox : axis_offsets(plan.padded_w, window, stride)) plan.offsets.emplace_back(oy, ox);
  return plan;
}

PredictionMap predict_image(const ImageU8& query, const TilePlan& plan,
                            const TileForward& tile_forward) {
  if (query.h != plan.image_h || query.w != plan.image_w)
    throw DimensionError("predict_image: plan does not match image size");
  const ImageU8 padded = pad_reflect(query, plan.window);

  struct TileResult {
    int oy, ox;
    Tensor map;
  };
  std::vector<TileResult> results;
  results.reserve(plan.offsets.size());
  for (const auto& [oy, ox] : plan.offsets) {
    ImageU8 tile(plan.window, plan.window, padded.c);
    for (int y = 0; y < plan.window; ++y)
      for (int x = 0; x < plan.window; ++x)
        for (int c = 0; c < padded.c; ++c) tile.at(y, x, c) = padded.at(oy + y, ox + x, c);
    Tensor map;
    try {
      map = tile_forward(tile);
    } catch (const std::exception& e) {
      throw ContractError("tile at (" + std::to_string(oy) + "," + std::to_string(ox) +
                          "): " + e.what());
    }
    if (map.ndim() != 2 || map.dim(0) != plan.window || map.dim(1) != plan.window)
      throw DimensionError("tile forward returned " + shape_str(map.shape()) + ", expected " +
                           std::to_string(plan.window) + "x" + std::to_string(plan.window));
    results.push_back({oy, ox, std::move(map)});
  }

  // deterministic reduction: accumulate in offset order regardless of how
  // the plan ordered the tiles
  std::sort(results.begin(), results.end(), [](const TileResult& a, const TileResult& b) {
    return a.oy != b.oy ? a.oy < b.oy : a.ox < b.ox;
  });

  PredictionMap out;
  out.h = plan.image_h;
  out.w = plan.image_w;
  out.prob.assign(static_cast<size_t>(out.h) * out.w, 0.0f);
  out.tile_counts.assign(out.prob.size(), 0);
  for (const TileResult& r : results) {
    for (int y = 0; y < plan.window; ++y) {
      const int py = r.oy + y;
      if (py >= out.h) continue;
      for (int x = 0; x < plan.window; ++x) {
        const int px = r.ox + x;
        if (px >= out.w) continue;
        out.prob[static_cast<size_t>(py) * out.w + px] += r.map.at(y, x);
        out.tile_counts[static_cast<size_t>(py) * out.w + px] += 1;
      }
    }
  }
  for (size_t i = 0; i < out.prob.size(); ++i) {
    if (out.tile_counts[i] == 0)
      throw ContractError("predict_image: coverage hole at pixel " + std::to_string(i));
    out.prob[i] /= static_cast<float>(out.tile_counts[i]);
  }
  return out;
}

MaskU8 binarize(const PredictionMap& map, float threshold) {
  MaskU8 out(map.h, map.w);
  for (size_t i = 0; i < map.prob.size(); ++i) out.data[i] = map.prob[i] >= threshold ? 1 : 0;
  return out;
}

float fad_image_score(const PredictionMap& map) {
  float best = 0.0f;
  for (float v : map.prob) best = std::max(best, v);
  return best;
}

ModelContext make_model_context(const ToyCnnEncoder& encoder, const HeadParams& params,
                                const HeadConfig& head_cfg,
                                const std::vector<ImageU8>& support_images,
                                const std::vector<MaskU8>& support_masks) {
  if (support_images.empty() || support_images.size() != support_masks.size())
    throw ContractError("make_model_context: need matching support images and masks");
  ModelContext ctx;
  ctx.encoder = &encoder;
  ctx.params = &params;
  ctx.head_cfg = head_cfg;
  long long defect = 0;
  for (size_t i = 0; i < support_images.size(); ++i) {
    ctx.support_features.push_back(encoder.encode(image_to_float(support_images[i])).aligned);
    ctx.support_masks.push_back(mask_to_float(support_masks[i]));
    defect += support_masks[i].sum();
  }
  ctx.fad = defect == 0;
  return ctx;
}

TileForward make_tile_forward(const ModelContext& ctx) {
  return [&ctx](const ImageU8& tile) -> Tensor {
    const Tensor query_features = ctx.encoder->encode(image_to_float(tile)).aligned;
    EpisodeFeatures ef = build_episode_features(query_features, ctx.support_features,
                                                ctx.support_masks, ctx.encoder->l(),
                                                ctx.head_cfg);
    EpisodeOutput out = forward_episode(ef, *ctx.params, ctx.head_cfg);
    Tensor map3 = out.prediction.reshaped({ef.h, ef.w, 1});
    Tensor up = ops::resize_bilinear(map3, tile.h, tile.w);
    return up.reshaped({tile.h, tile.w});
  };
}

}  // namespace sofs
