#pragma once

#include <functional>
#include <vector>

#include "sofs/encoder.hpp"
#include "sofs/head.hpp"
#include "sofs/netpbm.hpp"

namespace sofs {

struct TilePlan {
  int window = 0, stride = 0;
  int image_h = 0, image_w = 0;    // original size
  int padded_h = 0, padded_w = 0;  // after reflect padding up to the window
  std::vector<std::pair<int, int>> offsets;  // (oy, ox) in padded coordinates
};

// Offsets at multiples of the stride; final row/column clamped inward so no
// tile leaves the image. Images smaller than the window are reflect-padded.
TilePlan plan_tiles(int image_h, int image_w, int window, int stride);

struct PredictionMap {
  int h = 0, w = 0;
  std::vector<float> prob;      // [0,1]
  std::vector<int> tile_counts;  // tiles contributing to each pixel

  float at(int y, int x) const { return prob[static_cast<size_t>(y) * w + x]; }
};

// Runs `tile_forward` on every planned tile and averages overlaps. Tiles are
// accumulated in offset-sorted order, so the result is independent of the
// order the tiles were produced in.
using TileForward = std::function<Tensor(const ImageU8& tile)>;  // window x window probs
PredictionMap predict_image(const ImageU8& query, const TilePlan& plan,
                            const TileForward& tile_forward);

MaskU8 binarize(const PredictionMap& map, float threshold = 0.5f);

// Image-level anomaly score: the maximum of the prediction map.
float fad_image_score(const PredictionMap& map);

// Per-tile model forward: encodes the tile, builds episode features against
// the preprocessed supports, runs the head, and resizes the head map back
// to window resolution (bilinear).
struct ModelContext {
  const ToyCnnEncoder* encoder = nullptr;
  const HeadParams* params = nullptr;
  HeadConfig head_cfg;
  std::vector<Tensor> support_features;  // per support crop, H x W x C
  std::vector<Tensor> support_masks;     // raw crop masks, H̄ x W̄ in {0,1}
  bool fad = false;                      // all support masks empty
};

ModelContext make_model_context(const ToyCnnEncoder& encoder, const HeadParams& params,
                                const HeadConfig& head_cfg,
                                const std::vector<ImageU8>& support_images,
                                const std::vector<MaskU8>& support_masks);

TileForward make_tile_forward(const ModelContext& ctx);

}  // namespace sofs
