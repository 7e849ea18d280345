#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sofs/tensor.hpp"

namespace sofs {

// Frozen feature provider. The toy CNN stands in for a pretrained backbone:
// three conv(3x3, zero pad) -> ReLU -> 2x average-pool blocks with a seeded
// Glorot-uniform init, never updated by training.
struct EncoderConfig {
  enum class Kind { ToyCnn, Precomputed };
  Kind kind = Kind::ToyCnn;
  uint64_t seed = 0;
  std::vector<int> channels = {16, 32, 64};
  std::vector<int> emit_blocks = {2, 3};  // 1-based; aligned to the last block's grid
  int l = 8;                              // downsampling factor of the aligned grid

  int concat_channels() const {
    int c = 0;
    for (int blk : emit_blocks) c += channels[static_cast<size_t>(blk - 1)];
    return c;
  }
};

struct FeatureStack {
  std::vector<Tensor> layers;       // each H_i x W_i x C_i
  std::vector<std::string> names;
  int l = 8;
  Tensor aligned;                   // H x W x C with H = H̄/l, W = W̄/l
};

// Every emitted layer resampled (nearest neighbor) to the target grid and
// concatenated along channels.
Tensor align_and_concat(const std::vector<Tensor>& layers, int target_h, int target_w);

class ToyCnnEncoder {
 public:
  explicit ToyCnnEncoder(const EncoderConfig& cfg);

  // Image is H̄ x W̄ x 3 with both spatial dims divisible by cfg.l.
  FeatureStack encode(const Tensor& image) const;

  const EncoderConfig& config() const { return cfg_; }
  int channels() const { return cfg_.concat_channels(); }
  int l() const { return cfg_.l; }

  // Frozen weights, in checkpoint order (w1, b1, w2, b2, ...).
  std::vector<std::pair<std::string, const Tensor*>> named() const;
  std::vector<std::pair<std::string, Tensor*>> named();

 private:
  EncoderConfig cfg_;
  std::vector<Tensor> conv_w_;  // per block, 3 x 3 x Cin x Cout
  std::vector<Tensor> conv_b_;
};

// Precomputed feature files: concatenated TNSR blobs plus a JSON sidecar
// (`<path>.json`) listing layer names, shapes, the image size and l.
void save_precomputed(const std::string& path, const FeatureStack& stack, int image_h,
                      int image_w);
FeatureStack load_precomputed(const std::string& path);

}  // namespace sofs
