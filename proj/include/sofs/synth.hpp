#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sofs/episodes.hpp"

namespace sofs {

// Procedural defect dataset: value-noise backgrounds per object family with
// one rendered defect instance per image. Deterministic per seed, byte for
// byte.
struct SynthConfig {
  int image_size = 256;
  int images_per_class = 12;
  double area_min = 0.0005;  // defect area as a fraction of the image
  double area_max = 0.01;
  uint64_t seed = 0;
  int n_folds = 3;

  std::vector<std::string> classes = {"spot", "scratch",       "crack",
                                      "missing_patch", "stain", "pit",
                                      "burr", "discoloration", "chip"};

  void validate() const;
};

// Writes PPM images, PGM masks and manifest.json under out_dir and returns
// the loaded index. Fold assignment is balanced by defect-area medians and
// fixed in the manifest.
DatasetIndex gen_synth_dataset(const SynthConfig& cfg, const std::string& out_dir);

}  // namespace sofs
