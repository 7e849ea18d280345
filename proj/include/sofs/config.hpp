#pragma once

#include <cstdint>
#include <string>

#include "sofs/encoder.hpp"
#include "sofs/episodes.hpp"
#include "sofs/head.hpp"
#include "sofs/losses.hpp"
#include "sofs/synth.hpp"

namespace sofs {

// Every knob of the pipeline. Paper-stated hyperparameters keep their
// published defaults; the remaining sizes default to a desk-scale setup
// that trains in minutes on one CPU core.
struct RunConfig {
  std::string dataset_root = "data";
  std::string out_dir = "runs/default";

  // episodes
  int test_fold = 2;
  int n_folds = 3;
  int shots = 1;
  int crops_per_shot = 1;  // set 4 for the one-annotation multi-crop protocol
  int input_size = 128;
  int test_input_size = 128;
  float alpha = 0.3f;
  bool augment_train = true;

  // model
  int l = 8;
  int embed = 64;  // C1
  int heads = 4;
  float tau = 0.1f;
  std::string downsample = "prototype";  // prototype | bilinear
  std::string fuse_axis = "query";       // query | support

  // loss
  std::string loss = "mndl";  // mndl | dice
  float eta = 1e5f;
  float beta = 1.0f;
  float gamma = 0.01f;
  float dice_eps = 1.0f;

  // optimization
  float lr = 1e-5f;
  float weight_decay = 0.01f;
  float poly_power = 0.9f;
  int epochs = 20;
  int episodes_per_epoch = 200;
  int batch_size = 4;

  // evaluation
  std::string mode = "fss";  // fss | fad
  int eval_runs = 5;
  int eval_episodes_per_class = 20;
  int eval_normal_episodes = 30;

  // synthetic dataset generation
  int gen_image_size = 256;
  int gen_images_per_class = 12;
  double gen_area_min = 0.0005;
  double gen_area_max = 0.01;

  uint64_t seed = 0;

  void validate() const;

  // flat key=value snapshot (sorted keys); the checkpoint embeds this text
  std::string to_kv() const;
  static RunConfig from_kv(const std::string& text);

  EncoderConfig encoder_config() const;
  HeadConfig head_config() const;
  LossConfig loss_config() const;
  SamplerConfig sampler_config(bool training) const;
  SynthConfig synth_config() const;
};

}  // namespace sofs
