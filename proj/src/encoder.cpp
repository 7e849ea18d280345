#include "sofs/encoder.hpp"

#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

#include "sofs/rng.hpp"
#include "sofs/tensor_io.hpp"
#include "sofs/tensor_ops.hpp"

namespace sofs {

Tensor align_and_concat(const std::vector<Tensor>& layers, int target_h, int target_w) {
  if (layers.empty()) throw ParameterError("align_and_concat: no layers");
  std::vector<Tensor> resampled;
  resampled.reserve(layers.size());
  for (const Tensor& layer : layers) {
    ops::require_hwc("align_and_concat", layer.shape());
    const int h = layer.dim(0), w = layer.dim(1);
    const bool ratio_ok = (h % target_h == 0 || target_h % h == 0) &&
                          (w % target_w == 0 || target_w % w == 0);
    if (!ratio_ok)
      throw DimensionError("align_and_concat: layer " + shape_str(layer.shape()) +
                           " incompatible with target " + std::to_string(target_h) + "x" +
                           std::to_string(target_w));
    resampled.push_back(h == target_h && w == target_w
                            ? layer
                            : ops::resample_nearest(layer, target_h, target_w));
  }
  int c_total = 0;
  for (const Tensor& r : resampled) c_total += r.dim(2);
  Tensor out({target_h, target_w, c_total});
  long long cells = static_cast<long long>(target_h) * target_w;
  int c_at = 0;
  for (const Tensor& r : resampled) {
    const int c = r.dim(2);
    for (long long i = 0; i < cells; ++i)
      std::copy(r.data() + i * c, r.data() + (i + 1) * c, out.data() + i * c_total + c_at);
    c_at += c;
  }
  return out;
}

ToyCnnEncoder::ToyCnnEncoder(const EncoderConfig& cfg) : cfg_(cfg) {
  if (cfg_.kind != EncoderConfig::Kind::ToyCnn)
    throw ParameterError("ToyCnnEncoder: config kind is not toy-cnn");
  Philox root(cfg_.seed, 0x454e4331ull);  // encoder weight stream
  int cin = 3;
  for (size_t blk = 0; blk < cfg_.channels.size(); ++blk) {
    const int cout = cfg_.channels[blk];
    const int fan_in = 3 * 3 * cin;
    const int fan_out = 3 * 3 * cout;
    const float a = std::sqrt(6.0f / static_cast<float>(fan_in + fan_out));
    Philox wrng = root.split(2 * blk);
    Tensor w({3, 3, cin, cout});
    for (long long i = 0; i < w.size(); ++i) w[i] = wrng.uniform(-a, a);
    Philox brng = root.split(2 * blk + 1);
    Tensor b({cout});
    for (long long i = 0; i < b.size(); ++i) b[i] = brng.uniform(-0.1f, 0.1f);
    conv_w_.push_back(std::move(w));
    conv_b_.push_back(std::move(b));
    cin = cout;
  }
}

FeatureStack ToyCnnEncoder::encode(const Tensor& image) const {
  ops::require_hwc("encode", image.shape());
  if (image.dim(2) != 3)
    throw DimensionError("encode: expected 3 channels, got " + shape_str(image.shape()));
  if (image.dim(0) % cfg_.l || image.dim(1) % cfg_.l)
    throw DimensionError("encode: input " + shape_str(image.shape()) +
                         " not divisible by l=" + std::to_string(cfg_.l) +
                         " (pad before encoding)");

  FeatureStack stack;
  stack.l = cfg_.l;
  Tensor x = image;
  std::vector<Tensor> block_outputs;
  for (size_t blk = 0; blk < conv_w_.size(); ++blk) {
    x = ops::avg_pool2(ops::relu(ops::conv2d(x, conv_w_[blk], conv_b_[blk], 1, 1)));
    block_outputs.push_back(x);
  }
  for (int blk : cfg_.emit_blocks) {
    stack.layers.push_back(block_outputs[static_cast<size_t>(blk - 1)]);
    stack.names.push_back("block" + std::to_string(blk));
  }
  stack.aligned =
      align_and_concat(stack.layers, image.dim(0) / cfg_.l, image.dim(1) / cfg_.l);
  return stack;
}

std::vector<std::pair<std::string, const Tensor*>> ToyCnnEncoder::named() const {
  std::vector<std::pair<std::string, const Tensor*>> out;
  for (size_t i = 0; i < conv_w_.size(); ++i) {
    out.emplace_back("encoder.conv" + std::to_string(i + 1) + ".w", &conv_w_[i]);
    out.emplace_back("encoder.conv" + std::to_string(i + 1) + ".b", &conv_b_[i]);
  }
  return out;
}

std::vector<std::pair<std::string, Tensor*>> ToyCnnEncoder::named() {
  std::vector<std::pair<std::string, Tensor*>> out;
  for (size_t i = 0; i < conv_w_.size(); ++i) {
    out.emplace_back("encoder.conv" + std::to_string(i + 1) + ".w", &conv_w_[i]);
    out.emplace_back("encoder.conv" + std::to_string(i + 1) + ".b", &conv_b_[i]);
  }
  return out;
}

void save_precomputed(const std::string& path, const FeatureStack& stack, int image_h,
                      int image_w) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path);
  for (const Tensor& layer : stack.layers) write_tensor(out, layer);
  if (!out) throw IoError("write failed: " + path);

  nlohmann::json meta;
  meta["l"] = stack.l;
  meta["image_size"] = {image_h, image_w};
  nlohmann::json layers = nlohmann::json::array();
  for (size_t i = 0; i < stack.layers.size(); ++i) {
    nlohmann::json layer;
    layer["name"] = i < stack.names.size() ? stack.names[i] : ("layer" + std::to_string(i));
    layer["shape"] = stack.layers[i].shape();
    layers.push_back(layer);
  }
  meta["layers"] = layers;
  std::ofstream meta_out(path + ".json");
  if (!meta_out) throw IoError("cannot open for writing: " + path + ".json");
  meta_out << meta.dump(2) << "\n";
}

FeatureStack load_precomputed(const std::string& path) {
  std::ifstream meta_in(path + ".json");
  if (!meta_in) throw IoError("cannot open: " + path + ".json");
  nlohmann::json meta;
  try {
    meta_in >> meta;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("feature sidecar unparseable: " + path + ".json: " + e.what());
  }
  if (!meta.contains("l") || !meta.contains("layers") || !meta.contains("image_size"))
    throw FormatError("feature sidecar missing fields: " + path + ".json");

  FeatureStack stack;
  stack.l = meta["l"].get<int>();
  const int image_h = meta["image_size"][0].get<int>();
  const int image_w = meta["image_size"][1].get<int>();

  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open: " + path);
  for (const auto& layer_meta : meta["layers"]) {
    Tensor t = read_tensor(in);
    const auto declared = layer_meta["shape"].get<std::vector<int>>();
    if (t.shape() != declared)
      throw FormatError("feature layer shape " + shape_str(t.shape()) +
                        " does not match sidecar " + shape_str(declared) + ": " + path);
    stack.layers.push_back(std::move(t));
    stack.names.push_back(layer_meta["name"].get<std::string>());
  }
  stack.aligned = align_and_concat(stack.layers, image_h / stack.l, image_w / stack.l);
  return stack;
}

}  // namespace sofs
