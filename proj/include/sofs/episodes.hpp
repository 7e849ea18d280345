#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "sofs/netpbm.hpp"
#include "sofs/rng.hpp"

namespace sofs {

// One (image, defect-class) pair. Images with several defect classes get
// one record per class.
struct ImageRecord {
  std::string id;
  std::string object;
  int class_id = -1;
  std::string image_path;
  std::string mask_path;
  int h = 0, w = 0;
  double area_fraction = 0.0;
};

struct DatasetIndex {
  std::string root;
  int n_folds = 3;
  std::vector<std::string> objects;
  std::map<std::string, int> object_fold;
  std::map<int, std::string> class_names;
  std::vector<ImageRecord> images;

  static DatasetIndex load(const std::string& root);

  // Classes whose object lives in one of the given folds. Train and test
  // folds are disjoint, so C_train and C_test never intersect.
  std::vector<int> classes_in_folds(const std::vector<int>& folds) const;
  std::vector<size_t> images_of_class(int class_id) const;
  int fold_of_class(int class_id) const;
};

// Greedy assignment of objects to folds balancing the median defect-area
// proportion; deterministic for a fixed seed (ties broken by a seeded hash).
std::map<std::string, int> split_folds(const DatasetIndex& index, int n_folds, uint64_t seed);

// ---- crops ----

struct CropResult {
  ImageU8 image;
  MaskU8 mask;
  int oy = 0, ox = 0;   // offset into the (possibly padded) source
  bool resized = false; // plain-resize path for large defects
};

// Mirror-pads bottom/right so both dims reach at least `size`.
ImageU8 pad_reflect(const ImageU8& img, int size);
MaskU8 pad_reflect(const MaskU8& mask, int size);

// Native-resolution crop containing at least one defect pixel, uniform over
// eligible windows. Defects whose bounding box exceeds the window get a
// window centered on a uniformly drawn defect pixel. Defects covering at
// least `resize_threshold` of the image take the plain-resize path instead
// (flagged in the result).
CropResult non_resizing_crop(const ImageU8& image, const MaskU8& mask, int input_size,
                             Philox& rng, double resize_threshold = 0.01);

// Defect-free window (zero overlap with the mask); nullopt when none is
// found within the try budget.
std::optional<CropResult> normal_crop(const ImageU8& image, const MaskU8& mask, int input_size,
                                      Philox& rng, int max_tries = 100);

// ---- episodes ----

// Dihedral augmentation code: bits 0-1 = quarter turns, bit 2 = horizontal flip.
ImageU8 apply_augment(const ImageU8& img, uint8_t code);
MaskU8 apply_augment(const MaskU8& mask, uint8_t code);

struct CropRef {
  std::string image_id;
  int oy = 0, ox = 0;
  bool resized = false;
  uint8_t aug = 0;
};

struct EpisodeRecord {
  CropRef query;
  std::vector<CropRef> supports;
  int class_id = -1;
  bool normal_query = false;
};

struct Episode {
  ImageU8 query_image;
  MaskU8 query_mask;
  std::vector<ImageU8> support_images;
  std::vector<MaskU8> support_masks;
  int class_id = -1;
  bool normal_query = false;
  EpisodeRecord record;
};

std::string episode_records_to_json(const std::vector<EpisodeRecord>& records);
std::vector<EpisodeRecord> episode_records_from_json(const std::string& text);

struct SamplerConfig {
  int input_size = 128;
  int shots = 1;           // distinct support images
  int crops_per_shot = 1;  // 4 reproduces the one-annotation multi-crop protocol
  float alpha = 0.3f;      // probability of a defect-free query
  bool augment = false;    // flips and quarter turns
  double resize_area_threshold = 0.01;
};

// Draws episodes from the classes of the given folds. Episode k is derived
// from substream k of the sampler seed, so streams replay identically
// across runs and across model configurations.
class EpisodeSampler {
 public:
  EpisodeSampler(const DatasetIndex& index, std::vector<int> folds, SamplerConfig cfg,
                 uint64_t seed);

  Episode next() { return sample(next_index_++); }
  Episode sample(uint64_t episode_index);

  // Reconstructs the exact crops of a recorded episode.
  Episode materialize(const EpisodeRecord& record) const;

  const std::vector<int>& classes() const { return classes_; }

 private:
  const DatasetIndex& index_;
  std::vector<int> folds_;
  SamplerConfig cfg_;
  Philox base_;
  uint64_t next_index_ = 0;
  std::vector<int> classes_;
  std::map<int, std::vector<size_t>> class_images_;
  const ImageRecord& record_by_id(const std::string& id) const;
};

}  // namespace sofs
