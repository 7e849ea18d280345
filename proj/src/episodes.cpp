#include "sofs/episodes.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

#include "sofs/errors.hpp"

namespace sofs {

namespace {

uint64_t fnv1a(const std::string& s, uint64_t seed) {
  uint64_t h = 1469598103934665603ull ^ seed;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// Count of set pixels in [0,y) x [0,x), for O(1) window sums.
struct IntegralMask {
  int h, w;
  std::vector<int> s;  // (h+1) x (w+1)
  explicit IntegralMask(const MaskU8& m) : h(m.h), w(m.w), s((h + 1) * (w + 1), 0) {
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        s[(y + 1) * (w + 1) + (x + 1)] = s[y * (w + 1) + (x + 1)] + s[(y + 1) * (w + 1) + x] -
                                         s[y * (w + 1) + x] + m.at(y, x);
  }
  int window(int oy, int ox, int win_h, int win_w) const {
    return s[(oy + win_h) * (w + 1) + (ox + win_w)] - s[oy * (w + 1) + (ox + win_w)] -
           s[(oy + win_h) * (w + 1) + ox] + s[oy * (w + 1) + ox];
  }
};

int reflect_index(int i, int n) {
  // mirror without repeating the edge sample; degenerates safely for n == 1
  if (n == 1) return 0;
  const int period = 2 * n - 2;
  i = ((i % period) + period) % period;
  return i < n ? i : period - i;
}

ImageU8 crop_image(const ImageU8& img, int oy, int ox, int win) {
  ImageU8 out(win, win, img.c);
  for (int y = 0; y < win; ++y)
    for (int x = 0; x < win; ++x)
      for (int ch = 0; ch < img.c; ++ch) out.at(y, x, ch) = img.at(oy + y, ox + x, ch);
  return out;
}

MaskU8 crop_mask(const MaskU8& m, int oy, int ox, int win) {
  MaskU8 out(win, win);
  for (int y = 0; y < win; ++y)
    for (int x = 0; x < win; ++x) out.at(y, x) = m.at(oy + y, ox + x);
  return out;
}

ImageU8 resize_image_u8(const ImageU8& img, int size) {
  ImageU8 out(size, size, img.c);
  const double sy = static_cast<double>(img.h) / size;
  const double sx = static_cast<double>(img.w) / size;
  for (int y = 0; y < size; ++y) {
    const double fy = (y + 0.5) * sy - 0.5;
    int y0 = static_cast<int>(std::floor(fy));
    const double ty = fy - y0;
    int y1 = std::min(std::max(y0 + 1, 0), img.h - 1);
    y0 = std::min(std::max(y0, 0), img.h - 1);
    for (int x = 0; x < size; ++x) {
      const double fx = (x + 0.5) * sx - 0.5;
      int x0 = static_cast<int>(std::floor(fx));
      const double tx = fx - x0;
      int x1 = std::min(std::max(x0 + 1, 0), img.w - 1);
      x0 = std::min(std::max(x0, 0), img.w - 1);
      for (int ch = 0; ch < img.c; ++ch) {
        const double v = (1 - ty) * ((1 - tx) * img.at(y0, x0, ch) + tx * img.at(y0, x1, ch)) +
                         ty * ((1 - tx) * img.at(y1, x0, ch) + tx * img.at(y1, x1, ch));
        out.at(y, x, ch) = static_cast<uint8_t>(std::lround(std::min(std::max(v, 0.0), 255.0)));
      }
    }
  }
  return out;
}

MaskU8 resize_mask_nearest(const MaskU8& m, int size) {
  MaskU8 out(size, size);
  for (int y = 0; y < size; ++y) {
    const int sy0 = std::min(static_cast<int>((y + 0.5) * m.h / size), m.h - 1);
    for (int x = 0; x < size; ++x) {
      const int sx0 = std::min(static_cast<int>((x + 0.5) * m.w / size), m.w - 1);
      out.at(y, x) = m.at(sy0, sx0);
    }
  }
  return out;
}

}  // namespace

// ---- dataset index ----

DatasetIndex DatasetIndex::load(const std::string& root) {
  const std::string manifest_path = root + "/manifest.json";
  std::ifstream in(manifest_path);
  if (!in) throw IoError("cannot open: " + manifest_path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("manifest unparseable: " + manifest_path + ": " + e.what());
  }

  DatasetIndex idx;
  idx.root = root;
  idx.n_folds = j.at("n_folds").get<int>();
  for (const auto& [key, name] : j.at("classes").items())
    idx.class_names[std::stoi(key)] = name.get<std::string>();
  for (const auto& obj : j.at("objects")) {
    const std::string name = obj.at("name").get<std::string>();
    idx.objects.push_back(name);
    idx.object_fold[name] = obj.at("fold").get<int>();
  }
  for (const auto& im : j.at("images")) {
    ImageRecord r;
    r.id = im.at("id").get<std::string>();
    r.object = im.at("object").get<std::string>();
    r.class_id = im.at("class_id").get<int>();
    r.image_path = root + "/" + im.at("image").get<std::string>();
    r.mask_path = root + "/" + im.at("mask").get<std::string>();
    r.h = im.at("h").get<int>();
    r.w = im.at("w").get<int>();
    r.area_fraction = im.at("area_fraction").get<double>();
    idx.images.push_back(std::move(r));
  }
  return idx;
}

std::vector<int> DatasetIndex::classes_in_folds(const std::vector<int>& folds) const {
  std::vector<int> out;
  for (const auto& [cid, name] : class_names) {
    const int fold = fold_of_class(cid);
    if (std::find(folds.begin(), folds.end(), fold) != folds.end()) out.push_back(cid);
  }
  return out;
}

std::vector<size_t> DatasetIndex::images_of_class(int class_id) const {
  std::vector<size_t> out;
  for (size_t i = 0; i < images.size(); ++i)
    if (images[i].class_id == class_id) out.push_back(i);
  return out;
}

int DatasetIndex::fold_of_class(int class_id) const {
  for (const auto& r : images)
    if (r.class_id == class_id) return object_fold.at(r.object);
  throw ContractError("fold_of_class: class " + std::to_string(class_id) + " has no images");
}

std::map<std::string, int> split_folds(const DatasetIndex& index, int n_folds, uint64_t seed) {
  if (static_cast<int>(index.objects.size()) < n_folds)
    throw ContractError("split_folds: fewer objects than folds");

  struct Item {
    std::string name;
    double med;
    uint64_t tie;
  };
  std::vector<Item> items;
  for (const auto& obj : index.objects) {
    std::vector<double> areas;
    for (const auto& r : index.images)
      if (r.object == obj) areas.push_back(r.area_fraction);
    items.push_back({obj, median(std::move(areas)), fnv1a(obj, seed)});
  }
  std::sort(items.begin(), items.end(), [](const Item& a, const Item& b) {
    if (a.med != b.med) return a.med > b.med;
    return a.tie < b.tie;
  });

  // largest-first greedy: next object goes to the lightest fold
  std::vector<double> load(static_cast<size_t>(n_folds), 0.0);
  std::vector<int> count(static_cast<size_t>(n_folds), 0);
  std::map<std::string, int> assignment;
  const int per_fold =
      (static_cast<int>(items.size()) + n_folds - 1) / n_folds;  // keep folds size-balanced
  for (const auto& item : items) {
    int best = -1;
    for (int f = 0; f < n_folds; ++f) {
      if (count[static_cast<size_t>(f)] >= per_fold) continue;
      if (best < 0 || load[static_cast<size_t>(f)] < load[static_cast<size_t>(best)]) best = f;
    }
    assignment[item.name] = best;
    load[static_cast<size_t>(best)] += item.med;
    ++count[static_cast<size_t>(best)];
  }
  return assignment;
}

// ---- crops ----

ImageU8 pad_reflect(const ImageU8& img, int size) {
  if (img.h >= size && img.w >= size) return img;
  const int nh = std::max(img.h, size), nw = std::max(img.w, size);
  ImageU8 out(nh, nw, img.c);
  for (int y = 0; y < nh; ++y) {
    const int sy = reflect_index(y, img.h);
    for (int x = 0; x < nw; ++x) {
      const int sx = reflect_index(x, img.w);
      for (int ch = 0; ch < img.c; ++ch) out.at(y, x, ch) = img.at(sy, sx, ch);
    }
  }
  return out;
}

MaskU8 pad_reflect(const MaskU8& mask, int size) {
  if (mask.h >= size && mask.w >= size) return mask;
  const int nh = std::max(mask.h, size), nw = std::max(mask.w, size);
  MaskU8 out(nh, nw);
  for (int y = 0; y < nh; ++y) {
    const int sy = reflect_index(y, mask.h);
    for (int x = 0; x < nw; ++x) out.at(y, x) = mask.at(sy, reflect_index(x, mask.w));
  }
  return out;
}

CropResult non_resizing_crop(const ImageU8& image, const MaskU8& mask, int input_size,
                             Philox& rng, double resize_threshold) {
  if (image.h != mask.h || image.w != mask.w)
    throw DimensionError("non_resizing_crop: image and mask sizes differ");
  const long long defect = mask.sum();
  if (defect == 0) throw ContractError("non_resizing_crop: mask has no defect pixels");

  const double fraction =
      static_cast<double>(defect) / (static_cast<double>(mask.h) * mask.w);
  if (fraction >= resize_threshold) {
    CropResult r;
    r.image = resize_image_u8(image, input_size);
    r.mask = resize_mask_nearest(mask, input_size);
    r.resized = true;
    return r;
  }

  const ImageU8 img = pad_reflect(image, input_size);
  const MaskU8 msk = pad_reflect(mask, input_size);
  const int H = img.h, W = img.w, win = input_size;

  int ymin = H, ymax = -1, xmin = W, xmax = -1;
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x)
      if (msk.at(y, x)) {
        ymin = std::min(ymin, y);
        ymax = std::max(ymax, y);
        xmin = std::min(xmin, x);
        xmax = std::max(xmax, x);
      }

  auto centered_on_defect_pixel = [&]() -> CropResult {
    std::vector<std::pair<int, int>> pixels;
    for (int y = 0; y < H; ++y)
      for (int x = 0; x < W; ++x)
        if (msk.at(y, x)) pixels.emplace_back(y, x);
    const auto [py, px] = pixels[rng.next_below(pixels.size())];
    const int oy = std::min(std::max(py - win / 2, 0), H - win);
    const int ox = std::min(std::max(px - win / 2, 0), W - win);
    return {crop_image(img, oy, ox, win), crop_mask(msk, oy, ox, win), oy, ox, false};
  };

  if (ymax - ymin + 1 > win || xmax - xmin + 1 > win) return centered_on_defect_pixel();

  const int loy = std::max(0, ymin - (win - 1)), hiy = std::min(H - win, ymax);
  const int lox = std::max(0, xmin - (win - 1)), hix = std::min(W - win, xmax);
  IntegralMask integral(msk);
  for (int tries = 0; tries < 1000; ++tries) {
    const int oy = loy + static_cast<int>(rng.next_below(static_cast<uint64_t>(hiy - loy + 1)));
    const int ox = lox + static_cast<int>(rng.next_below(static_cast<uint64_t>(hix - lox + 1)));
    if (integral.window(oy, ox, win, win) > 0)
      return {crop_image(img, oy, ox, win), crop_mask(msk, oy, ox, win), oy, ox, false};
  }
  return centered_on_defect_pixel();
}

std::optional<CropResult> normal_crop(const ImageU8& image, const MaskU8& mask, int input_size,
                                      Philox& rng, int max_tries) {
  if (image.h != mask.h || image.w != mask.w)
    throw DimensionError("normal_crop: image and mask sizes differ");
  const ImageU8 img = pad_reflect(image, input_size);
  const MaskU8 msk = pad_reflect(mask, input_size);
  const int H = img.h, W = img.w, win = input_size;
  IntegralMask integral(msk);
  for (int t = 0; t < max_tries; ++t) {
    const int oy = static_cast<int>(rng.next_below(static_cast<uint64_t>(H - win + 1)));
    const int ox = static_cast<int>(rng.next_below(static_cast<uint64_t>(W - win + 1)));
    if (integral.window(oy, ox, win, win) == 0)
      return CropResult{crop_image(img, oy, ox, win), crop_mask(msk, oy, ox, win), oy, ox, false};
  }
  return std::nullopt;
}

// ---- augmentation ----

ImageU8 apply_augment(const ImageU8& img, uint8_t code) {
  ImageU8 cur = img;
  const int turns = code & 3;
  for (int t = 0; t < turns; ++t) {
    ImageU8 rot(cur.w, cur.h, cur.c);  // (y,x) -> (x, h-1-y)
    for (int y = 0; y < cur.h; ++y)
      for (int x = 0; x < cur.w; ++x)
        for (int ch = 0; ch < cur.c; ++ch) rot.at(x, cur.h - 1 - y, ch) = cur.at(y, x, ch);
    cur = std::move(rot);
  }
  if (code & 4) {
    ImageU8 flip(cur.h, cur.w, cur.c);
    for (int y = 0; y < cur.h; ++y)
      for (int x = 0; x < cur.w; ++x)
        for (int ch = 0; ch < cur.c; ++ch) flip.at(y, cur.w - 1 - x, ch) = cur.at(y, x, ch);
    cur = std::move(flip);
  }
  return cur;
}

MaskU8 apply_augment(const MaskU8& mask, uint8_t code) {
  MaskU8 cur = mask;
  const int turns = code & 3;
  for (int t = 0; t < turns; ++t) {
    MaskU8 rot(cur.w, cur.h);
    for (int y = 0; y < cur.h; ++y)
      for (int x = 0; x < cur.w; ++x) rot.at(x, cur.h - 1 - y) = cur.at(y, x);
    cur = std::move(rot);
  }
  if (code & 4) {
    MaskU8 flip(cur.h, cur.w);
    for (int y = 0; y < cur.h; ++y)
      for (int x = 0; x < cur.w; ++x) flip.at(y, cur.w - 1 - x) = cur.at(y, x);
    cur = std::move(flip);
  }
  return cur;
}

// ---- replay records ----

std::string episode_records_to_json(const std::vector<EpisodeRecord>& records) {
  nlohmann::json arr = nlohmann::json::array();
  auto crop_json = [](const CropRef& c) {
    return nlohmann::json{
        {"id", c.image_id}, {"oy", c.oy}, {"ox", c.ox}, {"resized", c.resized}, {"aug", c.aug}};
  };
  for (const auto& r : records) {
    nlohmann::json item;
    item["query"] = crop_json(r.query);
    nlohmann::json sup = nlohmann::json::array();
    for (const auto& s : r.supports) sup.push_back(crop_json(s));
    item["supports"] = sup;
    item["class_id"] = r.class_id;
    item["normal"] = r.normal_query;
    arr.push_back(item);
  }
  return arr.dump(2) + "\n";
}

std::vector<EpisodeRecord> episode_records_from_json(const std::string& text) {
  nlohmann::json arr;
  try {
    arr = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("replay file unparseable: ") + e.what());
  }
  auto crop_from = [](const nlohmann::json& j) {
    CropRef c;
    c.image_id = j.at("id").get<std::string>();
    c.oy = j.at("oy").get<int>();
    c.ox = j.at("ox").get<int>();
    c.resized = j.at("resized").get<bool>();
    c.aug = static_cast<uint8_t>(j.at("aug").get<int>());
    return c;
  };
  std::vector<EpisodeRecord> out;
  for (const auto& item : arr) {
    EpisodeRecord r;
    r.query = crop_from(item.at("query"));
    for (const auto& s : item.at("supports")) r.supports.push_back(crop_from(s));
    r.class_id = item.at("class_id").get<int>();
    r.normal_query = item.at("normal").get<bool>();
    out.push_back(std::move(r));
  }
  return out;
}

// ---- sampler ----

EpisodeSampler::EpisodeSampler(const DatasetIndex& index, std::vector<int> folds,
                               SamplerConfig cfg, uint64_t seed)
    : index_(index), folds_(std::move(folds)), cfg_(cfg), base_(seed, 0x45505344ull) {
  classes_ = index_.classes_in_folds(folds_);
  for (int cid : classes_) {
    auto imgs = index_.images_of_class(cid);
    if (!imgs.empty()) class_images_[cid] = std::move(imgs);
  }
  std::erase_if(classes_, [&](int cid) { return !class_images_.count(cid); });
  if (classes_.empty()) throw ContractError("EpisodeSampler: no classes with images in folds");
}

const ImageRecord& EpisodeSampler::record_by_id(const std::string& id) const {
  for (const auto& r : index_.images)
    if (r.id == id) return r;
  throw ContractError("episode replay: unknown image id " + id);
}

Episode EpisodeSampler::sample(uint64_t episode_index) {
  Philox rng = base_.split(episode_index);
  Episode ep;
  ep.class_id = classes_[rng.next_below(classes_.size())];
  ep.normal_query = rng.bernoulli(cfg_.alpha);
  ep.record.class_id = ep.class_id;
  ep.record.normal_query = ep.normal_query;

  const auto& imgs = class_images_.at(ep.class_id);

  // query
  size_t query_idx = imgs[rng.next_below(imgs.size())];
  if (ep.normal_query) {
    bool found = false;
    for (int attempt = 0; attempt < 100 && !found; ++attempt) {
      const ImageRecord& rec = index_.images[query_idx];
      ImageU8 img = read_ppm(rec.image_path);
      MaskU8 msk = read_mask_pgm(rec.mask_path);
      auto crop = normal_crop(img, msk, cfg_.input_size, rng);
      if (crop) {
        ep.query_image = std::move(crop->image);
        ep.query_mask = std::move(crop->mask);
        ep.record.query = {rec.id, crop->oy, crop->ox, false, 0};
        found = true;
      } else {
        query_idx = imgs[rng.next_below(imgs.size())];
      }
    }
    if (!found)
      throw ContractError("sample_episode: no defect-free window found after 100 image attempts");
  } else {
    const ImageRecord& rec = index_.images[query_idx];
    ImageU8 img = read_ppm(rec.image_path);
    MaskU8 msk = read_mask_pgm(rec.mask_path);
    CropResult crop = non_resizing_crop(img, msk, cfg_.input_size, rng,
                                        cfg_.resize_area_threshold);
    ep.query_image = std::move(crop.image);
    ep.query_mask = std::move(crop.mask);
    ep.record.query = {rec.id, crop.oy, crop.ox, crop.resized, 0};
  }

  // support images: distinct from the query image when the class allows it
  std::vector<size_t> eligible;
  for (size_t i : imgs)
    if (i != query_idx) eligible.push_back(i);
  if (eligible.size() < static_cast<size_t>(cfg_.shots)) eligible = imgs;

  std::vector<size_t> chosen;
  if (eligible.size() >= static_cast<size_t>(cfg_.shots)) {
    std::vector<size_t> pool = eligible;
    for (int s = 0; s < cfg_.shots; ++s) {
      const size_t pick = rng.next_below(pool.size());
      chosen.push_back(pool[pick]);
      pool.erase(pool.begin() + static_cast<long>(pick));
    }
  } else {
    for (int s = 0; s < cfg_.shots; ++s) chosen.push_back(eligible[rng.next_below(eligible.size())]);
  }

  for (size_t img_idx : chosen) {
    const ImageRecord& rec = index_.images[img_idx];
    ImageU8 img = read_ppm(rec.image_path);
    MaskU8 msk = read_mask_pgm(rec.mask_path);
    for (int c = 0; c < cfg_.crops_per_shot; ++c) {
      CropResult crop =
          non_resizing_crop(img, msk, cfg_.input_size, rng, cfg_.resize_area_threshold);
      ep.support_images.push_back(std::move(crop.image));
      ep.support_masks.push_back(std::move(crop.mask));
      ep.record.supports.push_back({rec.id, crop.oy, crop.ox, crop.resized, 0});
    }
  }

  if (cfg_.augment) {
    auto draw_code = [&rng] {
      const uint8_t rot = static_cast<uint8_t>(rng.next_below(4));
      const uint8_t flip = static_cast<uint8_t>(rng.next_below(2));
      return static_cast<uint8_t>(rot | (flip << 2));
    };
    const uint8_t qcode = draw_code();
    ep.query_image = apply_augment(ep.query_image, qcode);
    ep.query_mask = apply_augment(ep.query_mask, qcode);
    ep.record.query.aug = qcode;
    for (size_t i = 0; i < ep.support_images.size(); ++i) {
      const uint8_t c = draw_code();
      ep.support_images[i] = apply_augment(ep.support_images[i], c);
      ep.support_masks[i] = apply_augment(ep.support_masks[i], c);
      ep.record.supports[i].aug = c;
    }
  }
  return ep;
}

Episode EpisodeSampler::materialize(const EpisodeRecord& record) const {
  Episode ep;
  ep.class_id = record.class_id;
  ep.normal_query = record.normal_query;
  ep.record = record;

  auto load_crop = [&](const CropRef& ref, ImageU8& out_img, MaskU8& out_mask) {
    const ImageRecord& rec = record_by_id(ref.image_id);
    ImageU8 img = read_ppm(rec.image_path);
    MaskU8 msk = read_mask_pgm(rec.mask_path);
    if (ref.resized) {
      out_img = resize_image_u8(img, cfg_.input_size);
      out_mask = resize_mask_nearest(msk, cfg_.input_size);
    } else {
      const ImageU8 padded = pad_reflect(img, cfg_.input_size);
      const MaskU8 padded_mask = pad_reflect(msk, cfg_.input_size);
      out_img = crop_image(padded, ref.oy, ref.ox, cfg_.input_size);
      out_mask = crop_mask(padded_mask, ref.oy, ref.ox, cfg_.input_size);
    }
    out_img = apply_augment(out_img, ref.aug);
    out_mask = apply_augment(out_mask, ref.aug);
  };

  load_crop(record.query, ep.query_image, ep.query_mask);
  for (const auto& s : record.supports) {
    ImageU8 img;
    MaskU8 msk;
    load_crop(s, img, msk);
    ep.support_images.push_back(std::move(img));
    ep.support_masks.push_back(std::move(msk));
  }
  return ep;
}

}  // namespace sofs
