#include "sofs/synth.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include <nlohmann/json.hpp>

#include "sofs/errors.hpp"
#include "sofs/rng.hpp"

namespace sofs {

namespace {

constexpr double kPi = 3.14159265358979323846;

float clamp01(float v) { return std::min(std::max(v, 0.0f), 1.0f); }

uint8_t to_u8(float v01) {
  return static_cast<uint8_t>(std::lround(clamp01(v01) * 255.0f));
}

// Seeded multi-octave value noise in [0,1].
struct ValueNoise {
  std::vector<std::vector<float>> grids;
  std::vector<int> sizes;

  ValueNoise(Philox rng, std::vector<int> grid_sizes) : sizes(std::move(grid_sizes)) {
    for (int gs : sizes) {
      std::vector<float> g(static_cast<size_t>(gs) * gs);
      for (auto& v : g) v = rng.next_float();
      grids.push_back(std::move(g));
    }
  }

  float octave(size_t o, double u, double v) const {
    const int gs = sizes[o];
    const double x = u * gs, y = v * gs;
    const int x0 = static_cast<int>(x) % gs, y0 = static_cast<int>(y) % gs;
    const int x1 = (x0 + 1) % gs, y1 = (y0 + 1) % gs;
    const double tx = x - std::floor(x), ty = y - std::floor(y);
    auto g = [&](int yy, int xx) {
      return static_cast<double>(grids[o][static_cast<size_t>(yy) * gs + xx]);
    };
    return static_cast<float>((1 - ty) * ((1 - tx) * g(y0, x0) + tx * g(y0, x1)) +
                              ty * ((1 - tx) * g(y1, x0) + tx * g(y1, x1)));
  }

  float at(double u, double v) const {
    static constexpr float w[3] = {0.55f, 0.30f, 0.15f};
    float s = 0.0f;
    for (size_t o = 0; o < grids.size(); ++o) s += w[o % 3] * octave(o, u, v);
    return clamp01(s);
  }
};

struct Canvas {
  int n;
  std::vector<float> rgb;  // interleaved, [0,1]
  MaskU8 mask;

  explicit Canvas(int size) : n(size), rgb(static_cast<size_t>(size) * size * 3), mask(size, size) {}
  float& at(int y, int x, int c) { return rgb[(static_cast<size_t>(y) * n + x) * 3 + c]; }
};

void paint_background(Canvas& cv, Philox rng) {
  const float base_r = rng.uniform(0.25f, 0.75f);
  const float base_g = rng.uniform(0.25f, 0.75f);
  const float base_b = rng.uniform(0.25f, 0.75f);
  ValueNoise noise(rng.split(1), {8, 16, 32});
  ValueNoise tint(rng.split(2), {8});
  for (int y = 0; y < cv.n; ++y)
    for (int x = 0; x < cv.n; ++x) {
      const double u = static_cast<double>(x) / cv.n, v = static_cast<double>(y) / cv.n;
      const float lum = 0.55f + 0.45f * noise.at(u, v);
      const float t = 0.9f + 0.2f * tint.at(u, v);
      cv.at(y, x, 0) = clamp01(base_r * lum * t);
      cv.at(y, x, 1) = clamp01(base_g * lum);
      cv.at(y, x, 2) = clamp01(base_b * lum * (2.0f - t));
    }
}

long long mask_area(const MaskU8& m) { return m.sum(); }

void stamp_disc(Canvas& cv, double cy, double cx, double r, float dr, float dg, float db,
                bool set_mask = true) {
  const int y0 = std::max(0, static_cast<int>(cy - r - 1));
  const int y1 = std::min(cv.n - 1, static_cast<int>(cy + r + 1));
  const int x0 = std::max(0, static_cast<int>(cx - r - 1));
  const int x1 = std::min(cv.n - 1, static_cast<int>(cx + r + 1));
  for (int y = y0; y <= y1; ++y)
    for (int x = x0; x <= x1; ++x) {
      const double dy = y - cy, dx = x - cx;
      if (dy * dy + dx * dx <= r * r) {
        cv.at(y, x, 0) = clamp01(cv.at(y, x, 0) + dr);
        cv.at(y, x, 1) = clamp01(cv.at(y, x, 1) + dg);
        cv.at(y, x, 2) = clamp01(cv.at(y, x, 2) + db);
        if (set_mask) cv.mask.at(y, x) = 1;
      }
    }
}

// Each renderer draws one defect instance aiming at `target` pixels and
// relies on the caller's retry loop to land inside the area budget.

void render_spot(Canvas& cv, Philox& rng, long long target) {
  const double ratio = rng.uniform(0.6, 1.7);
  const double a = std::sqrt(static_cast<double>(target) * ratio / kPi);
  const double b = std::sqrt(static_cast<double>(target) / (ratio * kPi));
  const double theta = rng.uniform(0.0, kPi);
  const double margin = std::max(a, b) + 2;
  const double cy = rng.uniform(margin, cv.n - margin);
  const double cx = rng.uniform(margin, cv.n - margin);
  const float delta = (rng.bernoulli(0.5) ? 1.0f : -1.0f) * rng.uniform(0.25f, 0.45f);
  const double ct = std::cos(theta), st = std::sin(theta);
  for (int y = 0; y < cv.n; ++y)
    for (int x = 0; x < cv.n; ++x) {
      const double ry = (y - cy) * ct - (x - cx) * st;
      const double rx = (y - cy) * st + (x - cx) * ct;
      if ((ry / a) * (ry / a) + (rx / b) * (rx / b) <= 1.0) {
        for (int c = 0; c < 3; ++c) cv.at(y, x, c) = clamp01(cv.at(y, x, c) + delta);
        cv.mask.at(y, x) = 1;
      }
    }
}

void render_scratch(Canvas& cv, Philox& rng, long long target) {
  const int width = 1 + static_cast<int>(rng.next_below(3));
  const double len = std::max(6.0, static_cast<double>(target) / width);
  double theta = rng.uniform(0.0, 2.0 * kPi);
  const double margin = len / 2 + 4;
  double cy = rng.uniform(std::min(margin, cv.n / 2.0), std::max(cv.n - margin, cv.n / 2.0));
  double cx = rng.uniform(std::min(margin, cv.n / 2.0), std::max(cv.n - margin, cv.n / 2.0));
  double y = cy - std::sin(theta) * len / 2;
  double x = cx - std::cos(theta) * len / 2;
  const float bright = rng.uniform(0.3f, 0.5f);
  for (int step = 0; step < static_cast<int>(len); ++step) {
    theta += rng.uniform(-0.06, 0.06);
    y += std::sin(theta);
    x += std::cos(theta);
    stamp_disc(cv, y, x, width * 0.5 + 0.2, bright, bright, bright);
  }
}

void render_crack(Canvas& cv, Philox& rng, long long target) {
  double y = rng.uniform(20.0, cv.n - 20.0);
  double x = rng.uniform(20.0, cv.n - 20.0);
  double theta = rng.uniform(0.0, 2.0 * kPi);
  const float dark = -rng.uniform(0.35f, 0.5f);
  long long drawn = 0;
  int guard = 0;
  while (drawn < target && guard++ < 8 * target) {
    if (rng.bernoulli(0.15)) theta += rng.uniform(-0.9, 0.9);
    y = std::min(std::max(y + std::sin(theta), 2.0), cv.n - 3.0);
    x = std::min(std::max(x + std::cos(theta), 2.0), cv.n - 3.0);
    const int iy = static_cast<int>(y), ix = static_cast<int>(x);
    if (!cv.mask.at(iy, ix)) {
      for (int c = 0; c < 3; ++c) cv.at(iy, ix, c) = clamp01(cv.at(iy, ix, c) + dark);
      cv.mask.at(iy, ix) = 1;
      ++drawn;
    }
  }
}

void render_missing_patch(Canvas& cv, Philox& rng, long long target) {
  // region re-textured from an unrelated noise stream: structure vanishes,
  // only plain background remains
  const double r = std::sqrt(static_cast<double>(target) / kPi);
  const double cy = rng.uniform(r + 2, cv.n - r - 2);
  const double cx = rng.uniform(r + 2, cv.n - r - 2);
  ValueNoise filler(rng.split(7), {8, 16});
  const float base = rng.uniform(0.35f, 0.6f);
  for (int y = 0; y < cv.n; ++y)
    for (int x = 0; x < cv.n; ++x) {
      const double dy = y - cy, dx = x - cx;
      if (dy * dy + dx * dx <= r * r) {
        const float v =
            base * (0.8f + 0.3f * filler.at(static_cast<double>(x) / cv.n,
                                            static_cast<double>(y) / cv.n));
        cv.at(y, x, 0) = v;
        cv.at(y, x, 1) = v;
        cv.at(y, x, 2) = v;
        cv.mask.at(y, x) = 1;
      }
    }
}

void render_stain(Canvas& cv, Philox& rng, long long target) {
  const double r0 = std::sqrt(static_cast<double>(target) / kPi);
  const double cy = rng.uniform(r0 + 6, cv.n - r0 - 6);
  const double cx = rng.uniform(r0 + 6, cv.n - r0 - 6);
  ValueNoise edge(rng.split(3), {8});
  for (int y = 0; y < cv.n; ++y)
    for (int x = 0; x < cv.n; ++x) {
      const double dy = y - cy, dx = x - cx;
      const double ang = std::atan2(dy, dx) / (2 * kPi) + 0.5;
      const double r = r0 * (0.8 + 0.4 * edge.at(ang, 0.0));
      if (dy * dy + dx * dx <= r * r) {
        for (int c = 0; c < 3; ++c) cv.at(y, x, c) = clamp01(cv.at(y, x, c) * 0.72f);
        cv.mask.at(y, x) = 1;
      }
    }
}

void render_pit(Canvas& cv, Philox& rng, long long target) {
  const double r = std::sqrt(static_cast<double>(target) / kPi);
  const double cy = rng.uniform(r + 2, cv.n - r - 2);
  const double cx = rng.uniform(r + 2, cv.n - r - 2);
  stamp_disc(cv, cy, cx, r, -0.5f, -0.5f, -0.45f);
}

void render_burr(Canvas& cv, Philox& rng, long long target) {
  // protrusion sitting on one image border: half-disc area = target
  const double r = std::sqrt(2.0 * static_cast<double>(target) / kPi);
  const int side = static_cast<int>(rng.next_below(4));
  const double along = rng.uniform(r + 2, cv.n - r - 2);
  double cy = 0, cx = 0;
  if (side == 0) {
    cy = 0;
    cx = along;
  } else if (side == 1) {
    cy = cv.n - 1;
    cx = along;
  } else if (side == 2) {
    cy = along;
    cx = 0;
  } else {
    cy = along;
    cx = cv.n - 1;
  }
  const float bright = rng.uniform(0.3f, 0.45f);
  stamp_disc(cv, cy, cx, r, bright, bright * 0.8f, bright * 0.6f);
}

void render_discoloration(Canvas& cv, Philox& rng, long long target) {
  const double ratio = rng.uniform(0.8, 1.4);
  const double a = std::sqrt(static_cast<double>(target) * ratio / kPi);
  const double b = std::sqrt(static_cast<double>(target) / (ratio * kPi));
  const double cy = rng.uniform(a + 2, cv.n - a - 2);
  const double cx = rng.uniform(b + 2, cv.n - b - 2);
  for (int y = 0; y < cv.n; ++y)
    for (int x = 0; x < cv.n; ++x) {
      const double dy = (y - cy) / a, dx = (x - cx) / b;
      if (dy * dy + dx * dx <= 1.0) {
        // rotate channels toward a hue shift
        const float r = cv.at(y, x, 0), g = cv.at(y, x, 1), bl = cv.at(y, x, 2);
        cv.at(y, x, 0) = clamp01(0.25f * r + 0.75f * g);
        cv.at(y, x, 1) = clamp01(0.25f * g + 0.75f * bl);
        cv.at(y, x, 2) = clamp01(0.25f * bl + 0.75f * r);
        cv.mask.at(y, x) = 1;
      }
    }
}

void render_chip(Canvas& cv, Philox& rng, long long target) {
  // triangular notch at a corner, legs sized for area = leg^2 / 2
  const double leg = std::sqrt(2.0 * static_cast<double>(target));
  const int corner = static_cast<int>(rng.next_below(4));
  const float dark = -rng.uniform(0.4f, 0.55f);
  const int n = cv.n;
  for (int y = 0; y < n; ++y)
    for (int x = 0; x < n; ++x) {
      const double yy = (corner & 1) ? n - 1 - y : y;
      const double xx = (corner & 2) ? n - 1 - x : x;
      if (yy + xx <= leg) {
        for (int c = 0; c < 3; ++c) cv.at(y, x, c) = clamp01(cv.at(y, x, c) + dark);
        cv.mask.at(y, x) = 1;
      }
    }
}

using Renderer = void (*)(Canvas&, Philox&, long long);

Renderer renderer_for(const std::string& cls) {
  if (cls == "spot") return render_spot;
  if (cls == "scratch") return render_scratch;
  if (cls == "crack") return render_crack;
  if (cls == "missing_patch") return render_missing_patch;
  if (cls == "stain") return render_stain;
  if (cls == "pit") return render_pit;
  if (cls == "burr") return render_burr;
  if (cls == "discoloration") return render_discoloration;
  if (cls == "chip") return render_chip;
  throw ParameterError("unknown synthetic defect class: " + cls);
}

}  // namespace

void SynthConfig::validate() const {
  if (image_size < 32) throw ParameterError("synth: image_size too small");
  if (!(area_min > 0.0 && area_max < 1.0 && area_min < area_max))
    throw ParameterError("synth: area range must satisfy 0 < min < max < 1");
  if (images_per_class < 0) throw ParameterError("synth: negative images_per_class");
  if (static_cast<int>(classes.size()) < 2 * n_folds && images_per_class > 0)
    throw ParameterError("synth: need at least 2 classes per fold");
}

DatasetIndex gen_synth_dataset(const SynthConfig& cfg, const std::string& out_dir) {
  cfg.validate();
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create directory " + out_dir + ": " + ec.message());

  const long long total_px = static_cast<long long>(cfg.image_size) * cfg.image_size;
  const long long min_px = std::max<long long>(1, static_cast<long long>(std::ceil(cfg.area_min * total_px)));
  const long long max_px = static_cast<long long>(std::floor(cfg.area_max * total_px));
  if (min_px > max_px) throw ParameterError("synth: area range empty at this image size");

  Philox master(cfg.seed, 0x53594e54ull);
  nlohmann::json manifest;
  manifest["n_folds"] = cfg.n_folds;
  manifest["image_size"] = cfg.image_size;
  manifest["seed"] = cfg.seed;

  nlohmann::json classes_json;
  for (size_t c = 0; c < cfg.classes.size(); ++c)
    classes_json[std::to_string(c)] = cfg.classes[c];
  manifest["classes"] = classes_json;

  nlohmann::json images_json = nlohmann::json::array();
  DatasetIndex idx;
  idx.root = out_dir;
  idx.n_folds = cfg.n_folds;

  for (size_t c = 0; c < cfg.classes.size(); ++c) {
    const std::string& cls = cfg.classes[c];
    idx.objects.push_back(cls);
    idx.class_names[static_cast<int>(c)] = cls;
    fs::create_directories(fs::path(out_dir) / cls / "masks", ec);
    if (ec) throw IoError("cannot create directories under " + out_dir + ": " + ec.message());
    Renderer render = renderer_for(cls);

    for (int i = 0; i < cfg.images_per_class; ++i) {
      Philox rng = master.split(c * 4096 + static_cast<uint64_t>(i));
      Canvas cv(cfg.image_size);
      paint_background(cv, rng.split(0));

      Philox drng = rng.split(1);
      long long target =
          min_px + static_cast<long long>(drng.next_below(static_cast<uint64_t>(max_px - min_px + 1)));
      long long area = 0;
      bool placed = false;
      for (int tries = 0; tries < 24 && !placed; ++tries) {
        Canvas trial = cv;
        render(trial, drng, target);
        area = mask_area(trial.mask);
        if (area >= min_px && area <= max_px) {
          cv = std::move(trial);
          placed = true;
          break;
        }
        // rescale the request toward the budget and redraw
        if (area <= 0)
          target = std::min(max_px, target + std::max<long long>(1, target / 2));
        else
          target = std::min(
              max_px,
              std::max(min_px, static_cast<long long>(static_cast<double>(target) *
                                                      std::sqrt(0.5 * (min_px + max_px) /
                                                                static_cast<double>(area)))));
      }
      if (!placed)
        throw ContractError("synth: renderer for " + cls + " could not hit the area budget");

      char id_buf[16];
      std::snprintf(id_buf, sizeof(id_buf), "%03d", i);
      const std::string local_id = id_buf;
      const std::string image_rel = cls + "/" + local_id + ".ppm";
      const std::string mask_rel = cls + "/masks/" + local_id + "_" + cls + ".pgm";

      ImageU8 img(cfg.image_size, cfg.image_size, 3);
      for (int y = 0; y < cfg.image_size; ++y)
        for (int x = 0; x < cfg.image_size; ++x)
          for (int ch = 0; ch < 3; ++ch) img.at(y, x, ch) = to_u8(cv.at(y, x, ch));
      write_ppm(out_dir + "/" + image_rel, img);
      write_mask_pgm(out_dir + "/" + mask_rel, cv.mask);

      const double fraction = static_cast<double>(mask_area(cv.mask)) / total_px;
      ImageRecord rec;
      rec.id = cls + "/" + local_id;
      rec.object = cls;
      rec.class_id = static_cast<int>(c);
      rec.image_path = out_dir + "/" + image_rel;
      rec.mask_path = out_dir + "/" + mask_rel;
      rec.h = cfg.image_size;
      rec.w = cfg.image_size;
      rec.area_fraction = fraction;
      idx.images.push_back(rec);

      nlohmann::json im;
      im["id"] = rec.id;
      im["object"] = cls;
      im["class_id"] = rec.class_id;
      im["image"] = image_rel;
      im["mask"] = mask_rel;
      im["h"] = rec.h;
      im["w"] = rec.w;
      im["area_fraction"] = fraction;
      images_json.push_back(im);
    }
  }

  const auto folds = cfg.images_per_class > 0
                         ? split_folds(idx, cfg.n_folds, cfg.seed)
                         : [&] {
                             std::map<std::string, int> even;
                             for (size_t c = 0; c < cfg.classes.size(); ++c)
                               even[cfg.classes[c]] = static_cast<int>(c) % cfg.n_folds;
                             return even;
                           }();
  idx.object_fold = folds;

  nlohmann::json objects_json = nlohmann::json::array();
  for (const auto& obj : idx.objects) {
    nlohmann::json o;
    o["name"] = obj;
    o["fold"] = folds.at(obj);
    objects_json.push_back(o);
  }
  manifest["objects"] = objects_json;
  manifest["images"] = images_json;

  std::ofstream out(out_dir + "/manifest.json");
  if (!out) throw IoError("cannot open for writing: " + out_dir + "/manifest.json");
  out << manifest.dump(2) << "\n";
  if (!out) throw IoError("write failed: " + out_dir + "/manifest.json");

  return idx;
}

}  // namespace sofs
