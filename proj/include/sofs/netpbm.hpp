#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sofs/tensor.hpp"

namespace sofs {

// 8-bit interleaved raster, c = 1 (gray) or 3 (RGB).
struct ImageU8 {
  int h = 0, w = 0, c = 1;
  std::vector<uint8_t> data;

  ImageU8() = default;
  ImageU8(int h_, int w_, int c_) : h(h_), w(w_), c(c_) {
    data.assign(static_cast<size_t>(h) * w * c, 0);
  }
  uint8_t& at(int y, int x, int ch = 0) {
    return data[(static_cast<size_t>(y) * w + x) * c + ch];
  }
  uint8_t at(int y, int x, int ch = 0) const {
    return data[(static_cast<size_t>(y) * w + x) * c + ch];
  }
};

// Binary {0,1} raster used for defect masks.
struct MaskU8 {
  int h = 0, w = 0;
  std::vector<uint8_t> data;

  MaskU8() = default;
  MaskU8(int h_, int w_) : h(h_), w(w_) { data.assign(static_cast<size_t>(h) * w, 0); }
  uint8_t& at(int y, int x) { return data[static_cast<size_t>(y) * w + x]; }
  uint8_t at(int y, int x) const { return data[static_cast<size_t>(y) * w + x]; }
  long long sum() const {
    long long s = 0;
    for (uint8_t v : data) s += v;
    return s;
  }
};

// Binary netpbm: P6 (8-bit RGB), P5 (8-bit gray), and a 16-bit P5 variant
// (big-endian samples, per the netpbm convention) for probability maps.

void write_ppm(const std::string& path, const ImageU8& img);       // P6, c == 3
void write_pgm(const std::string& path, const ImageU8& img);       // P5, c == 1
void write_pgm16(const std::string& path, const std::vector<uint16_t>& data, int h, int w);

ImageU8 read_ppm(const std::string& path);
ImageU8 read_pgm(const std::string& path);

// Masks are stored as P5 with {0, 255}; readers map nonzero -> 1.
void write_mask_pgm(const std::string& path, const MaskU8& mask);
MaskU8 read_mask_pgm(const std::string& path);

// H x W x C in [0,1].
Tensor image_to_float(const ImageU8& img);
Tensor mask_to_float(const MaskU8& mask);  // H x W in {0,1}

}  // namespace sofs
