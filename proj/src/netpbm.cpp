#include "sofs/netpbm.hpp"

#include <cctype>
#include <fstream>

#include "sofs/errors.hpp"

namespace sofs {

namespace {

// Reads one whitespace/comment-delimited unsigned integer from a netpbm header.
int read_header_int(std::istream& in, const std::string& path) {
  int ch = in.get();
  while (in) {
    if (ch == '#') {
      while (in && ch != '\n') ch = in.get();
    } else if (std::isspace(ch)) {
      ch = in.get();
    } else {
      break;
    }
  }
  if (!in || !std::isdigit(ch)) throw FormatError("netpbm header malformed: " + path);
  long long v = 0;
  while (in && std::isdigit(ch)) {
    v = v * 10 + (ch - '0');
    if (v > (1ll << 31)) throw FormatError("netpbm header value out of range: " + path);
    ch = in.get();
  }
  return static_cast<int>(v);
}

ImageU8 read_netpbm(const std::string& path, const char* want_magic, int channels) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open: " + path);
  char m0 = 0, m1 = 0;
  in.get(m0);
  in.get(m1);
  if (!in || m0 != want_magic[0] || m1 != want_magic[1])
    throw FormatError(std::string("expected ") + want_magic + ": " + path);
  const int w = read_header_int(in, path);
  const int h = read_header_int(in, path);
  const int maxval = read_header_int(in, path);
  if (maxval != 255) throw FormatError("unsupported maxval " + std::to_string(maxval) + ": " + path);
  ImageU8 img(h, w, channels);
  in.read(reinterpret_cast<char*>(img.data.data()), static_cast<std::streamsize>(img.data.size()));
  if (in.gcount() != static_cast<std::streamsize>(img.data.size()))
    throw FormatError("netpbm payload truncated: " + path);
  return img;
}

void write_netpbm(const std::string& path, const char* magic, const ImageU8& img) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << magic << "\n" << img.w << " " << img.h << "\n255\n";
  out.write(reinterpret_cast<const char*>(img.data.data()),
            static_cast<std::streamsize>(img.data.size()));
  if (!out) throw IoError("write failed: " + path);
}

}  // namespace

void write_ppm(const std::string& path, const ImageU8& img) {
  if (img.c != 3) throw ParameterError("write_ppm: expected 3 channels");
  write_netpbm(path, "P6", img);
}

void write_pgm(const std::string& path, const ImageU8& img) {
  if (img.c != 1) throw ParameterError("write_pgm: expected 1 channel");
  write_netpbm(path, "P5", img);
}

void write_pgm16(const std::string& path, const std::vector<uint16_t>& data, int h, int w) {
  if (static_cast<long long>(data.size()) != static_cast<long long>(h) * w)
    throw ParameterError("write_pgm16: size mismatch");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << "P5\n" << w << " " << h << "\n65535\n";
  for (uint16_t v : data) {
    out.put(static_cast<char>(v >> 8));  // most significant byte first
    out.put(static_cast<char>(v & 0xff));
  }
  if (!out) throw IoError("write failed: " + path);
}

ImageU8 read_ppm(const std::string& path) { return read_netpbm(path, "P6", 3); }
ImageU8 read_pgm(const std::string& path) { return read_netpbm(path, "P5", 1); }

void write_mask_pgm(const std::string& path, const MaskU8& mask) {
  ImageU8 img(mask.h, mask.w, 1);
  for (size_t i = 0; i < mask.data.size(); ++i) img.data[i] = mask.data[i] ? 255 : 0;
  write_pgm(path, img);
}

MaskU8 read_mask_pgm(const std::string& path) {
  ImageU8 img = read_pgm(path);
  MaskU8 mask(img.h, img.w);
  for (size_t i = 0; i < img.data.size(); ++i) mask.data[i] = img.data[i] ? 1 : 0;
  return mask;
}

Tensor image_to_float(const ImageU8& img) {
  Tensor t({img.h, img.w, img.c});
  for (size_t i = 0; i < img.data.size(); ++i)
    t[static_cast<long long>(i)] = static_cast<float>(img.data[i]) / 255.0f;
  return t;
}

Tensor mask_to_float(const MaskU8& mask) {
  Tensor t({mask.h, mask.w});
  for (size_t i = 0; i < mask.data.size(); ++i)
    t[static_cast<long long>(i)] = mask.data[i] ? 1.0f : 0.0f;
  return t;
}

}  // namespace sofs
