#include "sofs/tensor_io.hpp"

#include <cstring>
#include <fstream>

#include "sofs/errors.hpp"

namespace sofs {

namespace {

void put_u32(std::ostream& out, uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16),
                        static_cast<unsigned char>(v >> 24)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

uint32_t get_u32(std::istream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (!in) throw FormatError("tensor file truncated while reading a u32");
  return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
         (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
}

}  // namespace

void write_tensor(std::ostream& out, const Tensor& t) {
  out.write("TNSR", 4);
  put_u32(out, kTensorFormatVersion);
  out.put(0);  // dtype binary32
  out.put(static_cast<char>(t.ndim()));
  for (int i = 0; i < t.ndim(); ++i) put_u32(out, static_cast<uint32_t>(t.dim(i)));
  static_assert(sizeof(float) == 4);
  for (long long i = 0; i < t.size(); ++i) {
    uint32_t bits;
    std::memcpy(&bits, &t[i], 4);
    put_u32(out, bits);
  }
}

Tensor read_tensor(std::istream& in) {
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, "TNSR", 4) != 0)
    throw FormatError("tensor file: bad magic (expected TNSR)");
  const uint32_t version = get_u32(in);
  if (version != kTensorFormatVersion)
    throw FormatError("tensor file: unsupported version " + std::to_string(version));
  const int dtype = in.get();
  if (dtype != 0) throw FormatError("tensor file: unsupported dtype code " + std::to_string(dtype));
  const int ndim = in.get();
  if (ndim < 0 || in.eof()) throw FormatError("tensor file truncated in header");
  std::vector<int> shape(static_cast<size_t>(ndim));
  long long n = 1;
  for (int i = 0; i < ndim; ++i) {
    uint32_t d = get_u32(in);
    if (d == 0 || d > (1u << 30)) throw FormatError("tensor file: implausible dimension");
    shape[static_cast<size_t>(i)] = static_cast<int>(d);
    n *= d;
  }
  std::vector<float> data(static_cast<size_t>(n));
  for (long long i = 0; i < n; ++i) {
    uint32_t bits = get_u32(in);
    std::memcpy(&data[static_cast<size_t>(i)], &bits, 4);
  }
  return Tensor(std::move(shape), std::move(data));
}

void save_tensor(const std::string& path, const Tensor& t) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path);
  write_tensor(out, t);
  if (!out) throw IoError("write failed: " + path);
}

Tensor load_tensor(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open: " + path);
  return read_tensor(in);
}

}  // namespace sofs
