#include "sofs/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "sofs/errors.hpp"
#include "sofs/tensor_io.hpp"

namespace sofs {

namespace {

void put_u32(std::ostream& out, uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16),
                        static_cast<unsigned char>(v >> 24)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

void put_u64(std::ostream& out, uint64_t v) {
  put_u32(out, static_cast<uint32_t>(v));
  put_u32(out, static_cast<uint32_t>(v >> 32));
}

uint32_t get_u32(std::istream& in, const std::string& path) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (!in) throw FormatError("checkpoint truncated: " + path);
  return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
         (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
}

uint64_t get_u64(std::istream& in, const std::string& path) {
  const uint64_t lo = get_u32(in, path);
  const uint64_t hi = get_u32(in, path);
  return lo | (hi << 32);
}

}  // namespace

const Tensor& Checkpoint::tensor(const std::string& name) const {
  for (const auto& [n, t] : tensors)
    if (n == name) return t;
  throw FormatError("checkpoint: missing tensor " + name);
}

bool Checkpoint::has(const std::string& name) const {
  for (const auto& [n, t] : tensors)
    if (n == name) return true;
  return false;
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path);
  out.write("SOFS", 4);
  put_u32(out, kCheckpointVersion);
  put_u64(out, ckpt.step);
  put_u32(out, static_cast<uint32_t>(ckpt.config_text.size()));
  out.write(ckpt.config_text.data(), static_cast<std::streamsize>(ckpt.config_text.size()));
  put_u32(out, static_cast<uint32_t>(ckpt.tensors.size()));
  for (const auto& [name, tensor] : ckpt.tensors) {
    put_u32(out, static_cast<uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_tensor(out, tensor);
  }
  if (!out) throw IoError("write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open: " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, "SOFS", 4) != 0)
    throw FormatError("checkpoint: bad magic (expected SOFS): " + path);
  const uint32_t version = get_u32(in, path);
  if (version != kCheckpointVersion)
    throw FormatError("checkpoint: unsupported version " + std::to_string(version) + ": " + path);
  Checkpoint ckpt;
  ckpt.step = get_u64(in, path);
  const uint32_t config_len = get_u32(in, path);
  ckpt.config_text.resize(config_len);
  in.read(ckpt.config_text.data(), config_len);
  if (!in) throw FormatError("checkpoint truncated in config: " + path);
  const uint32_t count = get_u32(in, path);
  for (uint32_t i = 0; i < count; ++i) {
    const uint32_t name_len = get_u32(in, path);
    if (name_len > 4096) throw FormatError("checkpoint: implausible tensor name length: " + path);
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    if (!in) throw FormatError("checkpoint truncated in tensor name: " + path);
    Tensor t = read_tensor(in);
    ckpt.tensors.emplace_back(std::move(name), std::move(t));
  }
  return ckpt;
}

}  // namespace sofs
