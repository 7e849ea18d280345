#pragma once

#include <array>
#include <cstdint>

namespace sofs {

// Counter-based generator (Philox4x32-10). Every sampled stream in the
// project is a (seed, stream) pair, so identical seeds reproduce identical
// draw sequences regardless of process history. Known-answer vectors from
// the reference implementation are pinned in the test suite.
class Philox {
 public:
  explicit Philox(uint64_t seed, uint64_t stream = 0)
      : key_{static_cast<uint32_t>(seed), static_cast<uint32_t>(seed >> 32)},
        stream_(stream),
        pos_(0),
        buf_pos_(4) {}

  // Raw 10-round block function, exposed for known-answer tests.
  static std::array<uint32_t, 4> block(std::array<uint32_t, 4> ctr,
                                       std::array<uint32_t, 2> key);

  uint32_t next_u32() {
    if (buf_pos_ == 4) refill();
    return buf_[buf_pos_++];
  }

  uint64_t next_u64() {
    uint64_t lo = next_u32();
    uint64_t hi = next_u32();
    return lo | (hi << 32);
  }

  // [0,1) with 53 random bits.
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // [0,1) with 24 random bits (exact in binary32).
  float next_float() { return static_cast<float>(next_u32() >> 8) * 0x1.0p-24f; }

  // [0,n). Multiply-shift; bias is < n / 2^64 and irrelevant here.
  uint64_t next_below(uint64_t n) {
    return static_cast<uint64_t>(
        (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
  }

  // Inclusive integer range.
  int uniform_int(int a, int b) {
    return a + static_cast<int>(next_below(static_cast<uint64_t>(b - a + 1)));
  }

  float uniform(float a, float b) { return a + (b - a) * next_float(); }
  double uniform(double a, double b) { return a + (b - a) * next_double(); }

  bool bernoulli(double p) { return next_double() < p; }

  // Independent child stream; mixing makes nested splits collision-safe in
  // practice (64-bit stream space).
  Philox split(uint64_t child) const {
    return Philox(seed_value(), mix64(stream_ ^ mix64(child + 0x9E3779B97F4A7C15ull)));
  }

  uint64_t seed_value() const {
    return static_cast<uint64_t>(key_[0]) | (static_cast<uint64_t>(key_[1]) << 32);
  }
  uint64_t stream_value() const { return stream_; }

 private:
  static uint64_t mix64(uint64_t x) {
    // splitmix64 finalizer
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
  }

  void refill() {
    std::array<uint32_t, 4> ctr = {static_cast<uint32_t>(pos_),
                                   static_cast<uint32_t>(pos_ >> 32),
                                   static_cast<uint32_t>(stream_),
                                   static_cast<uint32_t>(stream_ >> 32)};
    buf_ = block(ctr, key_);
    ++pos_;
    buf_pos_ = 0;
  }

  std::array<uint32_t, 2> key_;
  uint64_t stream_;
  uint64_t pos_;
  std::array<uint32_t, 4> buf_{};
  int buf_pos_;
};

}  // namespace sofs
