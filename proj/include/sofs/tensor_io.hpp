#pragma once

#include <iosfwd>
#include <string>

#include "sofs/tensor.hpp"

namespace sofs {

// Binary tensor container. Layout, all little-endian:
//   magic "TNSR" | version u32 | dtype u8 (0 = binary32) | ndim u8 |
//   dims u32 each | payload (raw binary32)
// Round-trips are bit-exact.

inline constexpr uint32_t kTensorFormatVersion = 1;

void write_tensor(std::ostream& out, const Tensor& t);
Tensor read_tensor(std::istream& in);

void save_tensor(const std::string& path, const Tensor& t);
Tensor load_tensor(const std::string& path);

}  // namespace sofs
