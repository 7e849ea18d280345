#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "sofs/tensor.hpp"

namespace sofs {

// Model snapshot: magic "SOFS", format version, config text, step counter
// and named tensors (head parameters plus the frozen encoder weights).
// save/load round-trips are bitwise identical.
struct Checkpoint {
  std::string config_text;
  uint64_t step = 0;
  std::vector<std::pair<std::string, Tensor>> tensors;

  const Tensor& tensor(const std::string& name) const;
  bool has(const std::string& name) const;
};

inline constexpr uint32_t kCheckpointVersion = 1;

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace sofs
