#pragma once

#include <map>
#include <string>
#include <vector>

#include "icprl/tensor.hpp"

namespace icprl::nn {

// Flat binary parameter container: little-endian doubles keyed by parameter
// path, with a header carrying the format version and the hash of the model
// configuration that produced the weights. Loaders reject unknown versions
// and truncated or malformed files.

inline constexpr uint32_t kCheckpointVersion = 1;

struct CheckpointEntry {
  std::vector<long> shape;
  std::vector<double> data;
};

struct Checkpoint {
  uint32_t version = kCheckpointVersion;
  uint64_t config_hash = 0;
  std::map<std::string, CheckpointEntry> entries;
};

void save_checkpoint(const std::string& path, uint64_t config_hash,
                     const std::vector<Tensor>& params);
Checkpoint load_checkpoint(const std::string& path);

// Copies loaded weights into matching parameters; throws if any name or
// shape disagrees or a parameter is missing from the file.
void restore_params(const Checkpoint& ck, std::vector<Tensor>& params);

}  // namespace icprl::nn
