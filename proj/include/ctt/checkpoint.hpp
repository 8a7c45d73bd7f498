#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "ctt/memory_bank.hpp"
#include "ctt/tensor.hpp"

namespace ctt {

inline constexpr const char* kCheckpointFormat = "ctt-checkpoint-v1";

/// Full training state: resolved config text, iteration counter, rng stream
/// states, every named parameter/momentum tensor, and bank snapshots.
struct Checkpoint {
    std::string format = kCheckpointFormat;
    long long iteration = 0;
    std::string config_text;
    std::vector<std::pair<std::string, std::string>> rng_states;
    std::vector<std::pair<std::string, Tensor>> tensors;
    std::vector<MemoryBank> banks;
};

/// Single binary archive: magic line, JSON manifest (format, iteration,
/// config, rng states), named tensors with shape and little-endian f32
/// payloads, per-class bank snapshots (entry count, then f32 vectors), and
/// a trailing FNV-1a checksum. Tensor and bank values are rounded to f32.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ck);

/// Throws DataError on a missing file, bad magic, truncation, or checksum
/// mismatch; messages carry manifest details when those are still readable.
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace ctt
