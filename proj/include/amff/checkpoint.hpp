#pragma once

// Versioned binary checkpoint: config echo, model and optimiser tensors as
// little-endian f64, label scaling, RNG state and the epoch history.

#include <cstdint>
#include <filesystem>
#include <vector>

#include "amff/trainer.hpp"

namespace amff {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
    TrainConfig config;
    TrainState state;
};

std::vector<std::uint8_t> encode_checkpoint(const TrainConfig& config, const TrainState& state);
Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes);

void save_checkpoint(const std::filesystem::path& path, const TrainConfig& config, const TrainState& state);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace amff
