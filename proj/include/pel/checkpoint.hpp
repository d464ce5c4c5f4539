#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "pel/network.hpp"

namespace pel {

// Binary layout, all integers and reals little-endian:
//   "PELCKPT1"                     8-byte magic
//   u32 version (= 1)
//   u32 length, bytes              config text (NetworkConfig::to_text)
//   u64 count, records             parameters in registry order
//   u64 count, records             buffers: frequency statistics
//   u8  has_training_state
//   [u64 epoch, u64 adam steps, per parameter: f64 first moments, f64 second moments]
// record = u32 name length, name bytes, u64 n, c, h, w, f64 values

inline constexpr char kCheckpointMagic[8] = {'P', 'E', 'L', 'C', 'K', 'P', 'T', '1'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct TrainingState {
  std::uint64_t epoch = 0;
  std::uint64_t steps = 0;
  std::vector<std::vector<double>> first_moments;
  std::vector<std::vector<double>> second_moments;
};

void save_checkpoint(const PelNetwork& net, const std::filesystem::path& path, const TrainingState* state = nullptr);

/// Rebuilds the network from the stored config and restores every
/// parameter. Fills `state` when the file carries a training section.
PelNetwork load_checkpoint(const std::filesystem::path& path, std::optional<TrainingState>* state = nullptr);

/// Loads parameters and statistics into an existing network. The stored
/// parameter names and dims must match the network's registry exactly.
void load_parameters(PelNetwork& net, const std::filesystem::path& path);

}  // namespace pel
