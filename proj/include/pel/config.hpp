#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "pel/enhance.hpp"

namespace pel {

/// Everything needed to rebuild and train a network. Serialized as flat
/// `key = value` text; see to_text() for the key set.
struct NetworkConfig {
  // architecture
  std::size_t num_blocks = 4;
  std::vector<std::size_t> widths{16, 32, 64, 64};
  std::size_t input_size = 64;
  std::size_t window_stride = 2;
  std::size_t rgb_first_stride = 2;
  std::size_t freq_first_stride = 1;
  FilterKind filter_kind = FilterKind::median;
  std::vector<std::size_t> filter_kernels{3};
  std::size_t reduction_ratio = 16;

  // ablation switches
  bool use_rgb = true;
  bool use_freq = true;
  bool use_self = true;
  bool use_mutual = true;
  bool use_noise = true;  // noise blocks inside self-enhancement

  // optimisation
  double learning_rate = 2e-4;
  double weight_decay = 1e-5;
  std::size_t batch_size = 16;
  std::size_t epochs = 20;
  std::uint64_t seed = 1;

  // synthetic dataset
  std::size_t train_samples = 800;
  std::size_t val_samples = 100;
  std::size_t test_samples = 100;

  /// Throws ConfigError when the combination is unusable, including
  /// misaligned stream resolutions at a mutual-enhancement site.
  void validate() const;

  std::string to_text() const;
  static NetworkConfig parse(std::string_view text);
  static NetworkConfig load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  friend bool operator==(const NetworkConfig&, const NetworkConfig&) = default;
};

/// Spatial extent of each stream after block b (index 0 = block 1).
std::vector<std::size_t> rgb_extents(const NetworkConfig& cfg);
std::vector<std::size_t> freq_extents(const NetworkConfig& cfg);

}  // namespace pel
