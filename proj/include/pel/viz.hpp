#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "pel/image.hpp"
#include "pel/network.hpp"

namespace pel {

enum class StreamKind { rgb, freq };
enum class HeatKind { cam_rgb, cam_freq, self_residual, mutual_residual };
enum class ModuleKind { self, mutual };

std::string to_string(HeatKind kind);

/// Non-negative map min-max normalised to [0, 1]; a constant map becomes
/// all zeros. `raw_mean` keeps the mean before normalisation.
struct HeatMap {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<double> values;
  HeatKind kind = HeatKind::cam_rgb;
  std::size_t block = 0;  // 1-based source block
  double raw_mean = 0.0;

  bool empty() const { return values.empty(); }
};

HeatMap make_heatmap(std::vector<double> raw, std::size_t width, std::size_t height, HeatKind kind, std::size_t block);

/// Nearest-neighbour resize.
HeatMap upsample_nearest(const HeatMap& map, std::size_t width, std::size_t height);

/// Grad-CAM for the fake logit on one stream's features after `block`
/// (1-based), rectified, normalised and upsampled to the input resolution.
HeatMap grad_cam(const PelNetwork& net, const RgbImage& img, StreamKind stream, std::size_t block);

/// Channel mean of |f_out - f_in| across the requested module at `block`,
/// per stream (rgb first). A disabled stream yields an empty map.
std::pair<HeatMap, HeatMap> enhancement_residual(const PelNetwork& net, const RgbImage& img, std::size_t block,
                                                 ModuleKind module);

void write_heatmap_pgm(const std::filesystem::path& path, const HeatMap& map);

/// 60% heat colour over 40% input; the map is resized to the image first.
RgbImage heatmap_overlay(const RgbImage& img, const HeatMap& map);

}  // namespace pel
