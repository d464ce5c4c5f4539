#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace pel {

/// 8-bit RGB image, row-major, interleaved R,G,B.
struct RgbImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> pixels;

  RgbImage() = default;
  RgbImage(std::size_t w, std::size_t h, std::uint8_t fill = 0) : width(w), height(h), pixels(w * h * 3, fill) {}

  std::uint8_t& at(std::size_t y, std::size_t x, std::size_t ch) { return pixels[(y * width + x) * 3 + ch]; }
  std::uint8_t at(std::size_t y, std::size_t x, std::size_t ch) const { return pixels[(y * width + x) * 3 + ch]; }

  friend bool operator==(const RgbImage&, const RgbImage&) = default;
};

/// Single-channel 8-bit image.
struct GrayImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> pixels;

  friend bool operator==(const GrayImage&, const GrayImage&) = default;
};

// Binary Netpbm I/O (P6 / P5, maxval 255). Failures raise InputError.
RgbImage read_ppm(const std::filesystem::path& path);
void write_ppm(const std::filesystem::path& path, const RgbImage& img);
GrayImage read_pgm(const std::filesystem::path& path);
void write_pgm(const std::filesystem::path& path, const GrayImage& img);

/// Maps `values` linearly so min -> 0 and max -> 255. A constant map is
/// written as all zeros.
GrayImage to_gray_minmax(std::span<const double> values, std::size_t width, std::size_t height);

}  // namespace pel
