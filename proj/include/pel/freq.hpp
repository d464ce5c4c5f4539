#pragma once

#include <array>
#include <cstddef>
#include <vector>

#include "pel/image.hpp"
#include "pel/tensor.hpp"

namespace pel {

/// Full-range BT.601 (JPEG) YCbCr planes stored as reals in [0, 255].
struct YcbcrImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<double> y, cb, cr;

  const std::vector<double>& plane(std::size_t ch) const { return ch == 0 ? y : (ch == 1 ? cb : cr); }
  std::vector<double>& plane(std::size_t ch) { return ch == 0 ? y : (ch == 1 ? cb : cr); }
};

YcbcrImage rgb_to_ycbcr(const RgbImage& img);
/// Inverse conversion with rounding and clamping to 8 bits.
RgbImage ycbcr_to_rgb(const YcbcrImage& img);

using Block8 = std::array<double, 64>;  // row-major [row * 8 + col]

/// Orthonormal 2-D DCT-II of an 8x8 block; coefficient (u, v) = row u
/// (vertical frequency), column v (horizontal frequency).
Block8 dct8x8(const Block8& patch);
Block8 idct8x8(const Block8& coeffs);

/// JPEG zigzag scan: kZigzag[k] is the row-major position of the k-th
/// coefficient in low-to-high frequency order.
extern const std::array<std::size_t, 64> kZigzag;

constexpr std::size_t kWindow = 8;
constexpr std::size_t kWindowPad = 3;
constexpr std::size_t kFlatChannels = 192;
constexpr std::size_t kReducedChannels = 64;

/// Colour plane and frequency band carried by one flat channel.
struct Band {
  std::size_t color;    // 0 = Y, 1 = Cb, 2 = Cr
  std::size_t zigzag;   // index in zigzag order
  std::size_t u, v;     // row / column frequency
};

/// Flat channel k -> band. Colour-major, zigzag-minor.
Band band_of(std::size_t channel);
std::size_t channel_of(std::size_t color, std::size_t zigzag);

/// Grid extent of the sliding window along an axis of `extent` pixels.
std::size_t window_steps(std::size_t extent, std::size_t stride);

/// Per-window DCT spectra regrouped so that every channel holds one
/// (colour, frequency) band laid out on the window grid.
struct FreqInput {
  Tensor flat;             // (1, 192, H2, W2)
  std::size_t stride = 2;

  std::size_t grid_h() const { return flat.dims().h; }
  std::size_t grid_w() const { return flat.dims().w; }
};

/// Replicate-pads each YCbCr plane by 3 pixels, slides an 8x8 window with
/// the given stride, and writes coefficient zigzag(z) of colour c at window
/// (i, j) to flat channel c*64 + z.
FreqInput decompose(const RgbImage& img, std::size_t stride = 2);

/// Writes decompose() output for one image into sample slot `n` of a
/// batched (N, 192, H2, W2) buffer.
void decompose_into(const RgbImage& img, std::size_t stride, std::span<double> dst);

/// The replicate-padded plane the sliding windows read from.
std::vector<double> padded_plane(const YcbcrImage& img, std::size_t ch);

/// Learned 192 -> 64 band reduction (a pointwise convolution).
Tensor reduce_bands(Graph& g, const Tensor& flat, const Tensor& weight, const Tensor& bias);

}  // namespace pel
