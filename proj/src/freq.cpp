#include "pel/freq.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>
#include <numbers>

#include "pel/errors.hpp"
#include "pel/ops.hpp"

namespace pel {
namespace {

struct DctBasis {
  // basis[u][x] = alpha(u) * cos((2x + 1) u pi / 16)
  std::array<std::array<double, 8>, 8> c{};
  DctBasis() {
    for (std::size_t u = 0; u < 8; ++u) {
      const double alpha = u == 0 ? std::sqrt(1.0 / 8.0) : 0.5;
      for (std::size_t x = 0; x < 8; ++x) {
        c[u][x] = alpha * std::cos(static_cast<double>((2 * x + 1) * u) * std::numbers::pi / 16.0);
      }
    }
  }
};

const DctBasis& basis() {
  static const DctBasis b;
  return b;
}

std::uint8_t to_byte(double v) { return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L)); }

}  // namespace

const std::array<std::size_t, 64> kZigzag = {
    0,  1,  8,  16, 9,  2,  3,  10, 17, 24, 32, 25, 18, 11, 4,  5,  12, 19, 26, 33, 40, 48,
    41, 34, 27, 20, 13, 6,  7,  14, 21, 28, 35, 42, 49, 56, 57, 50, 43, 36, 29, 22, 15, 23,
    30, 37, 44, 51, 58, 59, 52, 45, 38, 31, 39, 46, 53, 60, 61, 54, 47, 55, 62, 63};

YcbcrImage rgb_to_ycbcr(const RgbImage& img) {
  YcbcrImage out;
  out.width = img.width;
  out.height = img.height;
  const std::size_t count = img.width * img.height;
  out.y.resize(count);
  out.cb.resize(count);
  out.cr.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    const double r = img.pixels[i * 3];
    const double g = img.pixels[i * 3 + 1];
    const double b = img.pixels[i * 3 + 2];
    out.y[i] = 0.299 * r + 0.587 * g + 0.114 * b;
    out.cb[i] = 128.0 - 0.168736 * r - 0.331264 * g + 0.5 * b;
    out.cr[i] = 128.0 + 0.5 * r - 0.418688 * g - 0.081312 * b;
  }
  return out;
}

RgbImage ycbcr_to_rgb(const YcbcrImage& img) {
  RgbImage out(img.width, img.height);
  for (std::size_t i = 0; i < img.width * img.height; ++i) {
    const double y = img.y[i];
    const double cb = img.cb[i] - 128.0;
    const double cr = img.cr[i] - 128.0;
    out.pixels[i * 3] = to_byte(y + 1.402 * cr);
    out.pixels[i * 3 + 1] = to_byte(y - 0.344136 * cb - 0.714136 * cr);
    out.pixels[i * 3 + 2] = to_byte(y + 1.772 * cb);
  }
  return out;
}

Block8 dct8x8(const Block8& patch) {
  const auto& c = basis().c;
  // AC terms ignore a constant offset, so shifting by the first pixel makes
  // them exactly zero on flat patches. DC is the plain sum over 8.
  const double offset = patch[0];
  double total = 0.0;
  for (double v : patch) total += v;
  Block8 tmp{};
  // rows: tmp[x][v] = sum_y patch[x][y] c[v][y]
  for (std::size_t x = 0; x < 8; ++x) {
    for (std::size_t v = 0; v < 8; ++v) {
      double s = 0.0;
      for (std::size_t y = 0; y < 8; ++y) s += (patch[x * 8 + y] - offset) * c[v][y];
      tmp[x * 8 + v] = s;
    }
  }
  Block8 out{};
  for (std::size_t u = 0; u < 8; ++u) {
    for (std::size_t v = 0; v < 8; ++v) {
      double s = 0.0;
      for (std::size_t x = 0; x < 8; ++x) s += c[u][x] * tmp[x * 8 + v];
      out[u * 8 + v] = s;
    }
  }
  out[0] = total / 8.0;
  return out;
}

Block8 idct8x8(const Block8& coeffs) {
  const auto& c = basis().c;
  Block8 tmp{};
  for (std::size_t u = 0; u < 8; ++u) {
    for (std::size_t y = 0; y < 8; ++y) {
      double s = 0.0;
      for (std::size_t v = 0; v < 8; ++v) s += coeffs[u * 8 + v] * c[v][y];
      tmp[u * 8 + y] = s;
    }
  }
  Block8 out{};
  for (std::size_t x = 0; x < 8; ++x) {
    for (std::size_t y = 0; y < 8; ++y) {
      double s = 0.0;
      for (std::size_t u = 0; u < 8; ++u) s += c[u][x] * tmp[u * 8 + y];
      out[x * 8 + y] = s;
    }
  }
  return out;
}

Band band_of(std::size_t channel) {
  if (channel >= kFlatChannels) throw InputError(fmt::format("band channel {} out of range", channel));
  const std::size_t z = channel % 64;
  return Band{channel / 64, z, kZigzag[z] / 8, kZigzag[z] % 8};
}

std::size_t channel_of(std::size_t color, std::size_t zigzag) {
  if (color >= 3 || zigzag >= 64) throw InputError(fmt::format("no band for colour {} zigzag {}", color, zigzag));
  return color * 64 + zigzag;
}

std::size_t window_steps(std::size_t extent, std::size_t stride) {
  if (stride == 0) throw InputError("sliding-window stride must be positive");
  const std::size_t padded = extent + 2 * kWindowPad;
  if (padded < kWindow) {
    throw InputError(fmt::format("extent {} is smaller than one {}x{} window after padding", extent, kWindow, kWindow));
  }
  return (padded - kWindow) / stride + 1;
}

std::vector<double> padded_plane(const YcbcrImage& img, std::size_t ch) {
  const std::size_t pw = img.width + 2 * kWindowPad;
  const std::size_t ph = img.height + 2 * kWindowPad;
  const auto& src = img.plane(ch);
  std::vector<double> out(pw * ph);
  for (std::size_t y = 0; y < ph; ++y) {
    const std::size_t sy = std::clamp<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(y) - kWindowPad, 0,
                                                      static_cast<std::ptrdiff_t>(img.height) - 1);
    for (std::size_t x = 0; x < pw; ++x) {
      const std::size_t sx = std::clamp<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(x) - kWindowPad, 0,
                                                        static_cast<std::ptrdiff_t>(img.width) - 1);
      out[y * pw + x] = src[sy * img.width + sx];
    }
  }
  return out;
}

void decompose_into(const RgbImage& img, std::size_t stride, std::span<double> dst) {
  if (img.width == 0 || img.height == 0) throw InputError("decompose: empty image");
  const std::size_t gh = window_steps(img.height, stride);
  const std::size_t gw = window_steps(img.width, stride);
  const std::size_t grid = gh * gw;
  if (dst.size() != kFlatChannels * grid) throw ShapeError("decompose_into: destination size mismatch");
  const YcbcrImage ycc = rgb_to_ycbcr(img);
  const std::size_t pw = img.width + 2 * kWindowPad;
  Block8 patch{};
  for (std::size_t ch = 0; ch < 3; ++ch) {
    const std::vector<double> plane = padded_plane(ycc, ch);
    for (std::size_t i = 0; i < gh; ++i) {
      for (std::size_t j = 0; j < gw; ++j) {
        for (std::size_t r = 0; r < 8; ++r) {
          std::copy_n(plane.data() + (i * stride + r) * pw + j * stride, 8, patch.data() + r * 8);
        }
        const Block8 coeffs = dct8x8(patch);
        for (std::size_t z = 0; z < 64; ++z) {
          dst[(ch * 64 + z) * grid + i * gw + j] = coeffs[kZigzag[z]];
        }
      }
    }
  }
}

FreqInput decompose(const RgbImage& img, std::size_t stride) {
  const std::size_t gh = window_steps(img.height, stride);
  const std::size_t gw = window_steps(img.width, stride);
  FreqInput out;
  out.stride = stride;
  out.flat = Tensor(Dims{1, kFlatChannels, gh, gw});
  decompose_into(img, stride, out.flat.data());
  return out;
}

Tensor reduce_bands(Graph& g, const Tensor& flat, const Tensor& weight, const Tensor& bias) {
  if (flat.dims().c != kFlatChannels) {
    throw ShapeError(fmt::format("reduce_bands: expected {} flat channels, got {}", kFlatChannels, flat.dims().c));
  }
  if (weight.dims() != Dims{kReducedChannels, kFlatChannels, 1, 1}) {
    throw ShapeError("reduce_bands: weight must be (64, 192, 1, 1), got " + to_string(weight.dims()));
  }
  return conv_pointwise(g, flat, weight, bias);
}

}  // namespace pel
