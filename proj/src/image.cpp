#include "pel/image.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fmt/format.h>
#include <fstream>
#include <string>

#include "pel/errors.hpp"

namespace pel {
namespace {

// Reads the next whitespace-delimited header token, skipping '#' comments.
std::string next_token(std::istream& in, const std::filesystem::path& path) {
  std::string token;
  int ch = in.get();
  while (ch != EOF) {
    if (ch == '#') {
      while (ch != EOF && ch != '\n') ch = in.get();
    } else if (std::isspace(ch)) {
      if (!token.empty()) break;
    } else {
      token.push_back(static_cast<char>(ch));
    }
    ch = in.get();
  }
  if (token.empty()) throw InputError("truncated netpbm header in " + path.string());
  return token;
}

std::size_t parse_count(const std::string& token, const std::filesystem::path& path) {
  std::size_t value = 0;
  try {
    std::size_t used = 0;
    value = std::stoul(token, &used);
    if (used != token.size()) throw std::invalid_argument(token);
  } catch (const std::exception&) {
    throw InputError(fmt::format("bad netpbm header field '{}' in {}", token, path.string()));
  }
  return value;
}

std::vector<std::uint8_t> read_netpbm(const std::filesystem::path& path, const char* magic, std::size_t channels,
                                      std::size_t& width, std::size_t& height) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path.string());
  if (next_token(in, path) != magic) throw InputError(fmt::format("{} is not a binary {} file", path.string(), magic));
  width = parse_count(next_token(in, path), path);
  height = parse_count(next_token(in, path), path);
  const std::size_t maxval = parse_count(next_token(in, path), path);
  if (maxval != 255) throw InputError(fmt::format("{}: only maxval 255 is supported, got {}", path.string(), maxval));
  if (width == 0 || height == 0) throw InputError(path.string() + ": empty image");
  std::vector<std::uint8_t> data(width * height * channels);
  in.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(data.size()));
  if (static_cast<std::size_t>(in.gcount()) != data.size()) throw InputError("truncated pixel data in " + path.string());
  return data;
}

void write_netpbm(const std::filesystem::path& path, const char* magic, std::size_t width, std::size_t height,
                  const std::vector<std::uint8_t>& data) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path.string());
  out << magic << '\n' << width << ' ' << height << "\n255\n";
  out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
  if (!out) throw InputError("write failed for " + path.string());
}

}  // namespace

RgbImage read_ppm(const std::filesystem::path& path) {
  RgbImage img;
  img.pixels = read_netpbm(path, "P6", 3, img.width, img.height);
  return img;
}

void write_ppm(const std::filesystem::path& path, const RgbImage& img) {
  write_netpbm(path, "P6", img.width, img.height, img.pixels);
}

GrayImage read_pgm(const std::filesystem::path& path) {
  GrayImage img;
  img.pixels = read_netpbm(path, "P5", 1, img.width, img.height);
  return img;
}

void write_pgm(const std::filesystem::path& path, const GrayImage& img) {
  write_netpbm(path, "P5", img.width, img.height, img.pixels);
}

GrayImage to_gray_minmax(std::span<const double> values, std::size_t width, std::size_t height) {
  GrayImage img{width, height, std::vector<std::uint8_t>(width * height, 0)};
  if (values.size() != width * height) throw InputError("to_gray_minmax: size mismatch");
  if (values.empty()) return img;
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  const double range = *hi - *lo;
  if (!(range > 0.0)) return img;
  for (std::size_t i = 0; i < values.size(); ++i) {
    img.pixels[i] = static_cast<std::uint8_t>(std::lround((values[i] - *lo) / range * 255.0));
  }
  return img;
}

}  // namespace pel
