#include "pel/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>
#include <fstream>
#include <numbers>
#include <random>

#include "pel/errors.hpp"
#include "pel/freq.hpp"

namespace pel {
namespace {

constexpr std::array<int, 64> kLumaTable = {
    16, 11, 10, 16, 24,  40,  51,  61,  12, 12, 14, 19, 26,  58,  60,  55,
    14, 13, 16, 24, 40,  57,  69,  56,  14, 17, 22, 29, 51,  87,  80,  62,
    18, 22, 37, 56, 68,  109, 103, 77,  24, 35, 55, 64, 81,  104, 113, 92,
    49, 64, 78, 87, 103, 121, 120, 101, 72, 92, 95, 98, 112, 100, 103, 99};

constexpr int kRealQuality = 75;
constexpr int kSpliceQuality = 50;
constexpr double kSpliceBlurSigma = 1.0;
constexpr double kFeatherPixels = 2.0;

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

// Bilinear value noise with smoothstep weights on a lattice of `cell` pixels.
std::vector<double> value_noise(std::mt19937_64& rng, std::size_t size, std::size_t cell) {
  const std::size_t lattice = size / cell + 2;
  std::vector<double> grid(lattice * lattice);
  for (double& v : grid) v = uniform(rng, -1.0, 1.0);
  std::vector<double> out(size * size);
  auto smooth = [](double t) { return t * t * (3.0 - 2.0 * t); };
  for (std::size_t y = 0; y < size; ++y) {
    const double gy = static_cast<double>(y) / static_cast<double>(cell);
    const auto y0 = static_cast<std::size_t>(gy);
    const double ty = smooth(gy - static_cast<double>(y0));
    for (std::size_t x = 0; x < size; ++x) {
      const double gx = static_cast<double>(x) / static_cast<double>(cell);
      const auto x0 = static_cast<std::size_t>(gx);
      const double tx = smooth(gx - static_cast<double>(x0));
      const double a = grid[y0 * lattice + x0];
      const double b = grid[y0 * lattice + x0 + 1];
      const double c = grid[(y0 + 1) * lattice + x0];
      const double d = grid[(y0 + 1) * lattice + x0 + 1];
      out[y * size + x] = (a * (1 - tx) + b * tx) * (1 - ty) + (c * (1 - tx) + d * tx) * ty;
    }
  }
  return out;
}

std::uint8_t to_byte(double v) { return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L)); }

std::vector<double> gaussian_kernel(double sigma, std::size_t kernel) {
  std::vector<double> k(kernel);
  const double r = static_cast<double>(kernel / 2);
  double total = 0.0;
  for (std::size_t i = 0; i < kernel; ++i) {
    const double d = static_cast<double>(i) - r;
    k[i] = std::exp(-d * d / (2.0 * sigma * sigma));
    total += k[i];
  }
  for (double& v : k) v /= total;
  return k;
}

}  // namespace

std::array<int, 64> quant_table(int quality) {
  if (quality < 1 || quality > 100) throw ConfigError(fmt::format("JPEG quality must be in 1..100, got {}", quality));
  const int scale = quality < 50 ? 5000 / quality : 200 - 2 * quality;
  std::array<int, 64> out{};
  for (std::size_t i = 0; i < 64; ++i) out[i] = std::clamp((kLumaTable[i] * scale + 50) / 100, 1, 255);
  return out;
}

RgbImage jpeg_degrade(const RgbImage& img, int quality) {
  const auto table = quant_table(quality);
  YcbcrImage ycc = rgb_to_ycbcr(img);
  Block8 patch{};
  for (std::size_t by = 0; by < img.height; by += 8) {
    for (std::size_t bx = 0; bx < img.width; bx += 8) {
      const std::size_t h = std::min<std::size_t>(8, img.height - by);
      const std::size_t w = std::min<std::size_t>(8, img.width - bx);
      // Partial edge blocks are replicate-extended, as JPEG encoders do.
      for (std::size_t r = 0; r < 8; ++r) {
        for (std::size_t c = 0; c < 8; ++c) {
          patch[r * 8 + c] = ycc.y[(by + std::min(r, h - 1)) * img.width + bx + std::min(c, w - 1)] - 128.0;
        }
      }
      Block8 coeffs = dct8x8(patch);
      for (std::size_t i = 0; i < 64; ++i) coeffs[i] = std::round(coeffs[i] / table[i]) * table[i];
      const Block8 back = idct8x8(coeffs);
      for (std::size_t r = 0; r < h; ++r) {
        for (std::size_t c = 0; c < w; ++c) ycc.y[(by + r) * img.width + bx + c] = back[r * 8 + c] + 128.0;
      }
    }
  }
  return ycbcr_to_rgb(ycc);
}

RgbImage gaussian_blur(const RgbImage& img, double sigma, std::size_t kernel) {
  if (!(sigma > 0.0)) return img;
  if (kernel % 2 == 0) throw ConfigError("gaussian blur kernel must be odd");
  const auto k = gaussian_kernel(sigma, kernel);
  const auto r = static_cast<std::ptrdiff_t>(kernel / 2);
  const auto w = static_cast<std::ptrdiff_t>(img.width);
  const auto h = static_cast<std::ptrdiff_t>(img.height);
  std::vector<double> tmp(img.pixels.size());
  for (std::ptrdiff_t y = 0; y < h; ++y) {
    for (std::ptrdiff_t x = 0; x < w; ++x) {
      for (std::size_t ch = 0; ch < 3; ++ch) {
        double s = 0.0;
        for (std::ptrdiff_t i = -r; i <= r; ++i) {
          const std::ptrdiff_t sx = std::clamp<std::ptrdiff_t>(x + i, 0, w - 1);
          s += k[static_cast<std::size_t>(i + r)] * img.pixels[static_cast<std::size_t>((y * w + sx) * 3) + ch];
        }
        tmp[static_cast<std::size_t>((y * w + x) * 3) + ch] = s;
      }
    }
  }
  RgbImage out(img.width, img.height);
  for (std::ptrdiff_t y = 0; y < h; ++y) {
    for (std::ptrdiff_t x = 0; x < w; ++x) {
      for (std::size_t ch = 0; ch < 3; ++ch) {
        double s = 0.0;
        for (std::ptrdiff_t i = -r; i <= r; ++i) {
          const std::ptrdiff_t sy = std::clamp<std::ptrdiff_t>(y + i, 0, h - 1);
          s += k[static_cast<std::size_t>(i + r)] * tmp[static_cast<std::size_t>((sy * w + x) * 3) + ch];
        }
        out.pixels[static_cast<std::size_t>((y * w + x) * 3) + ch] = to_byte(s);
      }
    }
  }
  return out;
}

RgbImage texture(std::uint64_t seed, std::size_t size) {
  std::mt19937_64 rng(splitmix64(seed));
  const double base[3] = {uniform(rng, 90, 170), uniform(rng, 90, 170), uniform(rng, 90, 170)};
  const double gx = uniform(rng, -0.4, 0.4);
  const double gy = uniform(rng, -0.4, 0.4);
  // Luma texture: coarse shapes down to pixel-level grain.
  constexpr std::size_t cells[] = {32, 16, 8, 4, 2, 1};
  constexpr double amps[] = {28.0, 18.0, 12.0, 9.0, 7.0, 6.0};
  std::vector<double> luma(size * size, 0.0);
  for (std::size_t o = 0; o < std::size(cells); ++o) {
    const auto layer = value_noise(rng, size, cells[o]);
    for (std::size_t i = 0; i < luma.size(); ++i) luma[i] += amps[o] * layer[i];
  }
  std::array<std::vector<double>, 3> tint;
  for (auto& t : tint) t = value_noise(rng, size, 16);

  RgbImage img(size, size);
  const double centre = static_cast<double>(size) / 2.0;
  for (std::size_t y = 0; y < size; ++y) {
    for (std::size_t x = 0; x < size; ++x) {
      const double ramp = gx * (static_cast<double>(x) - centre) + gy * (static_cast<double>(y) - centre);
      for (std::size_t ch = 0; ch < 3; ++ch) {
        const std::size_t i = y * size + x;
        img.at(y, x, ch) = to_byte(base[ch] + ramp + luma[i] + 12.0 * tint[ch][i]);
      }
    }
  }
  return img;
}

ForgerySample gen_real(std::uint64_t seed, std::size_t size) {
  ForgerySample s;
  s.id = fmt::format("real_{:016x}", seed);
  s.image = jpeg_degrade(texture(seed, size), kRealQuality);
  s.label = 0;
  s.mask.assign(size * size, 0);
  s.seed = seed;
  return s;
}

Splice splice_fake(std::uint64_t seed, std::size_t size) {
  Splice out;
  out.base = gen_real(splitmix64(seed ^ 0xba5eULL), size).image;
  const RgbImage donor =
      jpeg_degrade(gaussian_blur(texture(splitmix64(seed ^ 0xd0d0ULL), size), kSpliceBlurSigma, 7), kSpliceQuality);

  std::mt19937_64 rng(splitmix64(seed ^ 0xe111ULL));
  const double s = static_cast<double>(size);
  const double a = uniform(rng, 0.14 * s, 0.31 * s);
  const double b = uniform(rng, 0.14 * s, 0.31 * s);
  const double reach = std::max(a, b) + kFeatherPixels;
  const double cx = uniform(rng, reach, s - reach);
  const double cy = uniform(rng, reach, s - reach);
  const double theta = uniform(rng, 0.0, std::numbers::pi);
  const double ct = std::cos(theta);
  const double st = std::sin(theta);

  ForgerySample& f = out.sample;
  f.id = fmt::format("fake_{:016x}", seed);
  f.label = 1;
  f.seed = seed;
  f.mask.assign(size * size, 0);
  f.image = out.base;
  out.alpha.assign(size * size, 0.0);
  for (std::size_t y = 0; y < size; ++y) {
    for (std::size_t x = 0; x < size; ++x) {
      const double dx = static_cast<double>(x) + 0.5 - cx;
      const double dy = static_cast<double>(y) + 0.5 - cy;
      const double u = (dx * ct + dy * st) / a;
      const double v = (-dx * st + dy * ct) / b;
      const double r = std::sqrt(u * u + v * v);
      double alpha = 1.0;
      if (r > 1.0) alpha = std::max(0.0, 1.0 - (r - 1.0) * std::min(a, b) / kFeatherPixels);
      const std::size_t i = y * size + x;
      f.mask[i] = r <= 1.0 ? 1 : 0;
      out.alpha[i] = alpha;
      if (alpha <= 0.0) continue;
      for (std::size_t ch = 0; ch < 3; ++ch) {
        f.image.at(y, x, ch) = to_byte(alpha * donor.at(y, x, ch) + (1.0 - alpha) * out.base.at(y, x, ch));
      }
    }
  }
  return out;
}

ForgerySample gen_fake(std::uint64_t seed, std::size_t size) { return splice_fake(seed, size).sample; }

std::string to_string(PerturbKind kind) {
  switch (kind) {
    case PerturbKind::gaussian_noise: return "gaussian_noise";
    case PerturbKind::salt_pepper: return "salt_pepper";
    case PerturbKind::gaussian_blur: return "gaussian_blur";
  }
  return "unknown";
}

PerturbKind parse_perturb_kind(const std::string& name) {
  if (name == "gaussian_noise") return PerturbKind::gaussian_noise;
  if (name == "salt_pepper") return PerturbKind::salt_pepper;
  if (name == "gaussian_blur") return PerturbKind::gaussian_blur;
  throw ConfigError("unknown perturbation kind '" + name + "'");
}

std::vector<PerturbSpec> default_perturbations() {
  return {{PerturbKind::gaussian_noise, 8.0}, {PerturbKind::salt_pepper, 0.02}, {PerturbKind::gaussian_blur, 1.5}};
}

RgbImage perturb(const RgbImage& img, const PerturbSpec& spec, std::uint64_t seed) {
  if (spec.strength < 0.0) throw ConfigError("perturbation strength must be non-negative");
  if (spec.strength == 0.0) return img;
  std::mt19937_64 rng(splitmix64(seed));
  RgbImage out = img;
  switch (spec.kind) {
    case PerturbKind::gaussian_noise: {
      std::normal_distribution<double> noise(0.0, spec.strength);
      for (auto& p : out.pixels) p = to_byte(p + noise(rng));
      break;
    }
    case PerturbKind::salt_pepper: {
      std::uniform_real_distribution<double> u(0.0, 1.0);
      const double half = spec.strength / 2.0;
      for (std::size_t i = 0; i < out.width * out.height; ++i) {
        const double r = u(rng);
        if (r < half) std::fill_n(out.pixels.begin() + static_cast<std::ptrdiff_t>(i * 3), 3, std::uint8_t{0});
        else if (r < spec.strength) std::fill_n(out.pixels.begin() + static_cast<std::ptrdiff_t>(i * 3), 3, std::uint8_t{255});
      }
      break;
    }
    case PerturbKind::gaussian_blur:
      out = gaussian_blur(img, spec.strength, 5);
      break;
    default:
      throw ConfigError("unknown perturbation kind");
  }
  return out;
}

std::uint64_t sample_seed(std::uint64_t seed, std::size_t split, std::size_t index) {
  if (split > 3 || index >= (std::size_t{1} << 22)) throw InputError("sample index out of range");
  return (seed << 24) | (static_cast<std::uint64_t>(split) << 22) | index;
}

Dataset build_dataset(std::size_t n_train, std::size_t n_val, std::size_t n_test, std::uint64_t seed,
                      std::size_t size) {
  for (std::size_t n : {n_train, n_val, n_test}) {
    if (n < 2 || n % 2 != 0) throw InputError(fmt::format("split sizes must be even and >= 2, got {}", n));
  }
  Dataset ds;
  auto fill = [&](std::vector<ForgerySample>& out, std::size_t split, std::size_t n) {
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
      const std::uint64_t s = sample_seed(seed, split, i);
      out.push_back(i % 2 == 0 ? gen_real(s, size) : gen_fake(s, size));
    }
  };
  fill(ds.train, 0, n_train);
  fill(ds.val, 1, n_val);
  fill(ds.test, 2, n_test);
  return ds;
}

void export_dataset(const Dataset& ds, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw InputError("cannot create " + dir.string());
  std::ofstream manifest(dir / "manifest.csv");
  if (!manifest) throw InputError("cannot write manifest in " + dir.string());
  manifest << "path,label,mask_path\n";
  const std::pair<const char*, const std::vector<ForgerySample>*> splits[] = {
      {"train", &ds.train}, {"val", &ds.val}, {"test", &ds.test}};
  for (const auto& [name, samples] : splits) {
    std::filesystem::create_directories(dir / name, ec);
    if (ec) throw InputError("cannot create " + (dir / name).string());
    for (const ForgerySample& s : *samples) {
      const std::string rel = fmt::format("{}/{}.ppm", name, s.id);
      const std::string mask_rel = fmt::format("{}/{}_mask.pgm", name, s.id);
      write_ppm(dir / rel, s.image);
      GrayImage mask{s.image.width, s.image.height, std::vector<std::uint8_t>(s.mask.size())};
      for (std::size_t i = 0; i < s.mask.size(); ++i) mask.pixels[i] = s.mask[i] ? 255 : 0;
      write_pgm(dir / mask_rel, mask);
      manifest << rel << ',' << s.label << ',' << mask_rel << '\n';
    }
  }
}

}  // namespace pel
