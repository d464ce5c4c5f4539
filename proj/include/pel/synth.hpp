#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "pel/image.hpp"

namespace pel {

/// A labelled image. `mask` marks spliced pixels (1) and is only used for
/// visual / localisation checks, never as a training target.
struct ForgerySample {
  std::string id;
  RgbImage image;
  int label = 0;  // 0 real, 1 fake
  std::vector<std::uint8_t> mask;
  std::uint64_t seed = 0;
};

/// JPEG luminance quantisation table scaled to `quality` (1..100), row-major.
std::array<int, 64> quant_table(int quality);

/// Quantises the luma channel blockwise (8x8, aligned at the origin) with
/// quant_table(quality) and converts back to 8-bit RGB.
RgbImage jpeg_degrade(const RgbImage& img, int quality);

/// Separable normalised Gaussian blur with replicate borders.
RgbImage gaussian_blur(const RgbImage& img, double sigma, std::size_t kernel);

/// Smooth multi-octave value-noise texture with a global colour gradient,
/// before any compression.
RgbImage texture(std::uint64_t seed, std::size_t size);

ForgerySample gen_real(std::uint64_t seed, std::size_t size = 64);

/// Pieces of a fake sample, exposed so callers can check splice locality.
struct Splice {
  ForgerySample sample;
  RgbImage base;               // the real host image
  std::vector<double> alpha;   // blend weight of the donor per pixel
};

Splice splice_fake(std::uint64_t seed, std::size_t size = 64);
ForgerySample gen_fake(std::uint64_t seed, std::size_t size = 64);

enum class PerturbKind { gaussian_noise, salt_pepper, gaussian_blur };

struct PerturbSpec {
  PerturbKind kind = PerturbKind::gaussian_noise;
  double strength = 0.0;  // noise sigma, flip probability, or blur sigma
};

std::string to_string(PerturbKind kind);
PerturbKind parse_perturb_kind(const std::string& name);

/// The three evaluation-time perturbations at their default strengths.
std::vector<PerturbSpec> default_perturbations();

RgbImage perturb(const RgbImage& img, const PerturbSpec& spec, std::uint64_t seed);

struct Dataset {
  std::vector<ForgerySample> train;
  std::vector<ForgerySample> val;
  std::vector<ForgerySample> test;
};

/// Seed used for sample `index` of split 0 (train), 1 (val) or 2 (test).
std::uint64_t sample_seed(std::uint64_t seed, std::size_t split, std::size_t index);

/// Balanced splits (even index real, odd index fake) from disjoint seed
/// ranges. Split sizes must be even and >= 2.
Dataset build_dataset(std::size_t n_train, std::size_t n_val, std::size_t n_test, std::uint64_t seed,
                      std::size_t size = 64);

/// Writes <dir>/<split>/<id>.ppm, masks as <id>_mask.pgm and manifest.csv
/// (`path,label,mask_path`).
void export_dataset(const Dataset& ds, const std::filesystem::path& dir);

}  // namespace pel
