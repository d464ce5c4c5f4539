#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <numeric>
#include <set>
#include <string_view>

#include "pel/errors.hpp"
#include "pel/freq.hpp"
#include "pel/synth.hpp"

using namespace pel;

namespace {

std::size_t mask_area(const ForgerySample& s) { return std::accumulate(s.mask.begin(), s.mask.end(), std::size_t{0}); }

std::size_t pixel_hash(const RgbImage& img) {
  return std::hash<std::string_view>{}(
      std::string_view(reinterpret_cast<const char*>(img.pixels.data()), img.pixels.size()));
}

}  // namespace

TEST(GenReal, DeterministicAndLabelled) {
  const ForgerySample a = gen_real(77), b = gen_real(77), c = gen_real(78);
  EXPECT_EQ(a.image, b.image);
  EXPECT_NE(a.image, c.image);
  EXPECT_EQ(a.label, 0);
  EXPECT_EQ(mask_area(a), 0u);
  EXPECT_EQ(a.image.width, 64u);
}

TEST(GenReal, MeanPixelCalibrated) {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto& px = gen_real(seed).image.pixels;
    const double mean = std::accumulate(px.begin(), px.end(), 0.0) / static_cast<double>(px.size());
    EXPECT_GE(mean, 64.0) << seed;
    EXPECT_LE(mean, 192.0) << seed;
  }
}

TEST(GenFake, MaskAreaWithinContract) {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const ForgerySample f = gen_fake(seed);
    EXPECT_EQ(f.label, 1);
    const double frac = static_cast<double>(mask_area(f)) / (64.0 * 64.0);
    EXPECT_GE(frac, 0.05) << seed;
    EXPECT_LE(frac, 0.40) << seed;
  }
}

TEST(GenFake, OutsideTheFeatherMatchesTheBase) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Splice s = splice_fake(seed);
    std::size_t untouched = 0;
    for (std::size_t i = 0; i < s.alpha.size(); ++i) {
      if (s.alpha[i] != 0.0) continue;
      ++untouched;
      EXPECT_EQ(s.sample.mask[i], 0);
      for (std::size_t ch = 0; ch < 3; ++ch) ASSERT_EQ(s.sample.image.pixels[i * 3 + ch], s.base.pixels[i * 3 + ch]);
    }
    EXPECT_GT(untouched, s.alpha.size() / 2);
    EXPECT_EQ(gen_fake(seed).image, s.sample.image);
  }
}

TEST(GenFake, HighBandEnergyDiffersInsideTheMask) {
  // Mean |Y coefficient| over zigzag >= 32, pooled over windows lying wholly
  // inside or wholly outside the splice.
  double inside = 0.0, outside = 0.0;
  std::size_t n_in = 0, n_out = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const ForgerySample f = gen_fake(seed);
    const FreqInput fi = decompose(f.image);
    const std::size_t g = fi.grid_h(), s = f.image.width;
    for (std::size_t i = 0; i < g; ++i) {
      for (std::size_t j = 0; j < g; ++j) {
        std::size_t covered = 0, total = 0;
        for (std::size_t y = 0; y < 8; ++y) {
          for (std::size_t x = 0; x < 8; ++x) {
            const long py = long(2 * i + y) - 3, px = long(2 * j + x) - 3;
            if (py < 0 || px < 0 || py >= long(s) || px >= long(s)) continue;
            ++total;
            covered += f.mask[std::size_t(py) * s + std::size_t(px)];
          }
        }
        if (covered != 0 && covered != total) continue;
        double e = 0.0;
        for (std::size_t z = 32; z < 64; ++z) e += std::abs(fi.flat.at(0, channel_of(0, z), i, j));
        e /= 32.0;
        if (covered == total) {
          inside += e;
          ++n_in;
        } else {
          outside += e;
          ++n_out;
        }
      }
    }
  }
  ASSERT_GT(n_in, 0u);
  ASSERT_GT(n_out, 0u);
  inside /= static_cast<double>(n_in);
  outside /= static_cast<double>(n_out);
  EXPECT_GE(std::max(inside, outside) / std::min(inside, outside), 1.2) << inside << " vs " << outside;
}

TEST(Perturb, ZeroStrengthIsIdentity) {
  const RgbImage img = gen_real(3).image;
  for (PerturbKind k : {PerturbKind::gaussian_noise, PerturbKind::salt_pepper, PerturbKind::gaussian_blur}) {
    EXPECT_EQ(perturb(img, PerturbSpec{k, 0.0}, 9), img);
  }
}

TEST(Perturb, FullSaltPepperIsBinary) {
  const RgbImage out = perturb(gen_real(4).image, PerturbSpec{PerturbKind::salt_pepper, 1.0}, 9);
  for (auto p : out.pixels) EXPECT_TRUE(p == 0 || p == 255);
}

TEST(Perturb, BlurKeepsConstantImages) {
  const RgbImage flat(20, 20, 131);
  EXPECT_EQ(perturb(flat, PerturbSpec{PerturbKind::gaussian_blur, 1.5}, 1), flat);
  EXPECT_EQ(gaussian_blur(flat, 1.0, 7), flat);
}

TEST(Perturb, SeededAndChanging) {
  const RgbImage img = gen_real(5).image;
  const PerturbSpec noise{PerturbKind::gaussian_noise, 8.0};
  EXPECT_EQ(perturb(img, noise, 1), perturb(img, noise, 1));
  EXPECT_NE(perturb(img, noise, 1), img);
  EXPECT_EQ(parse_perturb_kind(to_string(PerturbKind::salt_pepper)), PerturbKind::salt_pepper);
  EXPECT_THROW(parse_perturb_kind("jpeg"), Error);
  const auto d = default_perturbations();
  ASSERT_EQ(d.size(), 3u);
  EXPECT_EQ(d[0].strength, 8.0);
  EXPECT_EQ(d[1].strength, 0.02);
  EXPECT_EQ(d[2].strength, 1.5);
}

TEST(Jpeg, QuantTablesOrdered) {
  const auto q50 = quant_table(50), q75 = quant_table(75);
  EXPECT_EQ(q50[0], 16);
  for (std::size_t i = 0; i < 64; ++i) EXPECT_LE(q75[i], q50[i]);
}

TEST(Dataset, SplitSizesAndBalance) {
  const Dataset d = build_dataset(800, 100, 100, 1);
  EXPECT_EQ(d.train.size(), 800u);
  EXPECT_EQ(d.val.size(), 100u);
  EXPECT_EQ(d.test.size(), 100u);
  for (const auto* split : {&d.train, &d.val, &d.test}) {
    std::size_t fakes = 0;
    for (const auto& s : *split) fakes += static_cast<std::size_t>(s.label);
    EXPECT_EQ(fakes * 2, split->size());
  }
}

TEST(Dataset, ReproducibleAndDisjoint) {
  const Dataset a = build_dataset(60, 20, 20, 3);
  const Dataset b = build_dataset(60, 20, 20, 3);
  for (std::size_t i = 0; i < a.train.size(); ++i) EXPECT_EQ(a.train[i].image, b.train[i].image);
  std::set<std::size_t> train_hashes;
  for (const auto& s : a.train) train_hashes.insert(pixel_hash(s.image));
  for (const auto* split : {&a.val, &a.test}) {
    for (const auto& s : *split) EXPECT_FALSE(train_hashes.contains(pixel_hash(s.image))) << s.id;
  }
  EXPECT_NE(sample_seed(3, 0, 5), sample_seed(3, 2, 5));
  EXPECT_THROW(build_dataset(3, 2, 2, 1), InputError);
}
