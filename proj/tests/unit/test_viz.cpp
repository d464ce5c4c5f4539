#include <gtest/gtest.h>

#include <random>

#include "pel/errors.hpp"
#include "pel/train.hpp"
#include "pel/viz.hpp"

using namespace pel;

namespace {

NetworkConfig tiny_config() {
  NetworkConfig cfg;
  cfg.input_size = 16;
  cfg.widths = {4, 6, 8, 8};
  cfg.train_samples = 4;
  cfg.val_samples = 2;
  cfg.test_samples = 2;
  return cfg;
}

}  // namespace

TEST(HeatMap, NormalisedToUnitRange) {
  std::mt19937_64 rng(1);
  std::vector<double> raw(30);
  for (double& v : raw) v = std::normal_distribution<double>(0, 3)(rng);
  const HeatMap m = make_heatmap(raw, 6, 5, HeatKind::cam_rgb, 1);
  EXPECT_EQ(*std::min_element(m.values.begin(), m.values.end()), 0.0);
  EXPECT_EQ(*std::max_element(m.values.begin(), m.values.end()), 1.0);
  EXPECT_THROW(make_heatmap(raw, 5, 5, HeatKind::cam_rgb, 1), ShapeError);
}

TEST(HeatMap, ConstantMapBecomesZero) {
  const HeatMap m = make_heatmap(std::vector<double>(9, 2.5), 3, 3, HeatKind::self_residual, 2);
  for (double v : m.values) EXPECT_EQ(v, 0.0);
  EXPECT_EQ(m.raw_mean, 2.5);
}

TEST(HeatMap, NearestUpsampling) {
  const HeatMap m = make_heatmap({0.0, 1.0, 2.0, 3.0}, 2, 2, HeatKind::cam_rgb, 1);
  const HeatMap u = upsample_nearest(m, 4, 4);
  EXPECT_EQ(u.width, 4u);
  EXPECT_EQ(u.values[0], u.values[5]);
  EXPECT_EQ(u.values[3], m.values[1]);
  EXPECT_EQ(u.values[15], 1.0);
}

TEST(GradCam, ZeroHeadGivesZeroMap) {
  const NetworkConfig cfg = tiny_config();
  const Dataset data = make_dataset(cfg);
  const PelNetwork net = make_network(cfg, data);
  for (StreamKind s : {StreamKind::rgb, StreamKind::freq}) {
    const HeatMap m = grad_cam(net, data.test[1].image, s, 2);
    EXPECT_EQ(m.width, 16u);
    for (double v : m.values) EXPECT_EQ(v, 0.0);
  }
  EXPECT_THROW(grad_cam(net, data.test[1].image, StreamKind::rgb, 5), UsageError);
}

TEST(GradCam, ValuesInUnitRangeOnARandomNetwork) {
  const NetworkConfig cfg = tiny_config();
  const Dataset data = make_dataset(cfg);
  PelNetwork net = make_network(cfg, data);
  std::mt19937_64 rng(3);
  for (auto& p : net.parameters().all()) {
    for (double& v : p.tensor.data()) v = std::uniform_real_distribution<double>(-0.3, 0.3)(rng);
  }
  for (std::size_t block = 1; block <= 4; ++block) {
    const HeatMap m = grad_cam(net, data.test[1].image, StreamKind::rgb, block);
    for (double v : m.values) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
  }
  // Parameter gradients are left clean.
  for (const auto& p : net.parameters().all()) {
    for (double v : p.tensor.grad()) ASSERT_EQ(v, 0.0) << p.name;
  }
}

TEST(Residual, ZeroAtInitialisation) {
  const NetworkConfig cfg = tiny_config();
  const Dataset data = make_dataset(cfg);
  const PelNetwork net = make_network(cfg, data);
  for (std::size_t block : {1, 2}) {
    const auto [r, f] = enhancement_residual(net, data.test[1].image, block, ModuleKind::self);
    for (double v : r.values) EXPECT_EQ(v, 0.0);
    for (double v : f.values) EXPECT_EQ(v, 0.0);
    EXPECT_EQ(r.raw_mean, 0.0);
    EXPECT_EQ(f.raw_mean, 0.0);
  }
  const auto [r, f] = enhancement_residual(net, data.test[1].image, 2, ModuleKind::mutual);
  EXPECT_EQ(r.raw_mean, 0.0);
  EXPECT_EQ(f.raw_mean, 0.0);
}

TEST(Residual, DimsMatchTheSite) {
  const NetworkConfig cfg = tiny_config();
  const Dataset data = make_dataset(cfg);
  const PelNetwork net = make_network(cfg, data);
  const auto extents = rgb_extents(cfg);
  for (std::size_t block : {1, 2}) {
    const auto [r, f] = enhancement_residual(net, data.test[0].image, block, ModuleKind::self);
    EXPECT_EQ(r.width, extents[block - 1]);
    EXPECT_EQ(r.height, extents[block - 1]);
    EXPECT_EQ(f.width, freq_extents(cfg)[block - 1]);
  }
  EXPECT_THROW(enhancement_residual(net, data.test[0].image, 3, ModuleKind::self), UsageError);
  EXPECT_THROW(enhancement_residual(net, data.test[0].image, 1, ModuleKind::mutual), UsageError);
}

TEST(Overlay, KeepsImageSize) {
  const RgbImage img(8, 8, 100);
  const HeatMap m = make_heatmap({0.0, 1.0, 0.5, 0.25}, 2, 2, HeatKind::cam_rgb, 1);
  const RgbImage o = heatmap_overlay(img, m);
  EXPECT_EQ(o.width, 8u);
  EXPECT_EQ(o.height, 8u);
}
