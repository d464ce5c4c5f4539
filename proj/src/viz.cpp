#include "pel/viz.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>

#include "pel/errors.hpp"
#include "pel/ops.hpp"

namespace pel {
namespace {

void clear_parameter_grads(const PelNetwork& net) {
  for (const Parameter& p : net.parameters().all()) {
    Tensor handle = p.tensor;
    handle.zero_grad();
  }
}

void check_block(const PelNetwork& net, std::size_t block) {
  if (block < 1 || block > net.config().num_blocks) {
    throw UsageError(fmt::format("block {} out of range 1..{}", block, net.config().num_blocks));
  }
}

HeatMap channel_mean_abs_diff(const Tensor& out, const Tensor& in, HeatKind kind, std::size_t block) {
  const Dims& d = out.dims();
  std::vector<double> raw(d.plane(), 0.0);
  for (std::size_t k = 0; k < d.c; ++k) {
    for (std::size_t p = 0; p < d.plane(); ++p) {
      raw[p] += std::abs(out.data()[k * d.plane() + p] - in.data()[k * d.plane() + p]);
    }
  }
  for (double& v : raw) v /= static_cast<double>(d.c);
  return make_heatmap(std::move(raw), d.w, d.h, kind, block);
}

}  // namespace

std::string to_string(HeatKind kind) {
  switch (kind) {
    case HeatKind::cam_rgb: return "cam_rgb";
    case HeatKind::cam_freq: return "cam_freq";
    case HeatKind::self_residual: return "self_residual";
    case HeatKind::mutual_residual: return "mutual_residual";
  }
  return "unknown";
}

HeatMap make_heatmap(std::vector<double> raw, std::size_t width, std::size_t height, HeatKind kind, std::size_t block) {
  if (raw.size() != width * height) throw ShapeError("heatmap size mismatch");
  HeatMap m{width, height, std::move(raw), kind, block, 0.0};
  if (m.values.empty()) return m;
  double total = 0.0;
  for (double v : m.values) total += v;
  m.raw_mean = total / static_cast<double>(m.values.size());
  const auto [lo, hi] = std::minmax_element(m.values.begin(), m.values.end());
  const double min = *lo;
  const double range = *hi - min;
  for (double& v : m.values) v = range > 0.0 ? (v - min) / range : 0.0;
  return m;
}

HeatMap upsample_nearest(const HeatMap& map, std::size_t width, std::size_t height) {
  HeatMap out = map;
  out.width = width;
  out.height = height;
  out.values.assign(width * height, 0.0);
  for (std::size_t y = 0; y < height; ++y) {
    const std::size_t sy = y * map.height / height;
    for (std::size_t x = 0; x < width; ++x) {
      out.values[y * width + x] = map.values[sy * map.width + x * map.width / width];
    }
  }
  return out;
}

HeatMap grad_cam(const PelNetwork& net, const RgbImage& img, StreamKind stream, std::size_t block) {
  check_block(net, block);
  const NetworkConfig& cfg = net.config();
  if ((stream == StreamKind::rgb && !cfg.use_rgb) || (stream == StreamKind::freq && !cfg.use_freq)) {
    throw UsageError("grad_cam: requested stream is disabled in this network");
  }
  const HeatKind kind = stream == StreamKind::rgb ? HeatKind::cam_rgb : HeatKind::cam_freq;
  const RgbImage* ptr = &img;
  const Batch batch = net.make_batch(std::span<const RgbImage* const>(&ptr, 1));

  clear_parameter_grads(net);
  Graph g;
  ForwardTrace trace;
  const Tensor logit = net.forward(g, batch, &trace);
  const Tensor& act = (stream == StreamKind::rgb ? trace.rgb : trace.freq).features[block - 1];
  std::vector<double> grad(act.size(), 0.0);
  if (logit.requires_grad()) {
    g.backward(logit);
    grad = act.grad();
  }
  clear_parameter_grads(net);

  const Dims& d = act.dims();
  const std::size_t plane = d.plane();
  std::vector<double> cam(plane, 0.0);
  for (std::size_t k = 0; k < d.c; ++k) {
    double weight = 0.0;
    for (std::size_t p = 0; p < plane; ++p) weight += grad[k * plane + p];
    weight /= static_cast<double>(plane);
    for (std::size_t p = 0; p < plane; ++p) cam[p] += weight * act.data()[k * plane + p];
  }
  for (double& v : cam) v = std::max(v, 0.0);
  return upsample_nearest(make_heatmap(std::move(cam), d.w, d.h, kind, block), img.width, img.height);
}

std::pair<HeatMap, HeatMap> enhancement_residual(const PelNetwork& net, const RgbImage& img, std::size_t block,
                                                 ModuleKind module) {
  check_block(net, block);
  const NetworkConfig& cfg = net.config();
  const SitePlan site = placement_plan(cfg.num_blocks)[block - 1];
  if (module == ModuleKind::self) {
    // Channel attention rescales by (1 + gate) and is never an identity map,
    // so the self residual tracks the noise block alone.
    const bool present = cfg.use_self && cfg.use_noise && site.noise;
    if (!present) throw UsageError(fmt::format("block {} has no noise-enhancement module", block));
  } else if (!(cfg.use_mutual && site.mutual)) {
    throw UsageError(fmt::format("block {} has no mutual-enhancement module", block));
  }
  const RgbImage* ptr = &img;
  const Batch batch = net.make_batch(std::span<const RgbImage* const>(&ptr, 1));
  Graph g = Graph::inference();
  ForwardTrace trace;
  net.forward(g, batch, &trace);

  const HeatKind kind = module == ModuleKind::self ? HeatKind::self_residual : HeatKind::mutual_residual;
  auto residual = [&](const StreamTrace& t) {
    if (t.block_out.empty()) return HeatMap{};
    const std::size_t i = block - 1;
    return module == ModuleKind::self ? channel_mean_abs_diff(t.noise_out[i], t.block_out[i], kind, block)
                                      : channel_mean_abs_diff(t.features[i], t.self_out[i], kind, block);
  };
  return {residual(trace.rgb), residual(trace.freq)};
}

void write_heatmap_pgm(const std::filesystem::path& path, const HeatMap& map) {
  GrayImage img{map.width, map.height, std::vector<std::uint8_t>(map.values.size())};
  for (std::size_t i = 0; i < map.values.size(); ++i) {
    img.pixels[i] = static_cast<std::uint8_t>(std::lround(std::clamp(map.values[i], 0.0, 1.0) * 255.0));
  }
  write_pgm(path, img);
}

RgbImage heatmap_overlay(const RgbImage& img, const HeatMap& map) {
  const HeatMap fitted =
      (map.width == img.width && map.height == img.height) ? map : upsample_nearest(map, img.width, img.height);
  RgbImage out(img.width, img.height);
  for (std::size_t i = 0; i < img.width * img.height; ++i) {
    const double v = std::clamp(fitted.values[i], 0.0, 1.0);
    // blue -> green -> red ramp
    const double colour[3] = {255.0 * std::clamp(2.0 * v - 1.0, 0.0, 1.0),
                              255.0 * (1.0 - std::abs(2.0 * v - 1.0)),
                              255.0 * std::clamp(1.0 - 2.0 * v, 0.0, 1.0)};
    for (std::size_t ch = 0; ch < 3; ++ch) {
      const double blended = 0.6 * colour[ch] + 0.4 * img.pixels[i * 3 + ch];
      out.pixels[i * 3 + ch] = static_cast<std::uint8_t>(std::lround(std::clamp(blended, 0.0, 255.0)));
    }
  }
  return out;
}

}  // namespace pel
