#include "pel/network.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>

#include "pel/errors.hpp"
#include "pel/freq.hpp"
#include "pel/ops.hpp"

namespace pel {
namespace {

Tensor he_normal(Dims dims, std::size_t fan_in, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / static_cast<double>(fan_in)));
  Tensor t(dims);
  for (double& v : t.data()) v = dist(rng);
  return t;
}

}  // namespace

double sigmoid_scalar(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

FreqStats compute_freq_stats(std::span<const RgbImage> images, std::size_t window_stride) {
  FreqStats stats;
  if (images.empty()) return stats;
  std::vector<double> sum(kFlatChannels, 0.0);
  std::vector<double> sum_sq(kFlatChannels, 0.0);
  std::size_t count = 0;
  for (const RgbImage& img : images) {
    const FreqInput fi = decompose(img, window_stride);
    const std::size_t grid = fi.grid_h() * fi.grid_w();
    const auto data = fi.flat.data();
    for (std::size_t k = 0; k < kFlatChannels; ++k) {
      for (std::size_t i = 0; i < grid; ++i) {
        const double v = data[k * grid + i];
        sum[k] += v;
        sum_sq[k] += v * v;
      }
    }
    count += grid;
  }
  for (std::size_t k = 0; k < kFlatChannels; ++k) {
    const double mean = sum[k] / static_cast<double>(count);
    const double var = std::max(sum_sq[k] / static_cast<double>(count) - mean * mean, 0.0);
    stats.mean[k] = mean;
    stats.stddev[k] = std::max(std::sqrt(var), 1e-6);
  }
  return stats;
}

std::size_t Batch::size() const { return rgb.size() != 0 ? rgb.dims().n : freq.dims().n; }

PelNetwork::PelNetwork(NetworkConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
  std::mt19937_64 rng(cfg_.seed);
  const auto plan = placement_plan(cfg_.num_blocks);
  if (cfg_.use_rgb) {
    rgb_.emplace();
    build_stream(*rgb_, "rgb", 3, cfg_.rgb_first_stride, rng);
  }
  if (cfg_.use_freq) {
    std::normal_distribution<double> dist(0.0, std::sqrt(1.0 / static_cast<double>(kFlatChannels)));
    Tensor w(Dims{kReducedChannels, kFlatChannels, 1, 1});
    for (double& v : w.data()) v = dist(rng);
    reduce_w_ = params_.add("freq.reduce.weight", w);
    reduce_b_ = params_.add("freq.reduce.bias", Tensor(Dims{1, kReducedChannels, 1, 1}, 0.0));
    freq_.emplace();
    build_stream(*freq_, "freq", kReducedChannels, cfg_.freq_first_stride, rng);
  }
  mutual_.resize(cfg_.num_blocks);
  if (cfg_.use_rgb && cfg_.use_freq && cfg_.use_mutual) {
    for (std::size_t b = 0; b < cfg_.num_blocks; ++b) {
      if (plan[b].mutual) {
        mutual_[b].emplace(fmt::format("mutual.block{}", b + 1), cfg_.widths[b], cfg_.widths[b], params_);
      }
    }
  }
  head_w_ = params_.add("head.weight", Tensor(Dims{1, head_features(), 1, 1}, 0.0));
  head_b_ = params_.add("head.bias", Tensor(Dims{1, 1, 1, 1}, 0.0));
}

void PelNetwork::build_stream(Stream& s, const char* name, std::size_t in_channels, std::size_t first_stride,
                              std::mt19937_64& rng) {
  const auto plan = placement_plan(cfg_.num_blocks);
  const bool single_stream = !(cfg_.use_rgb && cfg_.use_freq);
  std::size_t c_in = in_channels;
  for (std::size_t b = 0; b < cfg_.num_blocks; ++b) {
    const std::size_t c = cfg_.widths[b];
    const std::string prefix = fmt::format("{}.block{}", name, b + 1);
    ConvBlock block;
    block.first_stride = b == 0 ? first_stride : 1;
    block.w1 = params_.add(prefix + ".conv1.weight", he_normal(Dims{c, c_in, 3, 3}, c_in * 9, rng));
    block.b1 = params_.add(prefix + ".conv1.bias", Tensor(Dims{1, c, 1, 1}, 0.0));
    block.w2 = params_.add(prefix + ".conv2.weight", he_normal(Dims{c, c, 3, 3}, c * 9, rng));
    block.b2 = params_.add(prefix + ".conv2.bias", Tensor(Dims{1, c, 1, 1}, 0.0));
    s.blocks.push_back(std::move(block));

    Site site;
    if (cfg_.use_self && cfg_.use_noise && plan[b].noise) {
      site.noise.emplace(prefix + ".noise", c, NoiseFilter{cfg_.filter_kind, cfg_.filter_kernels}, params_);
    }
    if (cfg_.use_self && plan[b].channel_attn) {
      site.attn.emplace(prefix + ".attn", c, cfg_.reduction_ratio, params_, rng);
    }
    if (single_stream && cfg_.use_mutual && plan[b].mutual) {
      site.spatial.emplace(prefix + ".spatial", c, params_);
    }
    s.sites.push_back(std::move(site));
    c_in = c;
  }
}

std::size_t PelNetwork::head_features() const {
  const std::size_t last = cfg_.widths.back();
  return (cfg_.use_rgb ? last : 0) + (cfg_.use_freq ? last : 0);
}

void PelNetwork::set_freq_stats(FreqStats stats) {
  if (stats.mean.size() != kFlatChannels || stats.stddev.size() != kFlatChannels) {
    throw ShapeError("frequency statistics must hold 192 means and deviations");
  }
  stats_ = std::move(stats);
}

Batch PelNetwork::make_batch(std::span<const RgbImage* const> images) const {
  const std::size_t n = images.size();
  if (n == 0) throw UsageError("empty batch");
  const std::size_t s = cfg_.input_size;
  for (const RgbImage* img : images) {
    if (img->width != s || img->height != s) {
      throw InputError(fmt::format("image is {}x{}, network expects {}x{}", img->width, img->height, s, s));
    }
  }
  Batch batch;
  if (cfg_.use_rgb) {
    batch.rgb = Tensor(Dims{n, 3, s, s});
    auto d = batch.rgb.data();
    for (std::size_t i = 0; i < n; ++i) {
      const auto& px = images[i]->pixels;
      for (std::size_t ch = 0; ch < 3; ++ch) {
        double* dst = d.data() + (i * 3 + ch) * s * s;
        for (std::size_t p = 0; p < s * s; ++p) dst[p] = px[p * 3 + ch] / 255.0;
      }
    }
  }
  if (cfg_.use_freq) {
    const std::size_t g = window_steps(s, cfg_.window_stride);
    const std::size_t grid = g * g;
    batch.freq = Tensor(Dims{n, kFlatChannels, g, g});
    auto d = batch.freq.data();
    for (std::size_t i = 0; i < n; ++i) {
      auto slot = d.subspan(i * kFlatChannels * grid, kFlatChannels * grid);
      decompose_into(*images[i], cfg_.window_stride, slot);
      for (std::size_t k = 0; k < kFlatChannels; ++k) {
        const double mean = stats_.mean[k];
        const double inv = 1.0 / stats_.stddev[k];
        for (std::size_t p = 0; p < grid; ++p) slot[k * grid + p] = (slot[k * grid + p] - mean) * inv;
      }
    }
  }
  return batch;
}

Batch PelNetwork::make_batch(std::span<const RgbImage> images) const {
  std::vector<const RgbImage*> ptrs;
  ptrs.reserve(images.size());
  for (const auto& img : images) ptrs.push_back(&img);
  return make_batch(std::span<const RgbImage* const>(ptrs));
}

Tensor PelNetwork::run_block(Graph& g, const ConvBlock& b, const Tensor& x) const {
  const Tensor h = relu(g, conv3x3(g, x, b.w1, b.b1, b.first_stride));
  return relu(g, conv3x3(g, h, b.w2, b.b2, 2));
}

Tensor PelNetwork::forward(Graph& g, const Batch& batch, ForwardTrace* trace) const {
  Tensor r;
  Tensor f;
  if (rgb_) {
    if (batch.rgb.dims().c != 3) throw InputError("batch has no rgb input");
    r = batch.rgb;
  }
  if (freq_) {
    if (batch.freq.dims().c != kFlatChannels) throw InputError("batch has no frequency input");
    f = reduce_bands(g, batch.freq, reduce_w_, reduce_b_);
  }
  for (std::size_t b = 0; b < cfg_.num_blocks; ++b) {
    if (rgb_) {
      r = run_block(g, rgb_->blocks[b], r);
      if (trace) trace->rgb.block_out.push_back(r);
      const Site& site = rgb_->sites[b];
      r = self_enhance(g, r, site.noise ? &*site.noise : nullptr, nullptr);
      if (trace) trace->rgb.noise_out.push_back(r);
      r = self_enhance(g, r, nullptr, site.attn ? &*site.attn : nullptr);
      if (trace) trace->rgb.self_out.push_back(r);
      if (site.spatial) r = site.spatial->forward(g, r);
    }
    if (freq_) {
      f = run_block(g, freq_->blocks[b], f);
      if (trace) trace->freq.block_out.push_back(f);
      const Site& site = freq_->sites[b];
      f = self_enhance(g, f, site.noise ? &*site.noise : nullptr, nullptr);
      if (trace) trace->freq.noise_out.push_back(f);
      f = self_enhance(g, f, nullptr, site.attn ? &*site.attn : nullptr);
      if (trace) trace->freq.self_out.push_back(f);
      if (site.spatial) f = site.spatial->forward(g, f);
    }
    if (mutual_[b]) std::tie(r, f) = mutual_[b]->forward(g, r, f);
    if (trace) {
      if (rgb_) trace->rgb.features.push_back(r);
      if (freq_) trace->freq.features.push_back(f);
    }
  }
  Tensor pooled;
  if (rgb_ && freq_) pooled = concat_channels(g, gap(g, r), gap(g, f));
  else pooled = gap(g, rgb_ ? r : f);
  return conv_pointwise(g, pooled, head_w_, head_b_);
}

std::vector<double> PelNetwork::predict_logits(std::span<const RgbImage* const> images) const {
  std::vector<double> out;
  out.reserve(images.size());
  for (std::size_t start = 0; start < images.size(); start += cfg_.batch_size) {
    const std::size_t count = std::min(cfg_.batch_size, images.size() - start);
    Graph g = Graph::inference();
    const Tensor logits = forward(g, make_batch(images.subspan(start, count)));
    out.insert(out.end(), logits.data().begin(), logits.data().end());
  }
  return out;
}

double PelNetwork::predict_logit(const RgbImage& image) const {
  const RgbImage* ptr = &image;
  return predict_logits(std::span<const RgbImage* const>(&ptr, 1)).front();
}

Tensor bce_loss(Graph& g, const Tensor& logits, std::span<const int> labels) {
  const std::size_t n = logits.size();
  if (n == 0 || labels.empty()) throw UsageError("bce_loss on an empty batch");
  if (labels.size() != n) throw ShapeError(fmt::format("bce_loss: {} logits vs {} labels", n, labels.size()));
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (labels[i] != 0 && labels[i] != 1) throw UsageError("bce_loss labels must be 0 or 1");
    const double z = logits.data()[i];
    const double y = labels[i];
    total += std::max(z, 0.0) - z * y + std::log1p(std::exp(-std::abs(z)));
  }
  Tensor out(Dims{1, 1, 1, 1}, total / static_cast<double>(n));
  if (g.tracks({&logits})) {
    std::vector<int> y(labels.begin(), labels.end());
    g.record("bce_loss", out, [li = logits.impl(), oi = out.impl(), y = std::move(y)] {
      if (!li->requires_grad) return;
      auto& gl = li->ensure_grad();
      const double scale = oi->grad[0] / static_cast<double>(y.size());
      for (std::size_t i = 0; i < y.size(); ++i) gl[i] += scale * (sigmoid_scalar(li->data[i]) - y[i]);
    });
  }
  return out;
}

}  // namespace pel
