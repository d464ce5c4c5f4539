#pragma once

#include <cstddef>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "pel/tensor.hpp"

namespace pel {

enum class FilterKind { median, mean };

struct NoiseFilter {
  FilterKind kind = FilterKind::median;
  std::vector<std::size_t> kernels{3};  // more than one entry: multi-kernel variant
};

/// Noise enhancement: f_ne = f_in + depthwise(sigmoid(f_in - filter(f_in))).
/// With several kernels the per-kernel residuals are stacked and reduced back
/// to c channels by a grouped 1x1 convolution before the sigmoid.
class NoiseBlock {
 public:
  NoiseBlock(const std::string& prefix, std::size_t channels, NoiseFilter filter, ParameterRegistry& registry);

  Tensor forward(Graph& g, const Tensor& f_in) const;

  std::size_t channels() const { return channels_; }
  const NoiseFilter& filter() const { return filter_; }

  Tensor scale;
  Tensor bias;
  Tensor group_weight;  // (c, kernels, 1, 1), multi-kernel only
  Tensor group_bias;

 private:
  Tensor residual(Graph& g, const Tensor& f_in, std::size_t kernel) const;

  std::size_t channels_;
  NoiseFilter filter_;
};

/// Hidden width of the channel-attention bottleneck: max(c / ratio, 4).
std::size_t attention_hidden(std::size_t channels, std::size_t ratio);

/// f_out = f_ne + f_ne * sigmoid(MLP(GAP(f_ne) + GMP(f_ne))).
class ChannelAttention {
 public:
  ChannelAttention(const std::string& prefix, std::size_t channels, std::size_t ratio, ParameterRegistry& registry,
                   std::mt19937_64& rng);

  Tensor forward(Graph& g, const Tensor& f_ne) const;
  /// The (n, c, 1, 1) gating factors in (0, 1).
  Tensor factors(Graph& g, const Tensor& f_ne) const;

  Tensor w1;
  Tensor w2;
};

/// Cross-stream enhancement through a shared two-channel spatial map:
/// A = sigmoid(pointwise(cat(f_rgb, f_freq))), then per stream
/// f_out = f_in + depthwise(f_in * expand(a_s)).
class MutualEnhance {
 public:
  MutualEnhance(const std::string& prefix, std::size_t rgb_channels, std::size_t freq_channels,
                ParameterRegistry& registry);

  std::pair<Tensor, Tensor> forward(Graph& g, const Tensor& f_rgb, const Tensor& f_freq) const;
  /// The (n, 2, h, w) attention map; channel 0 drives rgb, channel 1 freq.
  Tensor attention(Graph& g, const Tensor& f_rgb, const Tensor& f_freq) const;

  Tensor attn_weight;  // (2, c_rgb + c_freq, 1, 1)
  Tensor attn_bias;    // (1, 2, 1, 1)
  Tensor scale_rgb, bias_rgb;
  Tensor scale_freq, bias_freq;
};

/// Single-stream stand-in for MutualEnhance used by ablations with one
/// stream: A = sigmoid(pointwise(f_in)) with one channel.
class SpatialAttention {
 public:
  SpatialAttention(const std::string& prefix, std::size_t channels, ParameterRegistry& registry);

  Tensor forward(Graph& g, const Tensor& f_in) const;

  Tensor attn_weight;  // (1, c, 1, 1)
  Tensor attn_bias;    // (1, 1, 1, 1)
  Tensor scale, bias;
};

/// self_enhance with an optional noise block and optional channel attention,
/// applied in that order.
Tensor self_enhance(Graph& g, const Tensor& f_in, const NoiseBlock* noise, const ChannelAttention* attn);

struct SitePlan {
  bool noise = false;
  bool channel_attn = false;
  bool mutual = false;
};

/// Per-block module placement; entry b describes the site after block b+1.
/// Noise after blocks 1-2, channel attention and mutual enhancement after
/// blocks 2..num_blocks-1.
std::vector<SitePlan> placement_plan(std::size_t num_blocks);

}  // namespace pel
