#include "pel/enhance.hpp"

#include <cmath>
#include <fmt/format.h>

#include "pel/errors.hpp"
#include "pel/ops.hpp"

namespace pel {
namespace {

Tensor channel_vector(std::size_t c, double fill) { return Tensor(Dims{1, c, 1, 1}, fill); }

Tensor normal_tensor(Dims dims, double stddev, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, stddev);
  Tensor t(dims);
  for (double& v : t.data()) v = dist(rng);
  return t;
}

void require_channels(const Tensor& x, std::size_t c, const char* what) {
  if (x.dims().c != c) {
    throw ShapeError(fmt::format("{}: expected {} channels, got {}", what, c, x.dims().c));
  }
}

}  // namespace

NoiseBlock::NoiseBlock(const std::string& prefix, std::size_t channels, NoiseFilter filter,
                       ParameterRegistry& registry)
    : channels_(channels), filter_(std::move(filter)) {
  if (filter_.kernels.empty()) throw ConfigError("noise block needs at least one filter kernel");
  for (std::size_t k : filter_.kernels) {
    if (k != 3 && k != 5 && k != 7) throw ConfigError(fmt::format("filter kernel must be 3, 5 or 7, got {}", k));
  }
  scale = registry.add(prefix + ".scale", channel_vector(channels, 0.0));
  bias = registry.add(prefix + ".bias", channel_vector(channels, 0.0));
  if (filter_.kernels.size() > 1) {
    const auto groups = filter_.kernels.size();
    group_weight = registry.add(prefix + ".group.weight",
                                Tensor(Dims{channels, groups, 1, 1}, 1.0 / static_cast<double>(groups)));
    group_bias = registry.add(prefix + ".group.bias", channel_vector(channels, 0.0));
  }
}

Tensor NoiseBlock::residual(Graph& g, const Tensor& f_in, std::size_t kernel) const {
  const Tensor smooth = filter_.kind == FilterKind::median ? median_filter(g, f_in, kernel) : mean_filter(g, f_in, kernel);
  return sub(g, f_in, smooth);
}

Tensor NoiseBlock::forward(Graph& g, const Tensor& f_in) const {
  require_channels(f_in, channels_, "noise block");
  Tensor noise = residual(g, f_in, filter_.kernels.front());
  if (filter_.kernels.size() > 1) {
    for (std::size_t i = 1; i < filter_.kernels.size(); ++i) {
      noise = concat_channels(g, noise, residual(g, f_in, filter_.kernels[i]));
    }
    noise = grouped_reduce(g, noise, group_weight, group_bias);
  }
  return add(g, f_in, conv_depthwise_1x1(g, sigmoid(g, noise), scale, bias));
}

std::size_t attention_hidden(std::size_t channels, std::size_t ratio) {
  if (ratio == 0) throw ConfigError("reduction ratio must be positive");
  return std::max<std::size_t>(channels / ratio, 4);
}

ChannelAttention::ChannelAttention(const std::string& prefix, std::size_t channels, std::size_t ratio,
                                   ParameterRegistry& registry, std::mt19937_64& rng) {
  const std::size_t hidden = attention_hidden(channels, ratio);
  w1 = registry.add(prefix + ".mlp.w1",
                    normal_tensor(Dims{hidden, channels, 1, 1}, std::sqrt(2.0 / static_cast<double>(channels)), rng));
  w2 = registry.add(prefix + ".mlp.w2",
                    normal_tensor(Dims{channels, hidden, 1, 1}, std::sqrt(1.0 / static_cast<double>(hidden)), rng));
}

Tensor ChannelAttention::factors(Graph& g, const Tensor& f_ne) const {
  require_channels(f_ne, w1.dims().c, "channel attention");
  const Tensor pooled = add(g, gap(g, f_ne), gmp(g, f_ne));
  return sigmoid(g, mlp2(g, pooled, w1, w2));
}

Tensor ChannelAttention::forward(Graph& g, const Tensor& f_ne) const {
  const Tensor a = expand_spatial(g, factors(g, f_ne), f_ne.dims().h, f_ne.dims().w);
  return add(g, f_ne, mul(g, f_ne, a));
}

MutualEnhance::MutualEnhance(const std::string& prefix, std::size_t rgb_channels, std::size_t freq_channels,
                             ParameterRegistry& registry) {
  attn_weight = registry.add(prefix + ".attn.weight", Tensor(Dims{2, rgb_channels + freq_channels, 1, 1}, 0.0));
  attn_bias = registry.add(prefix + ".attn.bias", channel_vector(2, 0.0));
  scale_rgb = registry.add(prefix + ".rgb.scale", channel_vector(rgb_channels, 0.0));
  bias_rgb = registry.add(prefix + ".rgb.bias", channel_vector(rgb_channels, 0.0));
  scale_freq = registry.add(prefix + ".freq.scale", channel_vector(freq_channels, 0.0));
  bias_freq = registry.add(prefix + ".freq.bias", channel_vector(freq_channels, 0.0));
}

Tensor MutualEnhance::attention(Graph& g, const Tensor& f_rgb, const Tensor& f_freq) const {
  const Dims& a = f_rgb.dims();
  const Dims& b = f_freq.dims();
  if (a.n != b.n || a.h != b.h || a.w != b.w) {
    throw ShapeError(fmt::format("mutual enhancement: stream dims {} and {} are not spatially aligned",
                                 to_string(a), to_string(b)));
  }
  return sigmoid(g, conv_pointwise(g, concat_channels(g, f_rgb, f_freq), attn_weight, attn_bias));
}

std::pair<Tensor, Tensor> MutualEnhance::forward(Graph& g, const Tensor& f_rgb, const Tensor& f_freq) const {
  const Tensor maps = attention(g, f_rgb, f_freq);
  const Tensor a_rgb = expand_channels(g, slice_channels(g, maps, 0, 1), f_rgb.dims().c);
  const Tensor a_freq = expand_channels(g, slice_channels(g, maps, 1, 1), f_freq.dims().c);
  Tensor out_rgb = add(g, f_rgb, conv_depthwise_1x1(g, mul(g, f_rgb, a_rgb), scale_rgb, bias_rgb));
  Tensor out_freq = add(g, f_freq, conv_depthwise_1x1(g, mul(g, f_freq, a_freq), scale_freq, bias_freq));
  return {std::move(out_rgb), std::move(out_freq)};
}

SpatialAttention::SpatialAttention(const std::string& prefix, std::size_t channels, ParameterRegistry& registry) {
  attn_weight = registry.add(prefix + ".attn.weight", Tensor(Dims{1, channels, 1, 1}, 0.0));
  attn_bias = registry.add(prefix + ".attn.bias", channel_vector(1, 0.0));
  scale = registry.add(prefix + ".scale", channel_vector(channels, 0.0));
  bias = registry.add(prefix + ".bias", channel_vector(channels, 0.0));
}

Tensor SpatialAttention::forward(Graph& g, const Tensor& f_in) const {
  const Tensor map = sigmoid(g, conv_pointwise(g, f_in, attn_weight, attn_bias));
  const Tensor a = expand_channels(g, map, f_in.dims().c);
  return add(g, f_in, conv_depthwise_1x1(g, mul(g, f_in, a), scale, bias));
}

Tensor self_enhance(Graph& g, const Tensor& f_in, const NoiseBlock* noise, const ChannelAttention* attn) {
  Tensor f = f_in;
  if (noise != nullptr) f = noise->forward(g, f);
  if (attn != nullptr) f = attn->forward(g, f);
  return f;
}

std::vector<SitePlan> placement_plan(std::size_t num_blocks) {
  if (num_blocks < 3) throw ConfigError(fmt::format("placement needs at least 3 blocks, got {}", num_blocks));
  std::vector<SitePlan> plan(num_blocks);
  for (std::size_t b = 1; b <= num_blocks; ++b) {
    SitePlan& site = plan[b - 1];
    site.noise = b <= 2;
    site.channel_attn = b >= 2 && b <= num_blocks - 1;
    site.mutual = site.channel_attn;
  }
  return plan;
}

}  // namespace pel
