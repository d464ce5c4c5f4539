#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "pel/config.hpp"
#include "pel/enhance.hpp"
#include "pel/image.hpp"
#include "pel/tensor.hpp"

namespace pel {

/// Per-band standardisation applied to the flat DCT input before the learned
/// band reduction. Computed once from training images.
struct FreqStats {
  std::vector<double> mean = std::vector<double>(192, 0.0);
  std::vector<double> stddev = std::vector<double>(192, 1.0);
};

FreqStats compute_freq_stats(std::span<const RgbImage> images, std::size_t window_stride);

/// Network-ready inputs for a batch of images.
struct Batch {
  Tensor rgb;   // (n, 3, S, S) scaled to [0, 1]; empty without an rgb stream
  Tensor freq;  // (n, 192, H2, W2) standardised; empty without a freq stream
  std::size_t size() const;
};

/// Intermediate features of one stream, indexed by block (0 = block 1).
struct StreamTrace {
  std::vector<Tensor> block_out;   // after the two convolutions
  std::vector<Tensor> noise_out;   // after the noise block (== block_out if none)
  std::vector<Tensor> self_out;    // after self-enhancement (== block_out if none)
  std::vector<Tensor> features;    // what the next block consumes
};

struct ForwardTrace {
  StreamTrace rgb;
  StreamTrace freq;
};

/// Two-stream network: per stream num_blocks x (conv3x3 -> relu -> conv3x3/2
/// -> relu), enhancement modules at the sites given by placement_plan, and a
/// linear head over the concatenated GAP features of both streams.
class PelNetwork {
 public:
  explicit PelNetwork(NetworkConfig cfg);
  PelNetwork(const PelNetwork&) = delete;
  PelNetwork& operator=(const PelNetwork&) = delete;
  PelNetwork(PelNetwork&&) = default;

  const NetworkConfig& config() const { return cfg_; }
  ParameterRegistry& parameters() { return params_; }
  const ParameterRegistry& parameters() const { return params_; }

  const FreqStats& freq_stats() const { return stats_; }
  void set_freq_stats(FreqStats stats);

  Batch make_batch(std::span<const RgbImage* const> images) const;
  Batch make_batch(std::span<const RgbImage> images) const;

  /// Logits (n, 1, 1, 1).
  Tensor forward(Graph& g, const Batch& batch, ForwardTrace* trace = nullptr) const;

  /// Inference-mode logits, evaluated in chunks of the configured batch size.
  std::vector<double> predict_logits(std::span<const RgbImage* const> images) const;
  double predict_logit(const RgbImage& image) const;

  std::size_t head_features() const;

 private:
  struct ConvBlock {
    Tensor w1, b1, w2, b2;
    std::size_t first_stride = 1;
  };
  struct Site {
    std::optional<NoiseBlock> noise;
    std::optional<ChannelAttention> attn;
    std::optional<SpatialAttention> spatial;
  };
  struct Stream {
    std::vector<ConvBlock> blocks;
    std::vector<Site> sites;
  };

  void build_stream(Stream& s, const char* name, std::size_t in_channels, std::size_t first_stride,
                    std::mt19937_64& rng);
  Tensor run_block(Graph& g, const ConvBlock& b, const Tensor& x) const;

  NetworkConfig cfg_;
  ParameterRegistry params_;
  std::optional<Stream> rgb_;
  std::optional<Stream> freq_;
  Tensor reduce_w_, reduce_b_;
  std::vector<std::optional<MutualEnhance>> mutual_;
  Tensor head_w_, head_b_;
  FreqStats stats_;
};

/// Mean binary cross-entropy over logits (n,1,1,1) and {0,1} labels, using
/// max(z,0) - z*y + log(1 + exp(-|z|)).
Tensor bce_loss(Graph& g, const Tensor& logits, std::span<const int> labels);

double sigmoid_scalar(double z);

}  // namespace pel
