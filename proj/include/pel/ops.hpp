#pragma once

#include <cstddef>
#include <span>
#include <utility>

#include "pel/tensor.hpp"

// Differentiable operations. Every op takes the graph it records onto; with
// an inference graph (or with no tracked input) nothing is recorded.
//
// Parameter layouts:
//   pointwise weight  (c_out, c_in, 1, 1), bias (1, c_out, 1, 1)
//   conv3x3 weight    (c_out, c_in, 3, 3), bias (1, c_out, 1, 1)
//   depthwise scale   (1, c, 1, 1),        bias (1, c, 1, 1)
// An empty Tensor() passed as bias means "no bias".
namespace pel {

Tensor add(Graph& g, const Tensor& a, const Tensor& b);
Tensor sub(Graph& g, const Tensor& a, const Tensor& b);
Tensor mul(Graph& g, const Tensor& a, const Tensor& b);
Tensor scale(Graph& g, const Tensor& x, double factor);

Tensor sigmoid(Graph& g, const Tensor& x);
Tensor relu(Graph& g, const Tensor& x);

Tensor conv_pointwise(Graph& g, const Tensor& x, const Tensor& weight, const Tensor& bias);
Tensor conv_depthwise_1x1(Graph& g, const Tensor& x, const Tensor& scale, const Tensor& bias);
Tensor conv3x3(Graph& g, const Tensor& x, const Tensor& weight, const Tensor& bias, std::size_t stride);

/// Grouped 1x1 reduction of `groups` stacked c-channel maps back to c
/// channels: out[k] = sum_g weight[k, g] * x[g*c + k] + bias[k].
/// weight dims (c, groups, 1, 1).
Tensor grouped_reduce(Graph& g, const Tensor& x, const Tensor& weight, const Tensor& bias);

/// kernel x kernel median over replicate-padded neighbourhoods, per channel.
/// The backward pass routes each output gradient to the lowest flat input
/// index holding the median value.
Tensor median_filter(Graph& g, const Tensor& x, std::size_t kernel);
Tensor mean_filter(Graph& g, const Tensor& x, std::size_t kernel);

Tensor gap(Graph& g, const Tensor& x);
/// Global max pooling; ties resolve to the first position in row-major order.
Tensor gmp(Graph& g, const Tensor& x);

/// Two-layer bias-free perceptron with a rectifier between the layers,
/// applied to each sample's (c,1,1) channel vector. w1 (hidden, c, 1, 1),
/// w2 (c, hidden, 1, 1).
Tensor mlp2(Graph& g, const Tensor& x, const Tensor& w1, const Tensor& w2);

Tensor concat_channels(Graph& g, const Tensor& a, const Tensor& b);
Tensor slice_channels(Graph& g, const Tensor& x, std::size_t begin, std::size_t count);

/// (n, c, 1, 1) -> (n, c, h, w)
Tensor expand_spatial(Graph& g, const Tensor& x, std::size_t h, std::size_t w);
/// (n, 1, h, w) -> (n, c, h, w)
Tensor expand_channels(Graph& g, const Tensor& x, std::size_t c);

/// Sum of all elements as a (1,1,1,1) tensor.
Tensor sum(Graph& g, const Tensor& x);

}  // namespace pel
