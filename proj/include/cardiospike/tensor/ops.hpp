#pragma once

#include <cstddef>

#include "cardiospike/tensor/value.hpp"

namespace cardiospike::tensor {

/// How conv1d_depthwise reads samples that fall outside [0, T).
enum class Padding {
    replicate,  // clamp to the boundary sample
    zero,
};

// Every op records its backward rule on `graph` only when some input requires
// a gradient; inference-only calls leave the tape empty.

/// Per-channel dilated convolution, centred, output length equals input length.
/// out[t,c] = bias[c] + sum_j kernel[j,c] * input[t + (j - (k-1)/2) * dilation, c]
Value conv1d_depthwise(Graph& graph, const Value& input, const Value& kernel, const Value& bias,
                       std::size_t dilation, Padding padding = Padding::replicate);

/// Per-timestep linear map. Accepts (T, Cin) or a single row (Cin).
Value channel_mix(Graph& graph, const Value& input, const Value& weight, const Value& bias);

/// x * Phi(x) with the exact erf form of the normal CDF.
Value gelu(Graph& graph, const Value& input);
Value sigmoid(Graph& graph, const Value& input);

/// (T, C) -> (C)
Value mean_over_time(Graph& graph, const Value& input);

/// (T, C) -> (T - left - right, C)
Value crop_time(Graph& graph, const Value& input, std::size_t left, std::size_t right);

/// Multiplies every timestep of (T, C) by a per-channel gate (C).
Value scale_channels(Graph& graph, const Value& input, const Value& gate);

Value add(Graph& graph, const Value& a, const Value& b);
Value mul(Graph& graph, const Value& a, const Value& b);
Value sum(Graph& graph, const Value& input);

double gelu_scalar(double x);
double sigmoid_scalar(double x);

}  // namespace cardiospike::tensor
