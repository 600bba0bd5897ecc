#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "cardiospike/model/config.hpp"
#include "cardiospike/tensor/value.hpp"

namespace cardiospike::model {

using tensor::Graph;
using tensor::Value;

/// Weight and bias of a per-timestep channel mix (Cin -> Cout).
struct Linear {
    Value weight;  // (Cin, Cout)
    Value bias;    // (Cout)
};

struct DepthwiseConv {
    Value kernel;  // (k, H)
    Value bias;    // (H)
    std::size_t dilation = 1;
};

/// One residual base block: expand, dilated depthwise conv, squeeze-excite
/// gate, compress back to the residual width, and a skip projection.
struct BlockParams {
    Linear expand;     // C -> H
    DepthwiseConv conv;
    Linear se_reduce;  // H -> ceil(H / r)
    Linear se_expand;  // ceil(H / r) -> H
    Linear compress;   // H -> C
    Linear skip;       // C -> S
};

struct HeadParams {
    Linear hidden;  // S -> S
    Linear out;     // S -> M
};

struct NamedValue {
    std::string name;
    Value value;
};

struct DetectorParams {
    Linear embed;                                 // 1 -> C
    std::vector<std::vector<BlockParams>> stacks;  // [filters][layers]
    HeadParams head;

    /// Every learnable tensor in a fixed order with stable dotted names,
    /// e.g. "stack1.block3.conv.kernel".
    std::vector<NamedValue> named() const;

    std::size_t scalar_count() const;
    void zero_grad();
    void set_requires_grad(bool on);
    DetectorParams clone() const;
    bool all_finite() const;
};

struct BlockOutput {
    Value y;     // (T, C)
    Value skip;  // (T - 2 * crop, S)
};

BlockOutput residual_block_forward(Graph& graph, const Value& x, const BlockParams& block, std::size_t crop,
                                   tensor::Padding padding = tensor::Padding::replicate);

Value head_forward(Graph& graph, const Value& skip_sum, const HeadParams& head);

/// (T, 1) normalized RR segment -> (T - 2P, M) logits.
Value detector_forward(Graph& graph, const Value& rr, const DetectorParams& params, const DetectorConfig& config);

/// Inference helper: sigmoid probabilities of class 0 for one normalized segment.
std::vector<double> predict_segment(const DetectorParams& params, const DetectorConfig& config,
                                    std::span<const double> normalized_input);

/// Fan-in scaled uniform weights in +-sqrt(6 / fan_in), zero biases.
DetectorParams init_params(const DetectorConfig& config, std::uint64_t seed);

/// Zero-filled parameters with the layout `config` implies.
DetectorParams zero_params(const DetectorConfig& config);

std::size_t param_count(const DetectorConfig& config);

}  // namespace cardiospike::model
