#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

#include "cardiospike/tensor/ops.hpp"

namespace cardiospike::model {

/// Architecture hyperparameters of the spike detector.
///
/// Defaults are the configuration the detector was tuned with:
/// kernel 3, 32 base channels, 40 hidden, 72 side channels, 4 layers per
/// stack, 2 stacks, 32-sample segments with a 4-sample margin, 1 class.
struct DetectorConfig {
    std::size_t kernel_size = 3;   // k
    std::size_t channels = 32;     // C, base width of the residual stream
    std::size_t hidden = 40;       // H, expanded width inside a block
    std::size_t side = 72;         // S, width of the skip branches
    std::size_t layers = 4;        // L, blocks per stack
    std::size_t filters = 2;       // F, parallel stacks
    std::size_t length = 32;       // T, input samples per segment
    std::size_t pad = 4;           // P, margin cropped from each side
    std::size_t classes = 1;       // M

    std::size_t se_reduction = 4;  // H -> ceil(H / r) -> H inside the gate
    tensor::Padding padding = tensor::Padding::replicate;

    std::size_t target_length() const { return length - 2 * pad; }
    std::size_t se_width() const { return (hidden + se_reduction - 1) / se_reduction; }

    /// Throws std::invalid_argument describing the first violated constraint.
    void validate() const;

    std::string describe() const;

    friend bool operator==(const DetectorConfig&, const DetectorConfig&) = default;
};

/// Keys match the field names; padding is "replicate" or "zero". Missing
/// keys keep their defaults, unknown keys are rejected.
std::string detector_config_to_json(const DetectorConfig& config);
DetectorConfig detector_config_from_json(const std::string& text);

/// Dilation of layer n (1-based) in a stack: k^(n-1).
std::size_t dilation_for_layer(std::size_t layer, std::size_t kernel_size);

/// Span of inputs seen by one output after `layers` dilated layers:
/// (k - 1) * sum_{i=1..L} k^(i-1) + 1.
std::size_t receptive_field(std::size_t kernel_size, std::size_t layers);

}  // namespace cardiospike::model
