#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "cardiospike/model/detector.hpp"
#include "cardiospike/training/config.hpp"

namespace cardiospike::training {

struct OptimizerState {
    std::vector<std::vector<double>> first_moment;
    std::vector<std::vector<double>> second_moment;
    std::uint64_t step = 0;

    /// Zeroed moments shaped like `params`.
    static OptimizerState for_params(const std::vector<model::NamedValue>& params);
};

class NonFiniteGradient : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// One AdamW update over every tensor in `params` using their accumulated
/// gradients:
///   m = b1 m + (1 - b1) g,  v = b2 v + (1 - b2) g^2
///   w = w - lr * m_hat / (sqrt(v_hat) + eps) - lr * wd * w
/// Throws NonFiniteGradient, leaving weights and state untouched, if any
/// gradient is NaN or infinite. Returns the number of scalars updated.
std::size_t adamw_step(std::vector<model::NamedValue>& params, OptimizerState& state, const TrainConfig& config);

}  // namespace cardiospike::training
