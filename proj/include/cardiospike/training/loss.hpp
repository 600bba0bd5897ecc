#pragma once

#include <cstdint>
#include <span>

#include "cardiospike/tensor/value.hpp"

namespace cardiospike::training {

/// Mean binary focal loss over all logits:
///   FL = -alpha_t * (1 - p_t)^gamma * log(p_t),  p = sigmoid(logit)
/// with alpha_t = alpha for target 1 and 1 - alpha for target 0. Evaluated
/// through softplus so |logit| up to 700 stays finite.
tensor::Value focal_loss(tensor::Graph& graph, const tensor::Value& logits, std::span<const std::uint8_t> targets,
                         double alpha, double gamma);

/// Single-sample focal loss, same formulation as focal_loss.
double focal_loss_scalar(double logit, std::uint8_t target, double alpha, double gamma);

double softplus(double x);

}  // namespace cardiospike::training
