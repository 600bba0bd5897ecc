#include "cardiospike/training/loss.hpp"

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "cardiospike/tensor/ops.hpp"

namespace cardiospike::training {

namespace {

// Signed margin s: p_t = sigmoid(s), 1 - p_t = sigmoid(-s).
double margin(double logit, std::uint8_t target) { return target ? logit : -logit; }

double class_weight(std::uint8_t target, double alpha) { return target ? alpha : 1.0 - alpha; }

double focal_from_margin(double s, double weight, double gamma) {
    const double miss = tensor::sigmoid_scalar(-s);
    const double modulator = gamma == 0.0 ? 1.0 : std::pow(miss, gamma);
    return weight * modulator * softplus(-s);
}

// d FL / d s = -w * sigmoid(-s)^gamma * (gamma * sigmoid(s) * softplus(-s) + sigmoid(-s))
double focal_margin_derivative(double s, double weight, double gamma) {
    const double miss = tensor::sigmoid_scalar(-s);
    const double hit = tensor::sigmoid_scalar(s);
    const double modulator = gamma == 0.0 ? 1.0 : std::pow(miss, gamma);
    return -weight * modulator * (gamma * hit * softplus(-s) + miss);
}

}  // namespace

double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

double focal_loss_scalar(double logit, std::uint8_t target, double alpha, double gamma) {
    return focal_from_margin(margin(logit, target), class_weight(target, alpha), gamma);
}

tensor::Value focal_loss(tensor::Graph& graph, const tensor::Value& logits, std::span<const std::uint8_t> targets,
                         double alpha, double gamma) {
    if (logits.size() != targets.size()) {
        throw std::invalid_argument("focal_loss: " + std::to_string(logits.size()) + " logits vs " +
                                    std::to_string(targets.size()) + " targets");
    }
    if (!(alpha > 0.0 && alpha <= 1.0) || !(gamma >= 0.0)) {
        throw std::invalid_argument("focal_loss: need alpha in (0, 1] and gamma >= 0");
    }
    for (std::size_t i = 0; i < targets.size(); ++i) {
        if (targets[i] > 1) {
            throw std::invalid_argument("focal_loss: target " + std::to_string(i) + " is not binary");
        }
    }
    const auto z = logits.data();
    const double inv_n = 1.0 / static_cast<double>(z.size());
    double total = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) {
        total += focal_loss_scalar(z[i], targets[i], alpha, gamma);
    }
    auto out = tensor::Value::scalar(total * inv_n, logits.requires_grad());
    if (out.requires_grad()) {
        std::vector<std::uint8_t> t(targets.begin(), targets.end());
        graph.record(out, [logits = logits, out, t = std::move(t), alpha, gamma, inv_n]() mutable {
            const double g = out.grad()[0] * inv_n;
            const auto z = logits.data();
            auto dz = logits.grad();
            for (std::size_t i = 0; i < z.size(); ++i) {
                const double sign = t[i] ? 1.0 : -1.0;
                dz[i] += g * sign * focal_margin_derivative(margin(z[i], t[i]), class_weight(t[i], alpha), gamma);
            }
        });
    }
    return out;
}

}  // namespace cardiospike::training
