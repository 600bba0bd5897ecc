#include "cardiospike/training/adamw.hpp"

#include <cmath>

namespace cardiospike::training {

OptimizerState OptimizerState::for_params(const std::vector<model::NamedValue>& params) {
    OptimizerState state;
    for (const auto& p : params) {
        state.first_moment.emplace_back(p.value.size(), 0.0);
        state.second_moment.emplace_back(p.value.size(), 0.0);
    }
    return state;
}

std::size_t adamw_step(std::vector<model::NamedValue>& params, OptimizerState& state, const TrainConfig& config) {
    if (state.first_moment.size() != params.size() || state.second_moment.size() != params.size()) {
        throw std::invalid_argument("adamw_step: optimizer state does not match parameter list");
    }
    for (std::size_t p = 0; p < params.size(); ++p) {
        if (state.first_moment[p].size() != params[p].value.size()) {
            throw std::invalid_argument("adamw_step: moment shape mismatch for " + params[p].name);
        }
        for (double g : params[p].value.grad()) {
            if (!std::isfinite(g)) {
                throw NonFiniteGradient("adamw_step: non-finite gradient in " + params[p].name + " at step " +
                                        std::to_string(state.step + 1));
            }
        }
    }

    const auto t = static_cast<double>(++state.step);
    const double correction1 = 1.0 - std::pow(config.beta1, t);
    const double correction2 = 1.0 - std::pow(config.beta2, t);
    const double lr = config.learning_rate;
    const double decay = config.learning_rate * config.weight_decay;

    std::size_t touched = 0;
    for (std::size_t p = 0; p < params.size(); ++p) {
        auto w = params[p].value.data();
        const auto g = params[p].value.grad();
        auto& m = state.first_moment[p];
        auto& v = state.second_moment[p];
        for (std::size_t i = 0; i < w.size(); ++i) {
            m[i] = config.beta1 * m[i] + (1.0 - config.beta1) * g[i];
            v[i] = config.beta2 * v[i] + (1.0 - config.beta2) * g[i] * g[i];
            const double m_hat = m[i] / correction1;
            const double v_hat = v[i] / correction2;
            w[i] = w[i] - lr * m_hat / (std::sqrt(v_hat) + config.epsilon) - decay * w[i];
        }
        touched += w.size();
    }
    return touched;
}

}  // namespace cardiospike::training
