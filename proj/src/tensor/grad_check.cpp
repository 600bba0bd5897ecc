#include "cardiospike/tensor/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace cardiospike::tensor {

GradCheckResult grad_check(const ScalarFn& f, Value input, const GradCheckOptions& options) {
    if (!input.requires_grad()) {
        throw std::invalid_argument("grad_check: input must require a gradient");
    }
    input.zero_grad();
    {
        Graph graph;
        auto loss = f(graph, input);
        graph.backward(loss);
    }
    const std::vector<double> analytic(input.grad().begin(), input.grad().end());

    auto evaluate = [&]() {
        Graph graph;
        return f(graph, input).item();
    };

    const std::size_t n = input.size();
    const std::size_t stride =
        options.max_coordinates == 0 || options.max_coordinates >= n ? 1 : n / options.max_coordinates;

    GradCheckResult result;
    auto x = input.data();
    for (std::size_t i = 0; i < n; i += stride) {
        const double saved = x[i];
        x[i] = saved + options.step;
        const double up = evaluate();
        x[i] = saved - options.step;
        const double down = evaluate();
        x[i] = saved;

        const double numeric = (up - down) / (2.0 * options.step);
        const double denom = std::max({std::abs(analytic[i]), std::abs(numeric), options.denominator_floor});
        const double rel = std::abs(analytic[i] - numeric) / denom;
        ++result.coordinates_checked;
        if (rel > result.max_relative_error || result.coordinates_checked == 1) {
            result.max_relative_error = std::max(rel, result.max_relative_error);
            result.worst_index = i;
            result.analytic = analytic[i];
            result.numeric = numeric;
        }
    }
    return result;
}

}  // namespace cardiospike::tensor
