#pragma once

#include <cstddef>
#include <functional>

#include "cardiospike/tensor/value.hpp"

namespace cardiospike::tensor {

/// Builds a scalar from `input` on a fresh graph.
using ScalarFn = std::function<Value(Graph&, const Value&)>;

struct GradCheckOptions {
    double step = 1e-5;
    /// Lower bound on the denominator of the relative error so that
    /// coordinates with a vanishing gradient are judged on absolute error.
    double denominator_floor = 1e-6;
    /// 0 checks every coordinate; otherwise an evenly strided subset.
    std::size_t max_coordinates = 0;
};

struct GradCheckResult {
    double max_relative_error = 0.0;
    std::size_t worst_index = 0;
    double analytic = 0.0;
    double numeric = 0.0;
    std::size_t coordinates_checked = 0;
};

/// Compares reverse-mode d f/d input with central differences
/// (f(x+h) - f(x-h)) / 2h, coordinate by coordinate. `input` is perturbed in
/// place and restored; it must require a gradient.
GradCheckResult grad_check(const ScalarFn& f, Value input, const GradCheckOptions& options = {});

inline double grad_check(const ScalarFn& f, Value input, double step) {
    GradCheckOptions options;
    options.step = step;
    return grad_check(f, std::move(input), options).max_relative_error;
}

}  // namespace cardiospike::tensor
