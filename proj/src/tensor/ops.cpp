#include "cardiospike/tensor/ops.hpp"

#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>

#include <Eigen/Core>

namespace cardiospike::tensor {

namespace {

[[noreturn]] void shape_error(const char* op, const std::string& what) {
    throw std::invalid_argument(std::string(op) + ": " + what);
}

void require_rank(const char* op, const Value& v, std::size_t rank, const char* name) {
    if (!v.defined()) {
        shape_error(op, std::string(name) + " is undefined");
    }
    if (v.rank() != rank) {
        shape_error(op, std::string(name) + " must have rank " + std::to_string(rank) + ", got " +
                            shape_string(v.shape()));
    }
}

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

Eigen::Map<const RowMajor> as_matrix(std::span<const double> s, std::size_t rows, std::size_t cols) {
    return {s.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols)};
}
Eigen::Map<RowMajor> as_matrix(std::span<double> s, std::size_t rows, std::size_t cols) {
    return {s.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols)};
}
Eigen::Map<const Eigen::RowVectorXd> as_row(std::span<const double> s) {
    return {s.data(), static_cast<Eigen::Index>(s.size())};
}
Eigen::Map<Eigen::RowVectorXd> as_row(std::span<double> s) { return {s.data(), static_cast<Eigen::Index>(s.size())}; }

template <typename... Vs>
bool any_requires_grad(const Vs&... vs) {
    return grad_enabled() && (vs.requires_grad() || ...);
}

}  // namespace

double gelu_scalar(double x) { return x * (0.5 * std::erfc(-x / std::sqrt(2.0))); }

double sigmoid_scalar(double x) {
    if (x >= 0.0) {
        return 1.0 / (1.0 + std::exp(-x));
    }
    const double e = std::exp(x);
    return e / (1.0 + e);
}

Value conv1d_depthwise(Graph& graph, const Value& input, const Value& kernel, const Value& bias,
                       std::size_t dilation, Padding padding) {
    constexpr const char* op = "conv1d_depthwise";
    require_rank(op, input, 2, "input");
    require_rank(op, kernel, 2, "kernel");
    require_rank(op, bias, 1, "bias");
    const std::size_t steps = input.dim(0);
    const std::size_t channels = input.dim(1);
    const std::size_t k = kernel.dim(0);
    if (k % 2 == 0) {
        shape_error(op, "kernel size must be odd, got " + std::to_string(k));
    }
    if (dilation < 1) {
        shape_error(op, "dilation must be >= 1");
    }
    if (kernel.dim(1) != channels || bias.dim(0) != channels) {
        shape_error(op, "channel mismatch: input " + shape_string(input.shape()) + ", kernel " +
                            shape_string(kernel.shape()) + ", bias " + shape_string(bias.shape()));
    }

    // Source row for each (t, j); -1 marks a zero-padded tap.
    const auto half = static_cast<std::ptrdiff_t>(k / 2);
    const auto n = static_cast<std::ptrdiff_t>(steps);
    std::vector<std::ptrdiff_t> taps(steps * k);
    for (std::ptrdiff_t t = 0; t < n; ++t) {
        for (std::ptrdiff_t j = 0; j < static_cast<std::ptrdiff_t>(k); ++j) {
            std::ptrdiff_t src = t + (j - half) * static_cast<std::ptrdiff_t>(dilation);
            if (src < 0 || src >= n) {
                src = padding == Padding::replicate ? (src < 0 ? 0 : n - 1) : -1;
            }
            taps[static_cast<std::size_t>(t) * k + static_cast<std::size_t>(j)] = src;
        }
    }

    auto out = Value::zeros({steps, channels}, any_requires_grad(input, kernel, bias));
    {
        const auto x = input.data();
        const auto w = kernel.data();
        const auto b = bias.data();
        auto y = out.data();
        for (std::size_t t = 0; t < steps; ++t) {
            double* row = y.data() + t * channels;
            for (std::size_t c = 0; c < channels; ++c) {
                row[c] = b[c];
            }
            for (std::size_t j = 0; j < k; ++j) {
                const auto src = taps[t * k + j];
                if (src < 0) {
                    continue;
                }
                const double* xs = x.data() + static_cast<std::size_t>(src) * channels;
                const double* wj = w.data() + j * channels;
                for (std::size_t c = 0; c < channels; ++c) {
                    row[c] += wj[c] * xs[c];
                }
            }
        }
    }

    if (out.requires_grad()) {
        graph.record(out, [input = input, kernel = kernel, bias = bias, out, taps = std::move(taps), steps, channels, k]() mutable {
            const auto dy = out.grad();
            const auto x = input.data();
            const auto w = kernel.data();
            const bool gx = input.requires_grad();
            const bool gw = kernel.requires_grad();
            auto dx = input.grad();
            auto dw = kernel.grad();
            for (std::size_t t = 0; t < steps; ++t) {
                const double* g = dy.data() + t * channels;
                for (std::size_t j = 0; j < k; ++j) {
                    const auto src = taps[t * k + j];
                    if (src < 0) {
                        continue;
                    }
                    const auto s = static_cast<std::size_t>(src);
                    if (gx) {
                        double* dxs = dx.data() + s * channels;
                        const double* wj = w.data() + j * channels;
                        for (std::size_t c = 0; c < channels; ++c) {
                            dxs[c] += wj[c] * g[c];
                        }
                    }
                    if (gw) {
                        double* dwj = dw.data() + j * channels;
                        const double* xs = x.data() + s * channels;
                        for (std::size_t c = 0; c < channels; ++c) {
                            dwj[c] += xs[c] * g[c];
                        }
                    }
                }
            }
            if (bias.requires_grad()) {
                auto db = bias.grad();
                for (std::size_t t = 0; t < steps; ++t) {
                    for (std::size_t c = 0; c < channels; ++c) {
                        db[c] += dy[t * channels + c];
                    }
                }
            }
        });
    }
    return out;
}

Value channel_mix(Graph& graph, const Value& input, const Value& weight, const Value& bias) {
    constexpr const char* op = "channel_mix";
    if (!input.defined() || (input.rank() != 1 && input.rank() != 2)) {
        shape_error(op, "input must have rank 1 or 2");
    }
    require_rank(op, weight, 2, "weight");
    require_rank(op, bias, 1, "bias");
    const bool single_row = input.rank() == 1;
    const std::size_t steps = single_row ? 1 : input.dim(0);
    const std::size_t cin = single_row ? input.dim(0) : input.dim(1);
    const std::size_t cout = weight.dim(1);
    if (weight.dim(0) != cin || bias.dim(0) != cout) {
        shape_error(op, "shape mismatch: input " + shape_string(input.shape()) + ", weight " +
                            shape_string(weight.shape()) + ", bias " + shape_string(bias.shape()));
    }

    Shape out_shape = single_row ? Shape{cout} : Shape{steps, cout};
    auto out = Value::zeros(std::move(out_shape), any_requires_grad(input, weight, bias));
    {
        auto y = as_matrix(out.data(), steps, cout);
        y.noalias() = as_matrix(input.data(), steps, cin) * as_matrix(weight.data(), cin, cout);
        y.rowwise() += as_row(bias.data());
    }

    if (out.requires_grad()) {
        graph.record(out, [input = input, weight = weight, bias = bias, out, steps, cin, cout]() mutable {
            const auto dy = as_matrix(std::as_const(out).grad(), steps, cout);
            if (input.requires_grad()) {
                as_matrix(input.grad(), steps, cin).noalias() += dy * as_matrix(weight.data(), cin, cout).transpose();
            }
            if (weight.requires_grad()) {
                as_matrix(weight.grad(), cin, cout).noalias() += as_matrix(input.data(), steps, cin).transpose() * dy;
            }
            if (bias.requires_grad()) {
                as_row(bias.grad()) += dy.colwise().sum();
            }
        });
    }
    return out;
}

Value gelu(Graph& graph, const Value& input) {
    auto out = Value::zeros(input.shape(), any_requires_grad(input));
    const auto x = input.data();
    auto y = out.data();
    if (!out.requires_grad()) {
        for (std::size_t i = 0; i < x.size(); ++i) {
            y[i] = gelu_scalar(x[i]);
        }
        return out;
    }
    std::vector<double> cdf(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        cdf[i] = 0.5 * std::erfc(-x[i] / std::sqrt(2.0));
        y[i] = x[i] * cdf[i];
    }
    graph.record(out, [input = input, out, cdf = std::move(cdf)]() mutable {
        constexpr double inv_sqrt_2pi = 0.39894228040143267794;
        const auto x = input.data();
        const auto dy = std::as_const(out).grad();
        auto dx = input.grad();
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double pdf = inv_sqrt_2pi * std::exp(-0.5 * x[i] * x[i]);
            dx[i] += dy[i] * (cdf[i] + x[i] * pdf);
        }
    });
    return out;
}

Value sigmoid(Graph& graph, const Value& input) {
    auto out = Value::zeros(input.shape(), any_requires_grad(input));
    const auto x = input.data();
    auto y = out.data();
    for (std::size_t i = 0; i < x.size(); ++i) {
        y[i] = sigmoid_scalar(x[i]);
    }
    if (out.requires_grad()) {
        graph.record(out, [input = input, out]() mutable {
            const auto y = out.data();
            const auto dy = out.grad();
            auto dx = input.grad();
            for (std::size_t i = 0; i < y.size(); ++i) {
                dx[i] += dy[i] * y[i] * (1.0 - y[i]);
            }
        });
    }
    return out;
}

Value mean_over_time(Graph& graph, const Value& input) {
    constexpr const char* op = "mean_over_time";
    require_rank(op, input, 2, "input");
    const std::size_t steps = input.dim(0);
    const std::size_t channels = input.dim(1);
    auto out = Value::zeros({channels}, any_requires_grad(input));
    const auto x = input.data();
    auto y = out.data();
    for (std::size_t t = 0; t < steps; ++t) {
        for (std::size_t c = 0; c < channels; ++c) {
            y[c] += x[t * channels + c];
        }
    }
    const double inv = 1.0 / static_cast<double>(steps);
    for (auto& v : y) {
        v *= inv;
    }
    if (out.requires_grad()) {
        graph.record(out, [input = input, out, steps, channels, inv]() mutable {
            const auto dy = out.grad();
            auto dx = input.grad();
            for (std::size_t t = 0; t < steps; ++t) {
                for (std::size_t c = 0; c < channels; ++c) {
                    dx[t * channels + c] += dy[c] * inv;
                }
            }
        });
    }
    return out;
}

Value crop_time(Graph& graph, const Value& input, std::size_t left, std::size_t right) {
    constexpr const char* op = "crop_time";
    require_rank(op, input, 2, "input");
    const std::size_t steps = input.dim(0);
    const std::size_t channels = input.dim(1);
    if (left + right >= steps) {
        shape_error(op, "cannot crop " + std::to_string(left) + "+" + std::to_string(right) + " from length " +
                            std::to_string(steps));
    }
    const std::size_t kept = steps - left - right;
    auto out = Value::zeros({kept, channels}, any_requires_grad(input));
    const auto x = input.data();
    auto y = out.data();
    std::copy(x.begin() + static_cast<std::ptrdiff_t>(left * channels),
              x.begin() + static_cast<std::ptrdiff_t>((left + kept) * channels), y.begin());
    if (out.requires_grad()) {
        graph.record(out, [input = input, out, left, channels]() mutable {
            const auto dy = out.grad();
            auto dx = input.grad();
            const std::size_t offset = left * channels;
            for (std::size_t i = 0; i < dy.size(); ++i) {
                dx[offset + i] += dy[i];
            }
        });
    }
    return out;
}

Value scale_channels(Graph& graph, const Value& input, const Value& gate) {
    constexpr const char* op = "scale_channels";
    require_rank(op, input, 2, "input");
    require_rank(op, gate, 1, "gate");
    const std::size_t steps = input.dim(0);
    const std::size_t channels = input.dim(1);
    if (gate.dim(0) != channels) {
        shape_error(op, "gate " + shape_string(gate.shape()) + " does not match input " +
                            shape_string(input.shape()));
    }
    auto out = Value::zeros(input.shape(), any_requires_grad(input, gate));
    const auto x = input.data();
    const auto g = gate.data();
    auto y = out.data();
    for (std::size_t t = 0; t < steps; ++t) {
        for (std::size_t c = 0; c < channels; ++c) {
            y[t * channels + c] = x[t * channels + c] * g[c];
        }
    }
    if (out.requires_grad()) {
        graph.record(out, [input = input, gate = gate, out, steps, channels]() mutable {
            const auto dy = out.grad();
            if (input.requires_grad()) {
                const auto g = gate.data();
                auto dx = input.grad();
                for (std::size_t t = 0; t < steps; ++t) {
                    for (std::size_t c = 0; c < channels; ++c) {
                        dx[t * channels + c] += dy[t * channels + c] * g[c];
                    }
                }
            }
            if (gate.requires_grad()) {
                const auto x = input.data();
                auto dg = gate.grad();
                for (std::size_t t = 0; t < steps; ++t) {
                    for (std::size_t c = 0; c < channels; ++c) {
                        dg[c] += dy[t * channels + c] * x[t * channels + c];
                    }
                }
            }
        });
    }
    return out;
}

Value add(Graph& graph, const Value& a, const Value& b) {
    if (a.shape() != b.shape()) {
        shape_error("add", shape_string(a.shape()) + " vs " + shape_string(b.shape()));
    }
    auto out = Value::zeros(a.shape(), any_requires_grad(a, b));
    const auto x = a.data();
    const auto z = b.data();
    auto y = out.data();
    for (std::size_t i = 0; i < y.size(); ++i) {
        y[i] = x[i] + z[i];
    }
    if (out.requires_grad()) {
        graph.record(out, [a = a, b = b, out]() mutable {
            const auto dy = out.grad();
            for (Value* v : {&a, &b}) {
                if (v->requires_grad()) {
                    auto dv = v->grad();
                    for (std::size_t i = 0; i < dy.size(); ++i) {
                        dv[i] += dy[i];
                    }
                }
            }
        });
    }
    return out;
}

Value mul(Graph& graph, const Value& a, const Value& b) {
    if (a.shape() != b.shape()) {
        shape_error("mul", shape_string(a.shape()) + " vs " + shape_string(b.shape()));
    }
    auto out = Value::zeros(a.shape(), any_requires_grad(a, b));
    const auto x = a.data();
    const auto z = b.data();
    auto y = out.data();
    for (std::size_t i = 0; i < y.size(); ++i) {
        y[i] = x[i] * z[i];
    }
    if (out.requires_grad()) {
        graph.record(out, [a = a, b = b, out]() mutable {
            const auto dy = out.grad();
            const auto x = a.data();
            const auto z = b.data();
            if (a.requires_grad()) {
                auto da = a.grad();
                for (std::size_t i = 0; i < dy.size(); ++i) {
                    da[i] += dy[i] * z[i];
                }
            }
            if (b.requires_grad()) {
                auto db = b.grad();
                for (std::size_t i = 0; i < dy.size(); ++i) {
                    db[i] += dy[i] * x[i];
                }
            }
        });
    }
    return out;
}

Value sum(Graph& graph, const Value& input) {
    double total = 0.0;
    for (double v : input.data()) {
        total += v;
    }
    auto out = Value::scalar(total, any_requires_grad(input));
    if (out.requires_grad()) {
        graph.record(out, [input = input, out]() mutable {
            const double g = out.grad()[0];
            for (auto& d : input.grad()) {
                d += g;
            }
        });
    }
    return out;
}

}  // namespace cardiospike::tensor
