#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace cardiospike::tensor {

using Shape = std::vector<std::size_t>;

std::size_t element_count(const Shape& shape);
std::string shape_string(const Shape& shape);

namespace detail {
struct Node {
    Shape shape;
    std::vector<double> data;
    std::vector<double> grad;
    bool requires_grad = false;

    std::vector<double>& ensure_grad() {
        if (grad.size() != data.size()) {
            grad.assign(data.size(), 0.0);
        }
        return grad;
    }
};
}  // namespace detail

/// Handle to a row-major float64 array with an attached gradient buffer.
///
/// Copies share the underlying storage, so a parameter handle held by a model
/// and the same handle captured by a recorded graph refer to one array.
class Value {
public:
    Value() = default;

    static Value zeros(Shape shape, bool requires_grad = false);
    static Value from(Shape shape, std::vector<double> data, bool requires_grad = false);
    static Value scalar(double v, bool requires_grad = false);

    bool defined() const noexcept { return static_cast<bool>(node_); }

    const Shape& shape() const { return node_->shape; }
    std::size_t rank() const { return node_->shape.size(); }
    std::size_t dim(std::size_t axis) const { return node_->shape.at(axis); }
    std::size_t size() const { return node_->data.size(); }

    std::span<const double> data() const { return node_->data; }
    std::span<double> data() { return node_->data; }
    // The gradient buffer is allocated on first access.
    std::span<const double> grad() const { return node_->ensure_grad(); }
    std::span<double> grad() { return node_->ensure_grad(); }

    bool requires_grad() const { return node_->requires_grad; }
    void set_requires_grad(bool on) { node_->requires_grad = on; }
    void zero_grad();

    /// Value of a one-element array.
    double item() const;

    /// Deep copy with fresh zero gradient.
    Value clone() const;

    bool same_node(const Value& other) const noexcept { return node_ == other.node_; }

private:
    explicit Value(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}

    std::shared_ptr<detail::Node> node_;
};

/// Tape of recorded operations for reverse-mode accumulation.
///
/// Operations are appended in execution order, so the tape is already a
/// topological order; backward walks it once in reverse.
class Graph {
public:
    using BackwardFn = std::function<void()>;

    void record(const Value& output, BackwardFn backward);

    std::size_t size() const noexcept { return tape_.size(); }
    bool produced(const Value& v) const;

    /// Seeds d(loss)/d(loss) = 1 and propagates. Gradients of leaf values
    /// accumulate across calls; intermediate gradients are reset first.
    void backward(const Value& loss);

private:
    struct Entry {
        Value output;
        BackwardFn backward;
    };
    std::vector<Entry> tape_;
};

inline void backward(Graph& graph, const Value& loss) { graph.backward(loss); }

/// While alive, ops on this thread produce values that do not require a
/// gradient and record nothing.
class NoGradGuard {
public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool previous_;
};

bool grad_enabled() noexcept;

}  // namespace cardiospike::tensor
