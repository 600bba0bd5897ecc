#include "cardiospike/tensor/value.hpp"

#include <algorithm>
#include <stdexcept>

namespace cardiospike::tensor {

std::size_t element_count(const Shape& shape) {
    std::size_t n = 1;
    for (auto d : shape) {
        n *= d;
    }
    return n;
}

std::string shape_string(const Shape& shape) {
    std::string out = "(";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i > 0) {
            out += ", ";
        }
        out += std::to_string(shape[i]);
    }
    return out + ")";
}

namespace {
thread_local bool g_grad_enabled = true;

void validate_shape(const Shape& shape) {
    for (auto d : shape) {
        if (d == 0) {
            throw std::invalid_argument("tensor: zero-sized dimension in shape " + shape_string(shape));
        }
    }
}
}  // namespace

Value Value::zeros(Shape shape, bool requires_grad) {
    validate_shape(shape);
    const auto n = element_count(shape);
    return from(std::move(shape), std::vector<double>(n, 0.0), requires_grad);
}

Value Value::from(Shape shape, std::vector<double> data, bool requires_grad) {
    validate_shape(shape);
    if (element_count(shape) != data.size()) {
        throw std::invalid_argument("tensor: shape " + shape_string(shape) + " does not match " +
                                    std::to_string(data.size()) + " elements");
    }
    auto node = std::make_shared<detail::Node>();
    node->shape = std::move(shape);
    node->data = std::move(data);
    node->requires_grad = requires_grad;
    return Value(std::move(node));
}

Value Value::scalar(double v, bool requires_grad) { return from({1}, {v}, requires_grad); }

void Value::zero_grad() { std::fill(node_->grad.begin(), node_->grad.end(), 0.0); }

double Value::item() const {
    if (size() != 1) {
        throw std::invalid_argument("tensor: item() on non-scalar of shape " + shape_string(shape()));
    }
    return node_->data[0];
}

Value Value::clone() const { return from(node_->shape, node_->data, node_->requires_grad); }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }
bool grad_enabled() noexcept { return g_grad_enabled; }

void Graph::record(const Value& output, BackwardFn backward) {
    tape_.push_back(Entry{output, std::move(backward)});
}

bool Graph::produced(const Value& v) const {
    return std::any_of(tape_.begin(), tape_.end(), [&](const Entry& e) { return e.output.same_node(v); });
}

void Graph::backward(const Value& loss) {
    if (!loss.defined() || loss.size() != 1) {
        throw std::invalid_argument("backward: loss must be a scalar");
    }
    const bool from_tape = produced(loss);
    if (!from_tape && !loss.requires_grad()) {
        throw std::invalid_argument("backward: loss was not produced by this graph");
    }
    for (auto& entry : tape_) {
        entry.output.zero_grad();
    }
    Value seed = loss;
    seed.grad()[0] += 1.0;
    for (auto it = tape_.rbegin(); it != tape_.rend(); ++it) {
        it->backward();
    }
}

}  // namespace cardiospike::tensor
