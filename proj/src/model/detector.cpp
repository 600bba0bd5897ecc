#include "cardiospike/model/detector.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

#include "cardiospike/tensor/ops.hpp"

namespace cardiospike::model {

namespace ops = cardiospike::tensor;

namespace {

Linear make_linear(std::size_t in, std::size_t out) {
    return Linear{Value::zeros({in, out}, true), Value::zeros({out}, true)};
}

Value mix(Graph& graph, const Value& x, const Linear& lin) { return ops::channel_mix(graph, x, lin.weight, lin.bias); }

void append_linear(std::vector<NamedValue>& out, const std::string& prefix, const Linear& lin) {
    out.push_back({prefix + ".weight", lin.weight});
    out.push_back({prefix + ".bias", lin.bias});
}

std::size_t linear_count(std::size_t in, std::size_t out) { return in * out + out; }

}  // namespace

std::vector<NamedValue> DetectorParams::named() const {
    std::vector<NamedValue> out;
    append_linear(out, "embed", embed);
    for (std::size_t f = 0; f < stacks.size(); ++f) {
        for (std::size_t l = 0; l < stacks[f].size(); ++l) {
            const auto& b = stacks[f][l];
            const std::string prefix = "stack" + std::to_string(f) + ".block" + std::to_string(l);
            append_linear(out, prefix + ".expand", b.expand);
            out.push_back({prefix + ".conv.kernel", b.conv.kernel});
            out.push_back({prefix + ".conv.bias", b.conv.bias});
            append_linear(out, prefix + ".se_reduce", b.se_reduce);
            append_linear(out, prefix + ".se_expand", b.se_expand);
            append_linear(out, prefix + ".compress", b.compress);
            append_linear(out, prefix + ".skip", b.skip);
        }
    }
    append_linear(out, "head.hidden", head.hidden);
    append_linear(out, "head.out", head.out);
    return out;
}

std::size_t DetectorParams::scalar_count() const {
    std::size_t n = 0;
    for (const auto& p : named()) {
        n += p.value.size();
    }
    return n;
}

void DetectorParams::zero_grad() {
    for (auto& p : named()) {
        p.value.zero_grad();
    }
}

void DetectorParams::set_requires_grad(bool on) {
    for (auto& p : named()) {
        p.value.set_requires_grad(on);
    }
}

DetectorParams DetectorParams::clone() const {
    // Copying the struct shares storage; rebind every slot to a deep copy.
    DetectorParams copy = *this;
    auto rebind = [](Linear& lin) {
        lin.weight = lin.weight.clone();
        lin.bias = lin.bias.clone();
    };
    rebind(copy.embed);
    for (auto& stack : copy.stacks) {
        for (auto& b : stack) {
            rebind(b.expand);
            b.conv.kernel = b.conv.kernel.clone();
            b.conv.bias = b.conv.bias.clone();
            rebind(b.se_reduce);
            rebind(b.se_expand);
            rebind(b.compress);
            rebind(b.skip);
        }
    }
    rebind(copy.head.hidden);
    rebind(copy.head.out);
    return copy;
}

bool DetectorParams::all_finite() const {
    for (const auto& p : named()) {
        for (double v : p.value.data()) {
            if (!std::isfinite(v)) {
                return false;
            }
        }
    }
    return true;
}

BlockOutput residual_block_forward(Graph& graph, const Value& x, const BlockParams& block, std::size_t crop,
                                   tensor::Padding padding) {
    auto u = ops::gelu(graph, mix(graph, x, block.expand));
    auto v = ops::gelu(graph, ops::conv1d_depthwise(graph, u, block.conv.kernel, block.conv.bias,
                                                    block.conv.dilation, padding));

    auto squeezed = ops::mean_over_time(graph, v);
    auto excited = ops::gelu(graph, mix(graph, squeezed, block.se_reduce));
    auto gate = ops::sigmoid(graph, mix(graph, excited, block.se_expand));
    auto w = ops::scale_channels(graph, v, gate);

    auto y = ops::add(graph, x, mix(graph, w, block.compress));
    auto skip = mix(graph, ops::crop_time(graph, y, crop, crop), block.skip);
    return {y, skip};
}

Value head_forward(Graph& graph, const Value& skip_sum, const HeadParams& head) {
    return mix(graph, ops::gelu(graph, mix(graph, skip_sum, head.hidden)), head.out);
}

Value detector_forward(Graph& graph, const Value& rr, const DetectorParams& params, const DetectorConfig& config) {
    if (rr.rank() != 2 || rr.dim(0) != config.length || rr.dim(1) != 1) {
        throw std::invalid_argument("detector_forward: expected input (" + std::to_string(config.length) +
                                    ", 1), got " + tensor::shape_string(rr.shape()));
    }
    if (params.stacks.size() != config.filters) {
        throw std::invalid_argument("detector_forward: parameters hold " + std::to_string(params.stacks.size()) +
                                    " stacks, config expects " + std::to_string(config.filters));
    }
    auto embedded = mix(graph, rr, params.embed);
    Value skip_sum;
    for (const auto& stack : params.stacks) {
        Value h = embedded;
        for (const auto& block : stack) {
            auto out = residual_block_forward(graph, h, block, config.pad, config.padding);
            h = out.y;
            skip_sum = skip_sum.defined() ? ops::add(graph, skip_sum, out.skip) : out.skip;
        }
    }
    return head_forward(graph, skip_sum, params.head);
}

std::vector<double> predict_segment(const DetectorParams& params, const DetectorConfig& config,
                                    std::span<const double> normalized_input) {
    Graph graph;
    auto input = Value::from({config.length, 1}, std::vector<double>(normalized_input.begin(), normalized_input.end()));
    auto logits = detector_forward(graph, input, params, config);
    std::vector<double> probs(config.target_length());
    const auto z = logits.data();
    for (std::size_t t = 0; t < probs.size(); ++t) {
        probs[t] = ops::sigmoid_scalar(z[t * config.classes]);
    }
    return probs;
}

DetectorParams zero_params(const DetectorConfig& config) {
    config.validate();
    DetectorParams p;
    p.embed = make_linear(1, config.channels);
    p.stacks.resize(config.filters);
    for (auto& stack : p.stacks) {
        for (std::size_t l = 1; l <= config.layers; ++l) {
            BlockParams b;
            b.expand = make_linear(config.channels, config.hidden);
            b.conv.kernel = Value::zeros({config.kernel_size, config.hidden}, true);
            b.conv.bias = Value::zeros({config.hidden}, true);
            b.conv.dilation = dilation_for_layer(l, config.kernel_size);
            b.se_reduce = make_linear(config.hidden, config.se_width());
            b.se_expand = make_linear(config.se_width(), config.hidden);
            b.compress = make_linear(config.hidden, config.channels);
            b.skip = make_linear(config.channels, config.side);
            stack.push_back(std::move(b));
        }
    }
    p.head.hidden = make_linear(config.side, config.side);
    p.head.out = make_linear(config.side, config.classes);
    return p;
}

DetectorParams init_params(const DetectorConfig& config, std::uint64_t seed) {
    auto params = zero_params(config);
    std::mt19937_64 rng(seed);
    for (auto& p : params.named()) {
        if (p.value.rank() != 2) {
            continue;  // biases stay zero
        }
        // Conv kernels are (k, H) with fan-in k; mixing weights are (Cin, Cout).
        const double fan_in = static_cast<double>(p.value.dim(0));
        const double bound = std::sqrt(6.0 / fan_in);
        std::uniform_real_distribution<double> dist(-bound, bound);
        for (auto& w : p.value.data()) {
            w = dist(rng);
        }
    }
    return params;
}

std::size_t param_count(const DetectorConfig& config) {
    config.validate();
    const std::size_t c = config.channels;
    const std::size_t h = config.hidden;
    const std::size_t s = config.side;
    const std::size_t r = config.se_width();
    const std::size_t block = linear_count(c, h) + (config.kernel_size * h + h) + linear_count(h, r) +
                              linear_count(r, h) + linear_count(h, c) + linear_count(c, s);
    return linear_count(1, c) + config.filters * config.layers * block + linear_count(s, s) +
           linear_count(s, config.classes);
}

}  // namespace cardiospike::model
