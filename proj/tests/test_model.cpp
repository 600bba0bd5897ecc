#include <cmath>
#include <filesystem>
#include <random>

#include "doctest.h"
#include "oracles.hpp"

#include "cardiospike/model/checkpoint.hpp"
#include "cardiospike/model/config.hpp"
#include "cardiospike/model/detector.hpp"
#include "cardiospike/tensor/grad_check.hpp"
#include "cardiospike/tensor/ops.hpp"
#include "cardiospike/training/adamw.hpp"

using namespace cardiospike;
using model::DetectorConfig;
using tensor::Graph;
using tensor::Value;

namespace {

DetectorConfig small_config() {
    DetectorConfig c;
    c.channels = 4;
    c.hidden = 6;
    c.side = 5;
    c.layers = 2;
    c.filters = 2;
    c.length = 16;
    c.pad = 3;
    return c;
}

Value segment(std::size_t T, std::mt19937_64& rng) {
    return Value::from({T, 1}, oracle::random_vector(T, rng));
}

// Every value of every tensor set to `v`.
void fill(model::Linear& lin, double v) {
    for (auto& x : lin.weight.data()) {
        x = v;
    }
    for (auto& x : lin.bias.data()) {
        x = v;
    }
}

}  // namespace

TEST_CASE("dilation and receptive field") {
    CHECK(model::dilation_for_layer(1, 3) == 1);
    CHECK(model::dilation_for_layer(1, 5) == 1);
    CHECK(model::dilation_for_layer(3, 3) == 9);
    CHECK(model::dilation_for_layer(4, 3) == 27);
    CHECK(model::receptive_field(3, 3) == 27);
    CHECK(model::receptive_field(3, 1) == 3);
    CHECK(model::receptive_field(3, 4) == 81);
    for (std::size_t k = 2; k <= 5; ++k) {
        std::size_t power = 1;
        for (std::size_t L = 1; L <= 6; ++L) {
            power *= k;
            CHECK(model::receptive_field(k, L) == power);
        }
    }
}

TEST_CASE("config validation") {
    DetectorConfig c;
    CHECK_NOTHROW(c.validate());
    CHECK(c.target_length() == 24);
    auto bad = c;
    bad.pad = 16;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = c;
    bad.kernel_size = 4;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = c;
    bad.layers = 5;  // dilation 81 > 32
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = c;
    bad.classes = 0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);

    const auto json = model::detector_config_to_json(c);
    CHECK(model::detector_config_from_json(json) == c);
    CHECK_THROWS(model::detector_config_from_json(R"({"kernal_size": 3})"));
}

TEST_CASE("default configuration shapes") {
    DetectorConfig c;
    auto params = model::init_params(c, 1);
    std::mt19937_64 rng(1);
    Graph g;
    auto x = segment(32, rng);
    auto out = model::detector_forward(g, x, params, c);
    CHECK(out.shape() == tensor::Shape{24, 1});

    auto embedded = tensor::channel_mix(g, x, params.embed.weight, params.embed.bias);
    auto block = model::residual_block_forward(g, embedded, params.stacks[0][0], c.pad);
    CHECK(block.y.shape() == tensor::Shape{32, 32});
    CHECK(block.skip.shape() == tensor::Shape{24, 72});
    CHECK(model::head_forward(g, Value::zeros({24, 72}), params.head).shape() == tensor::Shape{24, 1});

    CHECK_THROWS_AS(model::detector_forward(g, Value::zeros({31, 1}), params, c), std::invalid_argument);
}

TEST_CASE("random valid configs keep the shape contract") {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 25; ++trial) {
        DetectorConfig c;
        c.kernel_size = 3 + 2 * (rng() % 2);
        c.channels = 1 + rng() % 6;
        c.hidden = 1 + rng() % 7;
        c.side = 1 + rng() % 6;
        c.layers = 1 + rng() % 2;
        c.filters = 1 + rng() % 2;
        c.pad = rng() % 5;
        c.length = 2 * c.pad + 1 + rng() % 20;
        c.length = std::max(c.length, model::dilation_for_layer(c.layers, c.kernel_size));
        c.classes = 1 + rng() % 3;
        REQUIRE_NOTHROW(c.validate());
        auto params = model::init_params(c, rng());
        Graph g;
        auto out = model::detector_forward(g, segment(c.length, rng), params, c);
        CHECK(out.shape() == tensor::Shape{c.length - 2 * c.pad, c.classes});
    }
}

TEST_CASE("detector matches the plain-loop reference") {
    std::mt19937_64 rng(6);
    for (auto pad : {tensor::Padding::replicate, tensor::Padding::zero}) {
        auto c = small_config();
        c.padding = pad;
        auto params = model::init_params(c, 17);
        for (int trial = 0; trial < 3; ++trial) {
            const auto input = oracle::random_vector(c.length, rng);
            Graph g;
            auto got = oracle::to_matrix(model::detector_forward(g, Value::from({c.length, 1}, input), params, c));
            auto want = oracle::detector(input, params, c);
            REQUIRE(got.size() == want.size());
            for (std::size_t t = 0; t < got.size(); ++t) {
                CHECK(got[t][0] == doctest::Approx(want[t][0]).epsilon(1e-12));
            }
        }
    }
    // default configuration too
    DetectorConfig c;
    auto params = model::init_params(c, 2);
    const auto input = oracle::random_vector(c.length, rng);
    Graph g;
    auto got = oracle::to_matrix(model::detector_forward(g, Value::from({c.length, 1}, input), params, c));
    auto want = oracle::detector(input, params, c);
    for (std::size_t t = 0; t < got.size(); ++t) {
        CHECK(got[t][0] == doctest::Approx(want[t][0]).epsilon(1e-11));
    }
}

TEST_CASE("residual identity and the neutral gate") {
    auto c = small_config();
    std::mt19937_64 rng(7);
    auto zero = model::zero_params(c);
    auto x = Value::from({c.length, c.channels}, oracle::random_vector(c.length * c.channels, rng));
    Graph g;
    for (const auto& b : zero.stacks[0]) {
        auto out = model::residual_block_forward(g, x, b, c.pad);
        CHECK(oracle::to_vector(out.y) == oracle::to_vector(x));
    }

    // se_expand = 0 gives a gate of exactly sigmoid(0) = 0.5, which must match
    // a fully open gate (sigmoid(1e3) == 1) with the compress weights halved.
    auto half = model::init_params(c, 3);
    fill(half.stacks[0][0].se_expand, 0.0);
    auto open = half.clone();
    for (auto& b : open.stacks[0][0].se_expand.bias.data()) {
        b = 1e3;
    }
    for (auto& w : open.stacks[0][0].compress.weight.data()) {
        w *= 0.5;
    }
    const auto a = model::residual_block_forward(g, x, half.stacks[0][0], c.pad);
    const auto b = model::residual_block_forward(g, x, open.stacks[0][0], c.pad);
    for (std::size_t i = 0; i < a.y.size(); ++i) {
        CHECK(a.y.data()[i] == doctest::Approx(b.y.data()[i]).epsilon(1e-13));
    }
    CHECK(oracle::to_vector(a.skip).size() == (c.length - 2 * c.pad) * c.side);
}

TEST_CASE("SE gate lies strictly inside (0, 1)") {
    auto c = small_config();
    auto params = model::init_params(c, 9);
    std::mt19937_64 rng(9);
    Graph g;
    const auto& b = params.stacks[1][1];
    auto v = Value::from({c.length, c.hidden}, oracle::random_vector(c.length * c.hidden, rng));
    auto gate = tensor::sigmoid(
        g, tensor::channel_mix(g, tensor::gelu(g, tensor::channel_mix(g, tensor::mean_over_time(g, v), b.se_reduce.weight,
                                                                      b.se_reduce.bias)),
                               b.se_expand.weight, b.se_expand.bias));
    for (double x : gate.data()) {
        CHECK(x > 0.0);
        CHECK(x < 1.0);
    }
}

TEST_CASE("head is per-timestep") {
    DetectorConfig c;
    auto params = model::init_params(c, 4);
    std::mt19937_64 rng(4);
    auto base = oracle::random_vector(24 * 72, rng);
    Graph g;
    auto ref = model::head_forward(g, Value::from({24, 72}, base), params.head);
    base[10 * 72 + 5] += 0.75;
    auto moved = model::head_forward(g, Value::from({24, 72}, base), params.head);
    for (std::size_t t = 0; t < 24; ++t) {
        if (t == 10) {
            CHECK(moved.data()[t] != ref.data()[t]);
        } else {
            CHECK(moved.data()[t] == ref.data()[t]);
        }
    }
    auto zero = model::zero_params(c);
    auto logits = model::head_forward(g, Value::zeros({24, 72}), zero.head);
    for (double z : logits.data()) {
        CHECK(tensor::sigmoid_scalar(z) == 0.5);
    }
}

TEST_CASE("detector locality with the gate held constant") {
    // The squeeze-excite mean pools over the whole segment, so locality only
    // holds once the gate no longer depends on the input.
    DetectorConfig c;
    c.channels = 3;
    c.hidden = 4;
    c.side = 3;
    c.layers = 2;
    c.filters = 2;
    c.length = 40;
    c.pad = 4;
    const std::size_t radius = (model::receptive_field(c.kernel_size, c.layers) - 1) / 2;
    for (auto pad : {tensor::Padding::replicate, tensor::Padding::zero}) {
        c.padding = pad;
        auto params = model::init_params(c, 11);
        for (auto& stack : params.stacks) {
            for (auto& b : stack) {
                fill(b.se_expand, 0.0);
            }
        }
        std::mt19937_64 rng(11);
        const auto input = oracle::random_vector(c.length, rng);
        Graph g;
        const auto ref = oracle::to_vector(model::detector_forward(g, Value::from({c.length, 1}, input), params, c));
        std::size_t widest = 0;
        for (std::size_t t0 = 0; t0 < c.length; ++t0) {
            auto moved = input;
            moved[t0] += 0.5;
            const auto out = oracle::to_vector(model::detector_forward(g, Value::from({c.length, 1}, moved), params, c));
            for (std::size_t j = 0; j < out.size(); ++j) {
                const std::size_t t = j + c.pad;
                const std::size_t dist = t > t0 ? t - t0 : t0 - t;
                if (out[j] != ref[j]) {
                    widest = std::max(widest, dist);
                }
                if (dist > radius) {
                    CHECK(out[j] == ref[j]);
                }
            }
        }
        CHECK(widest == radius);
    }
}

TEST_CASE("init_params") {
    auto c = small_config();
    auto a = model::init_params(c, 42);
    auto b = model::init_params(c, 42);
    auto d = model::init_params(c, 43);
    bool differs = false;
    const auto na = a.named(), nb = b.named(), nd = d.named();
    REQUIRE(na.size() == nb.size());
    for (std::size_t i = 0; i < na.size(); ++i) {
        CHECK(na[i].name == nb[i].name);
        CHECK(oracle::to_vector(na[i].value) == oracle::to_vector(nb[i].value));
        differs = differs || oracle::to_vector(na[i].value) != oracle::to_vector(nd[i].value);
        if (na[i].value.rank() == 2) {
            const double bound = std::sqrt(6.0 / static_cast<double>(na[i].value.dim(0)));
            for (double v : na[i].value.data()) {
                CHECK(std::isfinite(v));
                CHECK(std::abs(v) <= bound);
            }
        }
    }
    CHECK(differs);
    CHECK(a.all_finite());

    auto copy = a.clone();
    copy.embed.weight.data()[0] += 1.0;
    CHECK(copy.embed.weight.data()[0] != a.embed.weight.data()[0]);
}

TEST_CASE("param_count") {
    DetectorConfig c;
    const auto base = model::param_count(c);
    CHECK(base == model::init_params(c, 0).scalar_count());
    for (auto field : {&DetectorConfig::channels, &DetectorConfig::hidden, &DetectorConfig::side,
                       &DetectorConfig::layers, &DetectorConfig::filters}) {
        auto bigger = c;
        bigger.*field += 1;
        if (field == &DetectorConfig::layers) {
            bigger.length = 128;  // room for the deeper dilation
        }
        CHECK(model::param_count(bigger) > base);
    }
    // doubling F doubles the stack share
    auto one = c;
    one.filters = 1;
    auto two = c;
    two.filters = 2;
    auto four = c;
    four.filters = 4;
    const auto stack_share = model::param_count(two) - model::param_count(one);
    CHECK(model::param_count(four) - model::param_count(two) == 2 * stack_share);

    // equals the optimizer's bookkeeping
    auto params = model::init_params(c, 0);
    auto named = params.named();
    auto state = training::OptimizerState::for_params(named);
    training::TrainConfig tcfg;
    CHECK(training::adamw_step(named, state, tcfg) == base);
}

TEST_CASE("every parameter receives gradient") {
    DetectorConfig c;
    auto params = model::init_params(c, 21);
    std::mt19937_64 rng(21);
    Graph g;
    auto out = model::detector_forward(g, segment(c.length, rng), params, c);
    auto loss = tensor::sum(g, tensor::mul(g, out, out));
    g.backward(loss);
    for (const auto& p : params.named()) {
        bool nonzero = false;
        for (double d : p.value.grad()) {
            nonzero = nonzero || d != 0.0;
        }
        CHECK_MESSAGE(nonzero, p.name);
    }
}

TEST_CASE("determinism of the forward pass") {
    DetectorConfig c;
    auto params = model::init_params(c, 8);
    std::mt19937_64 rng(8);
    auto x = segment(c.length, rng);
    Graph g1, g2;
    CHECK(oracle::to_vector(model::detector_forward(g1, x, params, c)) ==
          oracle::to_vector(model::detector_forward(g2, x, params, c)));
}

TEST_CASE("gradient check of a residual block and the detector") {
    auto c = small_config();
    tensor::GradCheckOptions opts;
    for (std::uint64_t seed = 0; seed < 2; ++seed) {
        auto params = model::init_params(c, seed);
        std::mt19937_64 rng(seed);
        auto x = Value::from({c.length, c.channels}, oracle::random_vector(c.length * c.channels, rng), true);
        auto block_f = [&](Graph& g, const Value& in) {
            auto out = model::residual_block_forward(g, in, params.stacks[0][1], c.pad);
            return tensor::add(g, tensor::sum(g, tensor::mul(g, out.y, out.y)), tensor::sum(g, out.skip));
        };
        CHECK(tensor::grad_check(block_f, x, opts).max_relative_error <= 1e-4);

        auto det_f = [&](Graph& g, const Value& in) {
            auto out = model::detector_forward(g, in, params, c);
            return tensor::sum(g, tensor::mul(g, out, out));
        };
        CHECK(tensor::grad_check(det_f, Value::from({c.length, 1}, oracle::random_vector(c.length, rng), true), opts)
                  .max_relative_error <= 1e-4);
    }
}

TEST_CASE("checkpoint roundtrip") {
    auto c = small_config();
    model::Checkpoint ckpt;
    ckpt.entries.push_back({model::checkpoint_key(0, 3), c, model::init_params(c, 1)});
    auto c2 = c;
    c2.padding = tensor::Padding::zero;
    ckpt.entries.push_back({model::checkpoint_key(1, 3), c2, model::init_params(c2, 2)});
    CHECK(ckpt.entries[1].key == "fold1_epoch3");

    const auto bytes = model::serialize_checkpoint(ckpt);
    const auto back = model::deserialize_checkpoint(bytes);
    CHECK(model::serialize_checkpoint(back) == bytes);
    REQUIRE(back.entries.size() == 2);
    CHECK(back.find("fold1_epoch3").config == c2);
    CHECK(back.last().key == "fold1_epoch3");
    CHECK_THROWS_AS(back.find("fold9_epoch3"), std::out_of_range);

    auto truncated = bytes.substr(0, bytes.size() - 3);
    CHECK_THROWS(model::deserialize_checkpoint(truncated));
    auto garbage = bytes;
    garbage[0] = 'X';
    CHECK_THROWS(model::deserialize_checkpoint(garbage));

    const auto path = std::filesystem::temp_directory_path() / "cardiospike_test.ckpt";
    model::save_checkpoint(ckpt, path);
    CHECK(model::serialize_checkpoint(model::load_checkpoint(path)) == bytes);
    std::filesystem::remove(path);
}
