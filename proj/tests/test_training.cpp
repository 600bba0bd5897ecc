#include <cmath>
#include <numeric>
#include <random>
#include <set>

#include "doctest.h"
#include "oracles.hpp"

#include "cardiospike/data/synth.hpp"
#include "cardiospike/data/windowing.hpp"
#include "cardiospike/tensor/grad_check.hpp"
#include "cardiospike/training/adamw.hpp"
#include "cardiospike/training/evaluation.hpp"
#include "cardiospike/training/inference.hpp"
#include "cardiospike/training/loss.hpp"
#include "cardiospike/training/trainer.hpp"

using namespace cardiospike;
using namespace cardiospike::training;
using tensor::Graph;
using tensor::Value;

namespace {

double logit_of(double p) { return std::log(p / (1.0 - p)); }

model::DetectorConfig tiny_config() {
    model::DetectorConfig c;
    c.channels = 4;
    c.hidden = 6;
    c.side = 6;
    c.layers = 2;
    c.filters = 1;
    c.length = 16;
    c.pad = 2;
    return c;
}

std::vector<data::RhythmRecord> tiny_corpus(std::size_t records, std::uint64_t seed) {
    data::SynthConfig s;
    s.records = records;
    s.samples_per_record = 120;
    s.spike_rate = 6.0;
    s.seed = seed;
    return data::synth_corpus(s);
}

}  // namespace

TEST_CASE("focal loss examples") {
    CHECK(focal_loss_scalar(0.0, 1, 0.5, 0.0) == doctest::Approx(0.5 * std::log(2.0)).epsilon(1e-15));
    CHECK(focal_loss_scalar(0.0, 1, 0.5, 0.0) == doctest::Approx(0.34657).epsilon(1e-5));
    const double expected = 0.25 * 0.01 * -std::log(0.9);
    CHECK(focal_loss_scalar(logit_of(0.9), 1, 0.25, 2.0) == doctest::Approx(expected).epsilon(1e-12));
    CHECK(focal_loss_scalar(logit_of(0.9), 1, 0.25, 2.0) == doctest::Approx(2.634e-4).epsilon(1e-3));
    CHECK(focal_loss_scalar(40.0, 1, 0.25, 2.0) < 1e-30);
    CHECK(focal_loss_scalar(-40.0, 0, 0.25, 2.0) < 1e-30);
    CHECK(std::isfinite(focal_loss_scalar(700.0, 0, 0.25, 2.0)));
    CHECK(std::isfinite(focal_loss_scalar(-700.0, 1, 0.25, 2.0)));
    CHECK(focal_loss_scalar(-700.0, 1, 0.5, 0.0) == doctest::Approx(350.0));

    Graph g;
    auto logits = Value::from({3, 1}, {0.0, 1.0, -2.0});
    const std::vector<std::uint8_t> t{1, 0, 1};
    const double mean = (oracle::focal(0.0, 1, 0.25, 2.0) + oracle::focal(1.0, 0, 0.25, 2.0) +
                         oracle::focal(-2.0, 1, 0.25, 2.0)) / 3.0;
    CHECK(focal_loss(g, logits, t, 0.25, 2.0).item() == doctest::Approx(mean).epsilon(1e-14));
    const std::vector<std::uint8_t> bad{1, 2, 0};
    CHECK_THROWS_AS(focal_loss(g, logits, bad, 0.25, 2.0), std::invalid_argument);
    const std::vector<std::uint8_t> short_t{1, 0};
    CHECK_THROWS_AS(focal_loss(g, logits, short_t, 0.25, 2.0), std::invalid_argument);
}

TEST_CASE("focal loss with gamma 0 is half the cross-entropy") {
    std::mt19937_64 rng(1);
    for (double z : oracle::random_vector(500, rng, -10.0, 10.0)) {
        for (std::uint8_t t : {0, 1}) {
            const double p = oracle::sigmoid(z);
            const double bce = -(t ? std::log(p) : std::log(1.0 - p));
            CHECK(std::abs(focal_loss_scalar(z, t, 0.5, 0.0) - 0.5 * bce) <= 1e-9);
        }
    }
}

TEST_CASE("focal loss matches the direct form and is monotone") {
    std::mt19937_64 rng(2);
    for (double z : oracle::random_vector(300, rng, -8.0, 8.0)) {
        for (std::uint8_t t : {0, 1}) {
            CHECK(focal_loss_scalar(z, t, 0.25, 2.0) == doctest::Approx(oracle::focal(z, t, 0.25, 2.0)).epsilon(1e-10));
        }
    }
    double previous = INFINITY;
    for (double pt = 0.01; pt < 1.0; pt += 0.01) {
        const double l1 = focal_loss_scalar(logit_of(pt), 1, 0.25, 2.0);
        const double l0 = focal_loss_scalar(-logit_of(pt), 0, 0.25, 2.0);
        CHECK(l1 >= 0.0);
        CHECK(l1 < previous);
        CHECK(l0 == doctest::Approx(3.0 * l1).epsilon(1e-9));  // alpha_t ratio 0.75 / 0.25
        previous = l1;
    }
}

TEST_CASE("focal loss gradient") {
    std::mt19937_64 rng(3);
    for (double gamma : {0.0, 1.0, 2.0}) {
        const std::vector<std::uint8_t> t{1, 0, 0, 1, 0, 1, 1, 0};
        auto f = [&](Graph& g, const Value& z) { return focal_loss(g, z, t, 0.25, gamma); };
        auto z = Value::from({8, 1}, oracle::random_vector(8, rng, -4.0, 4.0), true);
        CHECK(tensor::grad_check(f, z, 1e-5) <= 1e-4);
    }
}

TEST_CASE("adamw examples") {
    TrainConfig c;
    c.learning_rate = 0.1;
    c.weight_decay = 0.01;
    std::vector<model::NamedValue> p{{"w", Value::from({1}, {1.0}, true)}};
    auto state = OptimizerState::for_params(p);
    p[0].value.grad()[0] = 1.0;
    CHECK(adamw_step(p, state, c) == 1);
    CHECK(p[0].value.data()[0] == doctest::Approx(0.899).epsilon(1e-9));
    CHECK(state.step == 1);

    // zero gradient, zero decay: nothing moves
    c.weight_decay = 0.0;
    std::vector<model::NamedValue> q{{"w", Value::from({2}, {1.0, -3.0}, true)}};
    auto qs = OptimizerState::for_params(q);
    q[0].value.zero_grad();
    adamw_step(q, qs, c);
    CHECK(q[0].value.data()[0] == 1.0);
    CHECK(q[0].value.data()[1] == -3.0);
    CHECK(qs.first_moment[0] == std::vector<double>{0.0, 0.0});
    CHECK(qs.second_moment[0] == std::vector<double>{0.0, 0.0});

    // zero gradient with decay: exact decoupled shrink
    c.weight_decay = 0.01;
    adamw_step(q, qs, c);
    CHECK(q[0].value.data()[0] == 1.0 - 0.1 * 0.01 * 1.0);
    CHECK(q[0].value.data()[1] == -3.0 - 0.1 * 0.01 * -3.0);
}

TEST_CASE("adamw matches the scalar reference over 100 steps") {
    std::mt19937_64 rng(4);
    TrainConfig c;
    c.learning_rate = 0.01;
    c.weight_decay = 0.05;
    const std::size_t n = 7;
    std::vector<model::NamedValue> p{{"a", Value::from({n}, oracle::random_vector(n, rng), true)}};
    auto state = OptimizerState::for_params(p);
    std::vector<oracle::ScalarAdamW> ref(n);
    auto w = oracle::to_vector(p[0].value);
    for (int step = 0; step < 100; ++step) {
        const auto g = oracle::random_vector(n, rng, -3.0, 3.0);
        std::copy(g.begin(), g.end(), p[0].value.grad().begin());
        adamw_step(p, state, c);
        for (std::size_t i = 0; i < n; ++i) {
            w[i] = ref[i].step(w[i], g[i], c.learning_rate, c.beta1, c.beta2, c.epsilon, c.weight_decay);
            CHECK(std::abs(p[0].value.data()[i] - w[i]) <= 1e-12);
        }
    }
    CHECK(state.step == 100);
}

TEST_CASE("adamw rejects non-finite gradients untouched") {
    TrainConfig c;
    std::vector<model::NamedValue> p{{"a", Value::from({2}, {1.0, 2.0}, true)},
                                     {"b", Value::from({1}, {3.0}, true)}};
    auto state = OptimizerState::for_params(p);
    p[0].value.grad()[0] = 0.5;
    p[1].value.grad()[0] = std::nan("");
    CHECK_THROWS_WITH_AS(adamw_step(p, state, c), doctest::Contains("b"), NonFiniteGradient);
    CHECK(oracle::to_vector(p[0].value) == std::vector<double>{1.0, 2.0});
    CHECK(state.step == 0);
    CHECK(state.first_moment[0] == std::vector<double>{0.0, 0.0});
    p[1].value.grad()[0] = INFINITY;
    CHECK_THROWS_AS(adamw_step(p, state, c), NonFiniteGradient);
}

TEST_CASE("f_score counting") {
    std::vector<std::uint8_t> truth(20, 0), pred(20, 0);
    for (int i = 0; i < 10; ++i) {
        truth[i] = 1;
    }
    for (int i = 0; i < 8; ++i) {
        pred[i] = 1;
    }
    pred[15] = pred[16] = 1;
    const auto c = f_score(pred, truth);
    CHECK(c.tp == 8);
    CHECK(c.fp == 2);
    CHECK(c.fn == 2);
    CHECK(c.tn == 8);
    CHECK(c.precision() == doctest::Approx(0.8));
    CHECK(c.recall() == doctest::Approx(0.8));
    CHECK(c.f_score() == doctest::Approx(0.8));
    CHECK(f_score(truth, truth).f_score() == 1.0);
    CHECK(f_score(std::vector<std::uint8_t>(20, 0), truth).f_score() == 0.0);
    CHECK(Confusion{}.f_score() == 0.0);
    CHECK_THROWS_AS(f_score(std::vector<std::uint8_t>(3, 0), truth), std::invalid_argument);
}

TEST_CASE("kfold_split") {
    const auto folds = kfold_split(74, 10, 0);
    REQUIRE(folds.size() == 10);
    std::multiset<std::size_t> sizes;
    for (const auto& f : folds) {
        sizes.insert(f.size());
    }
    CHECK(sizes == std::multiset<std::size_t>{7, 7, 7, 7, 7, 7, 8, 8, 8, 8});
    CHECK(kfold_split(74, 10, 0) == folds);
    CHECK(kfold_split(74, 10, 1) != folds);
    CHECK_THROWS_AS(kfold_split(3, 4, 0), std::invalid_argument);
    CHECK_THROWS_AS(kfold_split(3, 1, 0), std::invalid_argument);

    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 300; ++trial) {
        const std::size_t n = 2 + rng() % 199;
        const std::size_t k = 2 + rng() % (n - 1);
        const auto split = kfold_split(n, k, rng());
        REQUIRE(split.size() == k);
        std::vector<int> seen(n, 0);
        std::size_t lo = n, hi = 0;
        for (const auto& f : split) {
            lo = std::min(lo, f.size());
            hi = std::max(hi, f.size());
            for (auto i : f) {
                REQUIRE(i < n);
                ++seen[i];
            }
        }
        CHECK(hi - lo <= 1);
        CHECK(std::all_of(seen.begin(), seen.end(), [](int s) { return s == 1; }));
    }
}

TEST_CASE("threshold and events") {
    const std::vector<double> p{0.1, 0.5, 0.51, 0.9};
    CHECK(apply_threshold(p, 0.5) == std::vector<std::uint8_t>{0, 0, 1, 1});
    const auto ev = events_above(p, 0.5, 10);
    REQUIRE(ev.size() == 2);
    CHECK(ev[0] == SpikeEvent{12, 0.51});
    CHECK(ev[1].index == 13);
}

TEST_CASE("detect_probabilities stitches per-segment predictions") {
    const auto c = tiny_config();
    const auto params = model::init_params(c, 3);
    const auto rec = tiny_corpus(1, 3)[0];
    const auto probs = detect_probabilities(rec, params, c);
    REQUIRE(probs.size() == rec.size());
    for (const auto& seg : data::window(rec, c.length, c.pad)) {
        const auto pred = model::predict_segment(params, c, seg.input);
        for (std::size_t j = 0; j < seg.valid; ++j) {
            CHECK(probs[static_cast<std::size_t>(seg.target_start()) + j] == pred[j]);
        }
    }
}

TEST_CASE("training on all-zero labels stays below threshold") {
    auto corpus = tiny_corpus(4, 1);
    for (auto& r : corpus) {
        std::fill(r.labels.begin(), r.labels.end(), 0);
    }
    TrainConfig t;
    t.epochs = 3;
    t.learning_rate = 1e-2;
    t.batch_size = 16;
    const auto c = tiny_config();
    const auto result = train_fold(corpus, {}, c, t, 0);
    for (const auto& r : corpus) {
        for (double p : detect_probabilities(r, result.params, c)) {
            CHECK(p < t.threshold);
        }
    }
}

TEST_CASE("training reduces the loss and is deterministic") {
    const auto corpus = tiny_corpus(6, 2);
    TrainConfig t;
    t.epochs = 3;
    t.learning_rate = 3e-3;
    t.batch_size = 16;
    t.seed = 4;
    const auto c = tiny_config();
    const auto a = train(corpus, c, t);
    REQUIRE(a.history.size() == 3);
    CHECK(a.history[0].train_loss < a.initial_loss);
    for (const auto& e : a.history) {
        CHECK(std::isfinite(e.train_loss));
        CHECK(std::isfinite(e.eval_loss));
    }
    const auto b = train(corpus, c, t);
    CHECK(a.history == b.history);
    const auto na = a.params.named(), nb = b.params.named();
    for (std::size_t i = 0; i < na.size(); ++i) {
        CHECK(oracle::to_vector(na[i].value) == oracle::to_vector(nb[i].value));
    }
    CHECK_THROWS_AS(train({}, c, t), std::invalid_argument);
}

TEST_CASE("cross validation bookkeeping") {
    TrainConfig t;
    t.epochs = 1;
    t.batch_size = 8;
    const auto c = tiny_config();
    const auto two = tiny_corpus(2, 5);
    const auto cv = cross_validate(two, c, t, 2);
    REQUIRE(cv.folds.size() == 2);
    CHECK(cv.params.size() == 2);
    CHECK(cv.folds[0].test_records.size() == 1);
    CHECK(cv.folds[0].test_records != cv.folds[1].test_records);
    CHECK(cv.mean_f_score() == doctest::Approx((cv.folds[0].f_score() + cv.folds[1].f_score()) / 2));
    CHECK_THROWS_AS(cross_validate(two, c, t, 3), std::invalid_argument);

    // concurrency does not change results
    const auto corpus = tiny_corpus(6, 6);
    t.jobs = 1;
    const auto serial = cross_validate(corpus, c, t, 3);
    t.jobs = 3;
    const auto parallel = cross_validate(corpus, c, t, 3);
    CHECK(format_report(serial.folds) == format_report(parallel.folds));
    for (std::size_t f = 0; f < 3; ++f) {
        CHECK(serial.folds[f].test_records == parallel.folds[f].test_records);
        CHECK(serial.folds[f].confusion.tp == parallel.folds[f].confusion.tp);
    }
    CHECK(format_report(serial.folds).rfind("fold,epoch,train_loss,eval_loss,f_score\n", 0) == 0);
}

TEST_CASE("divergence aborts with the last good parameters") {
    const auto corpus = tiny_corpus(2, 7);
    TrainConfig t;
    t.epochs = 20;
    t.learning_rate = 1e300;
    t.weight_decay = 0.0;
    t.batch_size = 8;
    const auto c = tiny_config();
    try {
        train_fold(corpus, {}, c, t, 0);
        FAIL("training should diverge");
    } catch (const TrainingDiverged& e) {
        CHECK(e.last_good().all_finite());
        CHECK(e.completed_epochs() < t.epochs);
    }
}

TEST_CASE("train config json") {
    TrainConfig t;
    t.epochs = 7;
    t.focal_alpha = 0.3;
    CHECK(train_config_from_json(train_config_to_json(t)) == t);
    CHECK_THROWS(train_config_from_json(R"({"epoch": 3})"));
    CHECK_THROWS(train_config_from_json("[1]"));
    TrainConfig bad;
    bad.batch_size = 0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}
