#include "cardiospike/training/trainer.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <mutex>
#include <numeric>
#include <random>
#include <thread>

#include "cardiospike/data/synth.hpp"
#include "cardiospike/data/windowing.hpp"
#include "cardiospike/tensor/ops.hpp"
#include "cardiospike/training/adamw.hpp"
#include "cardiospike/training/inference.hpp"
#include "cardiospike/training/loss.hpp"

namespace cardiospike::training {

namespace {

using tensor::Graph;
using tensor::Value;

struct Example {
    std::vector<double> input;
    std::vector<std::uint8_t> target;
};

std::vector<Example> prepare(const std::vector<data::RhythmRecord>& records, const model::DetectorConfig& dcfg) {
    std::vector<Example> out;
    for (const auto& rec : records) {
        for (auto& seg : data::window(rec, dcfg.length, dcfg.pad)) {
            out.push_back({std::move(seg.input), std::move(seg.target)});
        }
    }
    return out;
}

Value forward(Graph& graph, const Example& ex, const model::DetectorParams& params,
              const model::DetectorConfig& dcfg) {
    auto input = Value::from({dcfg.length, 1}, ex.input);
    return model::detector_forward(graph, input, params, dcfg);
}

double mean_loss(const std::vector<Example>& examples, const model::DetectorParams& params,
                 const model::DetectorConfig& dcfg, const TrainConfig& tcfg) {
    tensor::NoGradGuard no_grad;
    double total = 0.0;
    for (const auto& ex : examples) {
        Graph graph;
        auto logits = forward(graph, ex, params, dcfg);
        total += focal_loss(graph, logits, ex.target, tcfg.focal_alpha, tcfg.focal_gamma).item();
    }
    return examples.empty() ? 0.0 : total / static_cast<double>(examples.size());
}

struct Evaluation {
    double loss = 0.0;
    Confusion confusion;
};

Evaluation evaluate(const std::vector<data::RhythmRecord>& records, const model::DetectorParams& params,
                    const model::DetectorConfig& dcfg, const TrainConfig& tcfg) {
    tensor::NoGradGuard no_grad;
    Evaluation ev;
    std::size_t segments = 0;
    for (const auto& rec : records) {
        std::vector<data::SegmentSlice<double>> slices;
        for (const auto& seg : data::window(rec, dcfg.length, dcfg.pad)) {
            Graph graph;
            auto logits = model::detector_forward(graph, Value::from({dcfg.length, 1}, seg.input), params, dcfg);
            ev.loss += focal_loss(graph, logits, seg.target, tcfg.focal_alpha, tcfg.focal_gamma).item();
            ++segments;
            std::vector<double> probs(dcfg.target_length());
            for (std::size_t t = 0; t < probs.size(); ++t) {
                probs[t] = tensor::sigmoid_scalar(logits.data()[t * dcfg.classes]);
            }
            slices.push_back({seg.target_start(), seg.valid, std::move(probs)});
        }
        const auto predicted = apply_threshold(data::stitch(std::move(slices)), tcfg.threshold);
        ev.confusion += f_score(predicted, rec.labels);
    }
    if (segments > 0) {
        ev.loss /= static_cast<double>(segments);
    }
    return ev;
}

}  // namespace

std::uint64_t fold_seed(std::uint64_t base, std::size_t fold) { return data::derive_seed(base, 100 + fold); }

std::uint64_t init_seed(std::uint64_t seed) { return data::derive_seed(seed, 1); }

TrainResult train_fold(const std::vector<data::RhythmRecord>& train_records,
                       const std::vector<data::RhythmRecord>& eval_records, const model::DetectorConfig& dcfg,
                       const TrainConfig& tcfg, std::uint64_t seed, const LogFn& log) {
    dcfg.validate();
    tcfg.validate();
    if (train_records.empty()) {
        throw std::invalid_argument("train: empty training corpus");
    }
    const auto examples = prepare(train_records, dcfg);

    TrainResult result;
    result.params = model::init_params(dcfg, init_seed(seed));
    auto named = result.params.named();
    auto state = OptimizerState::for_params(named);
    model::DetectorParams last_good = result.params.clone();

    result.initial_loss = mean_loss(examples, result.params, dcfg, tcfg);

    std::vector<std::size_t> order(examples.size());
    std::iota(order.begin(), order.end(), 0);

    for (std::size_t epoch = 1; epoch <= tcfg.epochs; ++epoch) {
        std::mt19937_64 rng(data::derive_seed(seed, 1000 + epoch));
        std::shuffle(order.begin(), order.end(), rng);

        double epoch_loss = 0.0;
        for (std::size_t begin = 0; begin < order.size(); begin += tcfg.batch_size) {
            const std::size_t end = std::min(order.size(), begin + tcfg.batch_size);
            result.params.zero_grad();
            for (std::size_t i = begin; i < end; ++i) {
                const auto& ex = examples[order[i]];
                Graph graph;
                auto logits = forward(graph, ex, result.params, dcfg);
                auto loss = focal_loss(graph, logits, ex.target, tcfg.focal_alpha, tcfg.focal_gamma);
                graph.backward(loss);
                epoch_loss += loss.item();
            }
            const double scale = 1.0 / static_cast<double>(end - begin);
            for (auto& p : named) {
                for (auto& g : p.value.grad()) {
                    g *= scale;
                }
            }
            try {
                adamw_step(named, state, tcfg);
            } catch (const NonFiniteGradient& e) {
                throw TrainingDiverged(e.what(), std::move(last_good), epoch - 1);
            }
        }
        result.params.zero_grad();
        epoch_loss /= static_cast<double>(examples.size());
        if (!std::isfinite(epoch_loss) || !result.params.all_finite()) {
            throw TrainingDiverged("train: loss diverged in epoch " + std::to_string(epoch), std::move(last_good),
                                   epoch - 1);
        }

        const auto ev = evaluate(eval_records.empty() ? train_records : eval_records, result.params, dcfg, tcfg);
        result.history.push_back({epoch, epoch_loss, ev.loss, ev.confusion.f_score()});
        result.eval_confusion = ev.confusion;
        last_good = result.params.clone();
        if (log) {
            char line[160];
            std::snprintf(line, sizeof line, "epoch %zu/%zu train_loss=%.6f eval_loss=%.6f f_score=%.4f", epoch,
                          tcfg.epochs, epoch_loss, ev.loss, ev.confusion.f_score());
            log(line);
        }
    }
    if (tcfg.epochs == 0) {
        result.eval_confusion =
            evaluate(eval_records.empty() ? train_records : eval_records, result.params, dcfg, tcfg).confusion;
    }
    return result;
}

TrainResult train(const std::vector<data::RhythmRecord>& corpus, const model::DetectorConfig& dcfg,
                  const TrainConfig& tcfg, const LogFn& log) {
    if (corpus.empty()) {
        throw std::invalid_argument("train: empty corpus");
    }
    tcfg.validate();
    std::vector<std::size_t> order(corpus.size());
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(data::derive_seed(tcfg.seed, 7));
    std::shuffle(order.begin(), order.end(), rng);

    auto held = static_cast<std::size_t>(std::floor(tcfg.holdout_fraction * static_cast<double>(corpus.size())));
    held = std::min(held, corpus.size() - 1);
    std::vector<std::size_t> eval_idx(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(held));
    std::vector<std::size_t> train_idx(order.begin() + static_cast<std::ptrdiff_t>(held), order.end());
    std::sort(eval_idx.begin(), eval_idx.end());
    std::sort(train_idx.begin(), train_idx.end());

    std::vector<data::RhythmRecord> train_records;
    std::vector<data::RhythmRecord> eval_records;
    for (auto i : train_idx) {
        train_records.push_back(corpus[i]);
    }
    for (auto i : eval_idx) {
        eval_records.push_back(corpus[i]);
    }
    return train_fold(train_records, eval_records, dcfg, tcfg, fold_seed(tcfg.seed, 0), log);
}

double CrossValidation::mean_f_score() const {
    if (folds.empty()) {
        return 0.0;
    }
    double total = 0.0;
    for (const auto& f : folds) {
        total += f.f_score();
    }
    return total / static_cast<double>(folds.size());
}

CrossValidation cross_validate(const std::vector<data::RhythmRecord>& corpus, const model::DetectorConfig& dcfg,
                               const TrainConfig& tcfg, std::size_t k, const LogFn& log) {
    dcfg.validate();
    tcfg.validate();
    const auto split = kfold_split(corpus.size(), k, tcfg.seed);

    CrossValidation cv;
    cv.folds.resize(k);
    cv.params.resize(k);

    std::mutex log_mutex;
    auto run_fold = [&](std::size_t fold) {
        std::vector<data::RhythmRecord> train_records;
        std::vector<data::RhythmRecord> test_records;
        for (std::size_t f = 0; f < k; ++f) {
            for (auto idx : split[f]) {
                (f == fold ? test_records : train_records).push_back(corpus[idx]);
            }
        }
        LogFn fold_log;
        if (log) {
            fold_log = [&, fold](const std::string& msg) {
                std::lock_guard lock(log_mutex);
                log("fold " + std::to_string(fold) + ": " + msg);
            };
        }
        auto result = train_fold(train_records, test_records, dcfg, tcfg, fold_seed(tcfg.seed, fold), fold_log);
        auto& report = cv.folds[fold];
        report.fold = fold;
        report.test_records = split[fold];
        report.confusion = result.eval_confusion;
        report.history = std::move(result.history);
        cv.params[fold] = std::move(result.params);
    };

    std::size_t jobs = tcfg.jobs == 0 ? std::max(1u, std::thread::hardware_concurrency()) : tcfg.jobs;
    jobs = std::min(jobs, k);
    if (jobs <= 1) {
        for (std::size_t fold = 0; fold < k; ++fold) {
            run_fold(fold);
        }
        return cv;
    }

    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(k);
    std::vector<std::thread> workers;
    for (std::size_t w = 0; w < jobs; ++w) {
        workers.emplace_back([&]() {
            for (std::size_t fold = next++; fold < k; fold = next++) {
                try {
                    run_fold(fold);
                } catch (...) {
                    errors[fold] = std::current_exception();
                }
            }
        });
    }
    for (auto& t : workers) {
        t.join();
    }
    for (auto& e : errors) {
        if (e) {
            std::rethrow_exception(e);
        }
    }
    return cv;
}

std::string format_report(const std::vector<FoldReport>& folds) {
    std::string out = "fold,epoch,train_loss,eval_loss,f_score\n";
    char line[192];
    for (const auto& f : folds) {
        for (const auto& e : f.history) {
            std::snprintf(line, sizeof line, "%zu,%zu,%.9f,%.9f,%.6f\n", f.fold, e.epoch, e.train_loss, e.eval_loss,
                          e.f_score);
            out += line;
        }
    }
    return out;
}

}  // namespace cardiospike::training
