#include "cardiospike/training/evaluation.hpp"

#include <algorithm>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>

namespace cardiospike::training {

double Confusion::precision() const {
    return tp + fp == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fp);
}

double Confusion::recall() const {
    return tp + fn == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fn);
}

double Confusion::f_score() const {
    const double p = precision();
    const double r = recall();
    return p + r == 0.0 ? 0.0 : 2.0 * p * r / (p + r);
}

Confusion f_score(std::span<const std::uint8_t> predicted, std::span<const std::uint8_t> truth) {
    if (predicted.size() != truth.size()) {
        throw std::invalid_argument("f_score: " + std::to_string(predicted.size()) + " predictions vs " +
                                    std::to_string(truth.size()) + " labels");
    }
    Confusion c;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        const bool p = predicted[i] != 0;
        const bool t = truth[i] != 0;
        if (p && t) {
            ++c.tp;
        } else if (p) {
            ++c.fp;
        } else if (t) {
            ++c.fn;
        } else {
            ++c.tn;
        }
    }
    return c;
}

std::vector<std::vector<std::size_t>> kfold_split(std::size_t records, std::size_t k, std::uint64_t seed) {
    if (k < 2) {
        throw std::invalid_argument("kfold_split: k must be >= 2");
    }
    if (records < k) {
        throw std::invalid_argument("kfold_split: " + std::to_string(records) + " records cannot fill " +
                                    std::to_string(k) + " folds");
    }
    std::vector<std::size_t> order(records);
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);

    std::vector<std::vector<std::size_t>> folds(k);
    const std::size_t base = records / k;
    const std::size_t extra = records % k;
    std::size_t next = 0;
    for (std::size_t f = 0; f < k; ++f) {
        const std::size_t size = base + (f < extra ? 1 : 0);
        folds[f].assign(order.begin() + static_cast<std::ptrdiff_t>(next),
                        order.begin() + static_cast<std::ptrdiff_t>(next + size));
        std::sort(folds[f].begin(), folds[f].end());
        next += size;
    }
    return folds;
}

}  // namespace cardiospike::training
