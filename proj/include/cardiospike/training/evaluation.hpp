#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace cardiospike::training {

/// Per-sample confusion counts on the positive (spike) class.
struct Confusion {
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t fn = 0;
    std::size_t tn = 0;

    Confusion& operator+=(const Confusion& o) {
        tp += o.tp;
        fp += o.fp;
        fn += o.fn;
        tn += o.tn;
        return *this;
    }

    // 0 when the denominator is empty
    double precision() const;
    double recall() const;
    double f_score() const;
};

Confusion f_score(std::span<const std::uint8_t> predicted, std::span<const std::uint8_t> truth);

/// Partitions record indices 0..n-1 into k folds after a seeded shuffle.
/// Fold sizes differ by at most one, larger folds first.
std::vector<std::vector<std::size_t>> kfold_split(std::size_t records, std::size_t k, std::uint64_t seed);

}  // namespace cardiospike::training
