#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "cardiospike/data/record.hpp"
#include "cardiospike/model/detector.hpp"
#include "cardiospike/training/config.hpp"
#include "cardiospike/training/evaluation.hpp"

namespace cardiospike::training {

struct EpochStats {
    std::size_t epoch = 0;
    double train_loss = 0.0;  // mean focal loss over the epoch's training segments
    double eval_loss = 0.0;   // mean focal loss over the evaluation segments after the epoch
    double f_score = 0.0;     // per-sample F1 on the evaluation records after the epoch

    friend bool operator==(const EpochStats&, const EpochStats&) = default;
};

struct TrainResult {
    model::DetectorParams params;
    double initial_loss = 0.0;  // mean training-set loss before the first update
    std::vector<EpochStats> history;
    Confusion eval_confusion;   // of the final parameters
};

class TrainingDiverged : public std::runtime_error {
public:
    TrainingDiverged(const std::string& what, model::DetectorParams last_good, std::size_t completed_epochs)
        : std::runtime_error(what), last_good_(std::move(last_good)), completed_epochs_(completed_epochs) {}

    const model::DetectorParams& last_good() const noexcept { return last_good_; }
    std::size_t completed_epochs() const noexcept { return completed_epochs_; }

private:
    model::DetectorParams last_good_;
    std::size_t completed_epochs_;
};

using LogFn = std::function<void(const std::string&)>;

/// Trains from init_params(config, init_seed(seed)) on `train_records`,
/// evaluating on `eval_records` after every epoch. Deterministic for a seed.
TrainResult train_fold(const std::vector<data::RhythmRecord>& train_records,
                       const std::vector<data::RhythmRecord>& eval_records, const model::DetectorConfig& dcfg,
                       const TrainConfig& tcfg, std::uint64_t seed, const LogFn& log = {});

/// Holds out tcfg.holdout_fraction of the records (by seeded shuffle) for the
/// per-epoch history and trains on the rest.
TrainResult train(const std::vector<data::RhythmRecord>& corpus, const model::DetectorConfig& dcfg,
                  const TrainConfig& tcfg, const LogFn& log = {});

struct FoldReport {
    std::size_t fold = 0;
    std::vector<std::size_t> test_records;
    Confusion confusion;
    std::vector<EpochStats> history;

    double precision() const { return confusion.precision(); }
    double recall() const { return confusion.recall(); }
    double f_score() const { return confusion.f_score(); }
};

struct CrossValidation {
    std::vector<FoldReport> folds;
    std::vector<model::DetectorParams> params;  // final weights per fold

    double mean_f_score() const;
};

/// k-fold protocol split by whole record. Folds may train concurrently
/// (tcfg.jobs); results are ordered by fold index.
CrossValidation cross_validate(const std::vector<data::RhythmRecord>& corpus, const model::DetectorConfig& dcfg,
                               const TrainConfig& tcfg, std::size_t k, const LogFn& log = {});

/// Seed of fold `fold` under base seed `base`.
std::uint64_t fold_seed(std::uint64_t base, std::size_t fold);
/// Seed passed to init_params by train_fold(…, seed).
std::uint64_t init_seed(std::uint64_t seed);

/// Report header and one line per fold and epoch:
///   fold,epoch,train_loss,eval_loss,f_score
std::string format_report(const std::vector<FoldReport>& folds);

}  // namespace cardiospike::training
