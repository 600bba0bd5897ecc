#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

namespace cardiospike::training {

/// Loss, optimizer and loop settings.
struct TrainConfig {
    double focal_alpha = 0.25;
    double focal_gamma = 2.0;
    double learning_rate = 1e-3;
    double weight_decay = 1e-2;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    std::size_t epochs = 50;
    std::size_t batch_size = 64;
    std::uint64_t seed = 0;
    double threshold = 0.5;          // sigmoid probability above which a sample is a spike
    double holdout_fraction = 0.1;   // records held out by train() for per-epoch evaluation
    std::size_t jobs = 0;            // concurrent folds in cross_validate, 0 = hardware threads

    void validate() const;

    friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

std::string train_config_to_json(const TrainConfig& config);
TrainConfig train_config_from_json(const std::string& text);

}  // namespace cardiospike::training
