#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "cardiospike/data/record.hpp"
#include "cardiospike/model/detector.hpp"

namespace cardiospike::training {

/// Offline detection: window the sequence, run the detector on every segment
/// and stitch the per-sample spike probabilities back together.
std::vector<double> detect_probabilities(std::span<const double> rr, const model::DetectorParams& params,
                                         const model::DetectorConfig& config);

inline std::vector<double> detect_probabilities(const data::RhythmRecord& record,
                                                const model::DetectorParams& params,
                                                const model::DetectorConfig& config) {
    return detect_probabilities(record.rr, params, config);
}

/// 1 where probability > threshold.
std::vector<std::uint8_t> apply_threshold(std::span<const double> probabilities, double threshold);

struct SpikeEvent {
    std::size_t index = 0;
    double probability = 0.0;

    friend bool operator==(const SpikeEvent&, const SpikeEvent&) = default;
};

std::vector<SpikeEvent> events_above(std::span<const double> probabilities, double threshold,
                                     std::size_t index_offset = 0);

}  // namespace cardiospike::training
