#include "cardiospike/training/inference.hpp"

#include "cardiospike/data/windowing.hpp"

namespace cardiospike::training {

std::vector<double> detect_probabilities(std::span<const double> rr, const model::DetectorParams& params,
                                         const model::DetectorConfig& config) {
    tensor::NoGradGuard no_grad;
    const std::size_t ts = config.target_length();
    const std::size_t count = data::segment_count(rr.size(), config.length, config.pad);

    std::vector<data::SegmentSlice<double>> slices;
    slices.reserve(count);
    for (std::size_t s = 0; s < count; ++s) {
        const auto first = s * ts;
        const auto start = static_cast<std::ptrdiff_t>(first) - static_cast<std::ptrdiff_t>(config.pad);
        const auto input = data::segment_input(rr, start, config.length);
        slices.push_back({static_cast<std::ptrdiff_t>(first), std::min(ts, rr.size() - first),
                          model::predict_segment(params, config, input.values)});
    }
    return data::stitch(std::move(slices));
}

std::vector<std::uint8_t> apply_threshold(std::span<const double> probabilities, double threshold) {
    std::vector<std::uint8_t> out(probabilities.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = probabilities[i] > threshold ? 1 : 0;
    }
    return out;
}

std::vector<SpikeEvent> events_above(std::span<const double> probabilities, double threshold,
                                     std::size_t index_offset) {
    std::vector<SpikeEvent> events;
    for (std::size_t i = 0; i < probabilities.size(); ++i) {
        if (probabilities[i] > threshold) {
            events.push_back({index_offset + i, probabilities[i]});
        }
    }
    return events;
}

}  // namespace cardiospike::training
