#include "cardiospike/stream/online.hpp"

#include <cstdio>

#include "cardiospike/data/windowing.hpp"
#include "cardiospike/tensor/value.hpp"

namespace cardiospike::stream {

OnlineDetector::OnlineDetector(const model::DetectorParams& params, model::DetectorConfig config, double threshold)
    : params_(&params), config_(config), threshold_(threshold), ts_(config.target_length()) {
    config_.validate();
    if (!(threshold > 0.0 && threshold < 1.0)) {
        throw std::invalid_argument("OnlineDetector: threshold must lie in (0, 1)");
    }
}

std::vector<training::SpikeEvent> OnlineDetector::run_segment(std::size_t segment, bool flushing) {
    tensor::NoGradGuard no_grad;
    const std::size_t first = segment * ts_;
    const auto start = static_cast<std::ptrdiff_t>(first) - static_cast<std::ptrdiff_t>(config_.pad);
    const auto local = start - static_cast<std::ptrdiff_t>(buffer_base_);
    // A negative local start only happens for segment 0, where buffer_base_ is
    // 0 and the clamp replicates the first sample exactly as offline windowing.
    const auto input = data::segment_input(buffer_, local, config_.length);
    const auto probs = model::predict_segment(*params_, config_, input.values);
    const std::size_t valid = flushing ? std::min(ts_, piece_length_ - first) : ts_;
    return training::events_above(std::span(probs).first(valid), threshold_, piece_offset_ + first);
}

void OnlineDetector::trim() {
    const std::size_t keep_from = next_segment_ * ts_ >= config_.pad ? next_segment_ * ts_ - config_.pad : 0;
    if (keep_from > buffer_base_ + 4 * config_.length) {
        buffer_.erase(buffer_.begin(), buffer_.begin() + static_cast<std::ptrdiff_t>(keep_from - buffer_base_));
        buffer_base_ = keep_from;
    }
}

std::vector<training::SpikeEvent> OnlineDetector::push(std::span<const double> samples) {
    buffer_.insert(buffer_.end(), samples.begin(), samples.end());
    piece_length_ += samples.size();
    std::vector<training::SpikeEvent> events;
    while ((next_segment_ + 1) * ts_ + config_.pad <= piece_length_) {
        auto found = run_segment(next_segment_, false);
        events.insert(events.end(), found.begin(), found.end());
        ++next_segment_;
    }
    trim();
    return events;
}

std::vector<training::SpikeEvent> OnlineDetector::finish_piece() {
    std::vector<training::SpikeEvent> events;
    while (next_segment_ * ts_ < piece_length_) {
        auto found = run_segment(next_segment_, true);
        events.insert(events.end(), found.begin(), found.end());
        ++next_segment_;
    }
    piece_offset_ += piece_length_;
    piece_length_ = 0;
    buffer_.clear();
    buffer_base_ = 0;
    next_segment_ = 0;
    return events;
}

Session::Session(const model::DetectorParams& params, const model::DetectorConfig& config, double threshold)
    : detector_(params, config, threshold) {}

std::vector<training::SpikeEvent> Session::on_packet(const SensorPacket& packet) {
    if (finished_) {
        throw StreamError("session: packet after end of stream");
    }
    if (packet.is_end_marker()) {
        return finish();
    }
    auto ingested = ingest(state_, packet);
    std::vector<training::SpikeEvent> events;
    if (ingested.discontinuity) {
        events = detector_.finish_piece();
    }
    auto found = detector_.push(ingested.appended);
    events.insert(events.end(), found.begin(), found.end());
    return events;
}

std::vector<training::SpikeEvent> Session::finish() {
    if (finished_) {
        return {};
    }
    finished_ = true;
    return detector_.finish_piece();
}

std::string format_event(const std::string& sensor_id, const training::SpikeEvent& event) {
    char prob[32];
    std::snprintf(prob, sizeof prob, "%.6f", event.probability);
    return sensor_id + "," + std::to_string(event.index) + "," + prob;
}

std::vector<training::SpikeEvent> offline_events(std::span<const double> rr,
                                                 std::span<const std::size_t> discontinuities,
                                                 const model::DetectorParams& params,
                                                 const model::DetectorConfig& config, double threshold) {
    std::vector<std::size_t> bounds{0};
    bounds.insert(bounds.end(), discontinuities.begin(), discontinuities.end());
    bounds.push_back(rr.size());
    std::vector<training::SpikeEvent> events;
    for (std::size_t i = 0; i + 1 < bounds.size(); ++i) {
        if (bounds[i + 1] < bounds[i] || bounds[i + 1] > rr.size()) {
            throw std::invalid_argument("offline_events: discontinuities must be sorted and in range");
        }
        if (bounds[i + 1] == bounds[i]) {
            continue;
        }
        const auto piece = rr.subspan(bounds[i], bounds[i + 1] - bounds[i]);
        const auto probs = training::detect_probabilities(piece, params, config);
        const auto found = training::events_above(probs, threshold, bounds[i]);
        events.insert(events.end(), found.begin(), found.end());
    }
    return events;
}

}  // namespace cardiospike::stream
