#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "cardiospike/model/detector.hpp"
#include "cardiospike/stream/state.hpp"
#include "cardiospike/training/inference.hpp"

namespace cardiospike::stream {

/// Incremental windowed detection over a growing RR sequence.
///
/// Within one piece (the samples between discontinuities) segment s covers
/// piece samples [s*Ts, (s+1)*Ts) and runs once (s+1)*Ts + P samples have
/// arrived, so its inputs never touch the unknown future. finish_piece()
/// runs the rest with replicated tail padding, which makes the events of a
/// piece identical to offline detection on that piece alone. Event indices
/// count samples across all pieces.
class OnlineDetector {
public:
    OnlineDetector(const model::DetectorParams& params, model::DetectorConfig config, double threshold);

    std::vector<training::SpikeEvent> push(std::span<const double> samples);
    /// Flushes the current piece; later samples start a new one.
    std::vector<training::SpikeEvent> finish_piece();

    std::size_t assembled() const { return piece_offset_ + piece_length_; }
    /// Samples classified so far (the high-water mark).
    std::size_t classified() const { return piece_offset_ + next_segment_ * ts_; }

private:
    std::vector<training::SpikeEvent> run_segment(std::size_t segment, bool flushing);
    void trim();

    const model::DetectorParams* params_;
    model::DetectorConfig config_;
    double threshold_;
    std::size_t ts_;

    std::size_t piece_offset_ = 0;  // global index of the piece's first sample
    std::size_t piece_length_ = 0;
    std::vector<double> buffer_;    // piece samples from buffer_base_ on
    std::size_t buffer_base_ = 0;
    std::size_t next_segment_ = 0;
};

/// One sensor connection: ingest packets, detect online, report events.
class Session {
public:
    Session(const model::DetectorParams& params, const model::DetectorConfig& config, double threshold);

    std::vector<training::SpikeEvent> on_packet(const SensorPacket& packet);
    /// End of stream (end marker or disconnect). Idempotent.
    std::vector<training::SpikeEvent> finish();

    const StreamState& state() const { return state_; }
    const OnlineDetector& detector() const { return detector_; }

private:
    StreamState state_;
    OnlineDetector detector_;
    bool finished_ = false;
};

/// "id,index,probability" with six decimals and no trailing newline.
std::string format_event(const std::string& sensor_id, const training::SpikeEvent& event);

/// Offline reference for a stream: detection on each piece of `rr` (split at
/// `discontinuities`) with indices shifted to the piece offsets.
std::vector<training::SpikeEvent> offline_events(std::span<const double> rr,
                                                 std::span<const std::size_t> discontinuities,
                                                 const model::DetectorParams& params,
                                                 const model::DetectorConfig& config, double threshold);

}  // namespace cardiospike::stream
