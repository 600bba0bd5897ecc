#include "cardiospike/stream/state.hpp"

#include <algorithm>

namespace cardiospike::stream {

IngestResult ingest(StreamState& state, const SensorPacket& packet) {
    if (packet.is_end_marker()) {
        throw StreamError("ingest: end marker carries no samples");
    }
    if (state.packets > 0 && packet.sensor_id != state.sensor_id) {
        throw StreamError("ingest: sensor id '" + packet.sensor_id + "' does not match session '" +
                          state.sensor_id + "'");
    }
    if (state.packets == 0) {
        state.sensor_id = packet.sensor_id;
    } else if (state.last_sequence) {
        const auto step = static_cast<std::uint16_t>(packet.sequence - *state.last_sequence);
        if (step > 1) {
            state.lost_packets += step - 1u;
        }
    }
    state.last_sequence = packet.sequence;
    ++state.packets;

    const std::size_t n = packet.rr.size();
    // ends[j]: end time of packet.rr[j]
    std::vector<std::int64_t> ends(n);
    std::int64_t t = packet.time_ms;
    for (std::size_t j = n; j-- > 0;) {
        ends[j] = t;
        t -= packet.rr[j];
    }
    const std::int64_t window_start = t;

    IngestResult result;
    auto append_from = [&](std::size_t first) {
        for (std::size_t j = first; j < n; ++j) {
            result.appended.push_back(packet.rr[j]);
        }
        state.rr.insert(state.rr.end(), result.appended.begin(), result.appended.end());
        state.end_time_ms = static_cast<std::uint64_t>(ends[n - 1]);
    };

    if (state.rr.empty()) {
        append_from(0);
        return result;
    }

    const auto assembled_end = static_cast<std::int64_t>(state.end_time_ms);
    std::size_t first_new = 0;
    while (first_new < n && ends[first_new] <= assembled_end) {
        ++first_new;
    }
    if (first_new == n) {
        return result;
    }
    if (first_new == 0) {
        if (window_start < assembled_end) {
            throw StreamError("ingest: window starting at " + std::to_string(window_start) +
                              " ms straddles the assembled end at " + std::to_string(assembled_end) + " ms");
        }
        if (window_start > assembled_end) {
            result.discontinuity = true;
            state.discontinuities.push_back(state.rr.size());
        }
        append_from(0);
        return result;
    }
    if (ends[first_new - 1] != assembled_end) {
        throw StreamError("ingest: window does not align with the assembled end at " +
                          std::to_string(assembled_end) + " ms");
    }
    // Only the part of the overlap that was assembled can be compared.
    const std::size_t checked = std::min(first_new, state.rr.size());
    for (std::size_t j = first_new - checked; j < first_new; ++j) {
        const double have = state.rr[state.rr.size() - first_new + j];
        if (have != packet.rr[j]) {
            throw StreamError("ingest: overlapping interval " + std::to_string(packet.rr[j]) +
                              " ms disagrees with assembled " + std::to_string(have) + " ms");
        }
    }
    append_from(first_new);
    return result;
}

}  // namespace cardiospike::stream
