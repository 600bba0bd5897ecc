#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "cardiospike/stream/packet.hpp"

namespace cardiospike::stream {

class StreamError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// RR sequence reassembled from overlapping packet windows. Append-only.
struct StreamState {
    std::string sensor_id;                  // fixed by the first packet
    std::vector<double> rr;                 // assembled samples
    std::vector<std::size_t> discontinuities;  // indices where a new piece starts after lost beats
    std::uint64_t end_time_ms = 0;          // end of the newest assembled interval
    std::optional<std::uint16_t> last_sequence;
    std::size_t packets = 0;
    std::size_t lost_packets = 0;           // by sequence number gaps

    bool empty() const { return rr.empty(); }
};

struct IngestResult {
    std::vector<double> appended;
    bool discontinuity = false;  // appended samples start a new piece
};

/// Aligns the packet window with the assembled sequence by beat end times
/// (packet time minus the intervals after each beat) and appends the beats
/// that end after the newest assembled one. A window that starts after the
/// assembled end means beats were lost: all of it is appended and a
/// discontinuity recorded. Stale windows append nothing.
/// Throws StreamError on a sensor id mismatch or a window whose overlap
/// disagrees with what was assembled.
IngestResult ingest(StreamState& state, const SensorPacket& packet);

}  // namespace cardiospike::stream
