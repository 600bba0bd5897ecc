#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "cardiospike/data/record.hpp"
#include "cardiospike/stream/packet.hpp"
#include "cardiospike/stream/socket.hpp"

namespace cardiospike::stream {

/// RR values as carried on the wire: rounded to whole milliseconds.
std::vector<std::uint16_t> wire_rr(const data::RhythmRecord& record);

/// One packet per beat: packet i carries the newest min(i + 1, 15) intervals
/// ending at beat i, stamped with their cumulative end time.
std::vector<SensorPacket> sensor_packets(const data::RhythmRecord& record, const std::string& sensor_id);

/// true = packet lost. Packets are lost in bursts of `burst` consecutive
/// packets, each burst independently with probability `drop`, so a burst
/// longer than the window loses beats outright.
std::vector<bool> drop_mask(std::size_t packets, double drop, std::size_t burst, std::uint64_t seed);

struct ReplayOptions {
    double speed = 1.0;  // one packet every 1 s / speed; infinity never pauses
    double drop = 0.0;
    std::size_t drop_burst = 20;
    std::uint64_t seed = 0;
    std::string sensor_id;  // empty: the record id
    /// Stop after this many packets without sending the end marker, as if the
    /// link died. 0 sends everything.
    std::size_t disconnect_after = 0;
};

struct ReplayStats {
    std::size_t packets = 0;  // generated
    std::size_t sent = 0;
    std::size_t dropped = 0;
    bool completed = false;   // end marker sent
};

/// Streams `record` to `endpoint`. Throws std::system_error if the
/// connection is refused or reset.
ReplayStats replay_sensor(const data::RhythmRecord& record, const Endpoint& endpoint, const ReplayOptions& options);

}  // namespace cardiospike::stream
