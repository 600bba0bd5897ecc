#include "cardiospike/stream/replay.hpp"

#include <chrono>
#include <cmath>
#include <random>
#include <stdexcept>
#include <thread>

namespace cardiospike::stream {

std::vector<std::uint16_t> wire_rr(const data::RhythmRecord& record) {
    std::vector<std::uint16_t> out;
    out.reserve(record.rr.size());
    for (double v : record.rr) {
        const auto ms = std::lround(v);
        if (ms < 1 || ms > 65535) {
            throw std::invalid_argument("replay: rr value " + std::to_string(v) + " does not fit the wire format");
        }
        out.push_back(static_cast<std::uint16_t>(ms));
    }
    return out;
}

std::vector<SensorPacket> sensor_packets(const data::RhythmRecord& record, const std::string& sensor_id) {
    const auto rr = wire_rr(record);
    std::vector<SensorPacket> packets;
    packets.reserve(rr.size());
    std::uint64_t time = 0;
    for (std::size_t i = 0; i < rr.size(); ++i) {
        time += rr[i];
        if (time > UINT32_MAX) {
            throw std::invalid_argument("replay: record '" + record.id + "' exceeds the 32-bit time offset");
        }
        SensorPacket p;
        p.sensor_id = sensor_id;
        p.sequence = static_cast<std::uint16_t>(i);
        p.time_ms = static_cast<std::uint32_t>(time);
        const std::size_t first = i + 1 > kMaxWindow ? i + 1 - kMaxWindow : 0;
        p.rr.assign(rr.begin() + static_cast<std::ptrdiff_t>(first), rr.begin() + static_cast<std::ptrdiff_t>(i + 1));
        validate_packet(p);
        packets.push_back(std::move(p));
    }
    return packets;
}

std::vector<bool> drop_mask(std::size_t packets, double drop, std::size_t burst, std::uint64_t seed) {
    if (!(drop >= 0.0 && drop <= 1.0)) {
        throw std::invalid_argument("drop fraction must lie in [0, 1]");
    }
    if (burst == 0) {
        throw std::invalid_argument("drop burst must be positive");
    }
    std::vector<bool> mask(packets, false);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (std::size_t begin = 0; begin < packets; begin += burst) {
        if (u(rng) < drop) {
            for (std::size_t i = begin; i < std::min(packets, begin + burst); ++i) {
                mask[i] = true;
            }
        }
    }
    return mask;
}

ReplayStats replay_sensor(const data::RhythmRecord& record, const Endpoint& endpoint, const ReplayOptions& options) {
    if (record.rr.empty()) {
        throw std::invalid_argument("replay: record '" + record.id + "' is empty");
    }
    if (!(options.speed > 0.0)) {
        throw std::invalid_argument("replay: speed must be positive");
    }
    const std::string id = options.sensor_id.empty() ? record.id : options.sensor_id;
    const auto packets = sensor_packets(record, id);
    const auto mask = drop_mask(packets.size(), options.drop, options.drop_burst, options.seed);

    ReplayStats stats;
    stats.packets = packets.size();
    auto socket = connect_to(endpoint);

    using clock = std::chrono::steady_clock;
    const bool paced = std::isfinite(options.speed);
    const auto period = std::chrono::duration<double>(1.0 / options.speed);
    const auto start = clock::now();
    for (std::size_t i = 0; i < packets.size(); ++i) {
        if (options.disconnect_after > 0 && i == options.disconnect_after) {
            return stats;
        }
        if (paced) {
            std::this_thread::sleep_until(start + std::chrono::duration_cast<clock::duration>(period * double(i)));
        }
        if (mask[i]) {
            ++stats.dropped;
            continue;
        }
        write_all(socket, encode_packet(packets[i]));
        ++stats.sent;
    }
    const auto& last = packets.back();
    write_all(socket, encode_end_marker(id, static_cast<std::uint16_t>(last.sequence + 1), last.time_ms));
    stats.completed = true;
    return stats;
}

}  // namespace cardiospike::stream
