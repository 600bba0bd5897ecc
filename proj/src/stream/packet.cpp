#include "cardiospike/stream/packet.hpp"

#include <algorithm>

namespace cardiospike::stream {

namespace {

void put16(std::uint8_t* at, std::uint16_t v) {
    at[0] = static_cast<std::uint8_t>(v >> 8);
    at[1] = static_cast<std::uint8_t>(v);
}

void put32(std::uint8_t* at, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) {
        at[i] = static_cast<std::uint8_t>(v >> (24 - 8 * i));
    }
}

std::uint16_t get16(std::span<const std::uint8_t> b, std::size_t at) {
    return static_cast<std::uint16_t>((b[at] << 8) | b[at + 1]);
}

std::uint32_t get32(std::span<const std::uint8_t> b, std::size_t at) {
    return (std::uint32_t{b[at]} << 24) | (std::uint32_t{b[at + 1]} << 16) | (std::uint32_t{b[at + 2]} << 8) |
           std::uint32_t{b[at + 3]};
}

void check_id(const std::string& id) {
    if (id.empty() || id.size() > kSensorIdBytes) {
        throw std::invalid_argument("sensor id must have 1 to 8 characters: '" + id + "'");
    }
    for (char c : id) {
        if (c < 0x20 || c > 0x7e) {
            throw std::invalid_argument("sensor id must be printable ASCII");
        }
    }
    if (id.front() == ' ' || id.back() == ' ') {
        throw std::invalid_argument("sensor id must not start or end with a space");
    }
}

std::vector<std::uint8_t> encode_frame(const std::string& id, std::uint16_t sequence, std::uint32_t time_ms,
                                       const std::vector<std::uint16_t>& rr) {
    std::vector<std::uint8_t> out(kMinFrameBytes + 2 * rr.size(), static_cast<std::uint8_t>(' '));
    out[0] = kPacketMagic[0];
    out[1] = kPacketMagic[1];
    std::copy(id.begin(), id.end(), out.begin() + 2);
    put16(&out[2 + kSensorIdBytes], sequence);
    put32(&out[4 + kSensorIdBytes], time_ms);
    out[kHeaderBytes - 1] = static_cast<std::uint8_t>(rr.size());
    for (std::size_t i = 0; i < rr.size(); ++i) {
        put16(&out[kHeaderBytes + 2 * i], rr[i]);
    }
    std::uint8_t x = 0;
    for (std::size_t i = 0; i + 1 < out.size(); ++i) {
        x ^= out[i];
    }
    out.back() = x;
    return out;
}

}  // namespace

void validate_packet(const SensorPacket& packet) {
    check_id(packet.sensor_id);
    if (packet.rr.empty() || packet.rr.size() > kMaxWindow) {
        throw std::invalid_argument("packet rr count " + std::to_string(packet.rr.size()) + " outside 1..15");
    }
}

std::vector<std::uint8_t> encode_packet(const SensorPacket& packet) {
    validate_packet(packet);
    return encode_frame(packet.sensor_id, packet.sequence, packet.time_ms, packet.rr);
}

std::vector<std::uint8_t> encode_end_marker(const std::string& sensor_id, std::uint16_t sequence,
                                            std::uint32_t time_ms) {
    check_id(sensor_id);
    return encode_frame(sensor_id, sequence, time_ms, {});
}

std::size_t frame_length(std::span<const std::uint8_t> header) {
    if (header.size() < kHeaderBytes) {
        throw PacketError(PacketError::Kind::short_read, "short read");
    }
    return kMinFrameBytes + 2 * std::size_t{header[kHeaderBytes - 1]};
}

SensorPacket decode_packet(std::span<const std::uint8_t> bytes) {
    using Kind = PacketError::Kind;
    if (bytes.size() < kPacketMagic.size()) {
        throw PacketError(Kind::short_read, "short read");
    }
    if (!std::equal(kPacketMagic.begin(), kPacketMagic.end(), bytes.begin())) {
        throw PacketError(Kind::not_a_packet, "not a packet");
    }
    if (bytes.size() < kMinFrameBytes) {
        throw PacketError(Kind::short_read, "short read");
    }
    std::uint8_t x = 0;
    for (auto b : bytes) {
        x ^= b;
    }
    if (x != 0) {
        throw PacketError(Kind::corrupt, "corrupt");
    }
    const std::size_t expected = frame_length(bytes);
    if (bytes.size() < expected) {
        throw PacketError(Kind::short_read, "short read");
    }
    if (bytes.size() > expected) {
        throw PacketError(Kind::invalid, "trailing bytes after packet");
    }
    const std::size_t count = bytes[kHeaderBytes - 1];
    if (count > kMaxWindow) {
        throw PacketError(Kind::invalid, "rr count " + std::to_string(count) + " exceeds 15");
    }

    SensorPacket p;
    std::string id(bytes.begin() + 2, bytes.begin() + 2 + kSensorIdBytes);
    id.erase(id.find_last_not_of(' ') + 1);
    p.sensor_id = std::move(id);
    p.sequence = get16(bytes, 2 + kSensorIdBytes);
    p.time_ms = get32(bytes, 4 + kSensorIdBytes);
    p.rr.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        p.rr.push_back(get16(bytes, kHeaderBytes + 2 * i));
    }
    try {
        check_id(p.sensor_id);
    } catch (const std::invalid_argument& e) {
        throw PacketError(Kind::invalid, e.what());
    }
    return p;
}

}  // namespace cardiospike::stream
