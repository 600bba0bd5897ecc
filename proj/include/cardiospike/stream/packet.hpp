#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace cardiospike::stream {

// Wire layout, all integers big-endian:
//   magic[2] id[8] sequence[2] time[4] count[1] rr[2 * count] xor[1]
inline constexpr std::array<std::uint8_t, 2> kPacketMagic{0x43, 0x53};
inline constexpr std::size_t kSensorIdBytes = 8;
inline constexpr std::size_t kHeaderBytes = 2 + kSensorIdBytes + 2 + 4 + 1;
inline constexpr std::size_t kMaxWindow = 15;
inline constexpr std::size_t kMinFrameBytes = kHeaderBytes + 1;
inline constexpr std::size_t kMaxFrameBytes = kHeaderBytes + 2 * kMaxWindow + 1;

struct SensorPacket {
    std::string sensor_id;          // 1..8 printable ASCII, no leading or trailing space
    std::uint16_t sequence = 0;     // wraps
    std::uint32_t time_ms = 0;      // end of the newest interval, from record start
    std::vector<std::uint16_t> rr;  // oldest first; empty only in the end marker

    bool is_end_marker() const { return rr.empty(); }

    friend bool operator==(const SensorPacket&, const SensorPacket&) = default;
};

class PacketError : public std::runtime_error {
public:
    enum class Kind { short_read, not_a_packet, corrupt, invalid };

    PacketError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    Kind kind() const noexcept { return kind_; }

private:
    Kind kind_;
};

/// Throws std::invalid_argument unless 1 <= rr.size() <= 15 and the id fits.
void validate_packet(const SensorPacket& packet);

std::vector<std::uint8_t> encode_packet(const SensorPacket& packet);

/// Frame with an empty rr window that closes a stream.
std::vector<std::uint8_t> encode_end_marker(const std::string& sensor_id, std::uint16_t sequence,
                                            std::uint32_t time_ms);

/// Parses exactly one frame. Checks run in order: size ("short read"),
/// magic ("not a packet"), XOR over the whole buffer ("corrupt"), then the
/// declared count against the buffer length.
SensorPacket decode_packet(std::span<const std::uint8_t> bytes);

/// Total frame length implied by a header; requires kHeaderBytes bytes.
std::size_t frame_length(std::span<const std::uint8_t> header);

}  // namespace cardiospike::stream
