#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace cardiospike::stream {

struct Endpoint {
    std::string host = "127.0.0.1";
    std::uint16_t port = 0;

    std::string str() const { return host + ":" + std::to_string(port); }
};

/// "host:port"; throws std::invalid_argument.
Endpoint parse_endpoint(const std::string& text);

/// Owning file descriptor of a TCP socket.
class Socket {
public:
    Socket() = default;
    explicit Socket(int fd) : fd_(fd) {}
    Socket(Socket&& other) noexcept : fd_(other.release()) {}
    Socket& operator=(Socket&& other) noexcept;
    Socket(const Socket&) = delete;
    Socket& operator=(const Socket&) = delete;
    ~Socket() { close(); }

    int fd() const { return fd_; }
    bool valid() const { return fd_ >= 0; }
    int release() noexcept;
    void close() noexcept;

private:
    int fd_ = -1;
};

/// Throws std::system_error when the connection is refused or fails.
Socket connect_to(const Endpoint& endpoint);

/// Throws std::system_error when the peer has gone away.
void write_all(const Socket& socket, std::span<const std::uint8_t> bytes);

/// Reads one frame. Returns nullopt on a clean end of stream before the
/// first byte, or once `stop` is raised. Throws PacketError("short read") if
/// the stream ends mid-frame and PacketError("not a packet") on bad magic.
std::optional<std::vector<std::uint8_t>> read_frame(const Socket& socket, const std::atomic<bool>* stop = nullptr);

class Listener {
public:
    /// Binds and listens; port 0 picks a free port. Throws std::system_error
    /// (e.g. address in use).
    explicit Listener(const Endpoint& endpoint);

    std::uint16_t port() const { return port_; }
    /// Waits up to `timeout` for a connection.
    std::optional<Socket> accept(std::chrono::milliseconds timeout);

private:
    Socket socket_;
    std::uint16_t port_ = 0;
};

}  // namespace cardiospike::stream
