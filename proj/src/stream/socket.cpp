#include "cardiospike/stream/socket.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <charconv>
#include <cstring>
#include <stdexcept>
#include <system_error>

#include "cardiospike/stream/packet.hpp"

namespace cardiospike::stream {

namespace {

constexpr int kPollMs = 100;

[[noreturn]] void throw_errno(const std::string& what) {
    throw std::system_error(errno, std::generic_category(), what);
}

sockaddr_in resolve(const Endpoint& endpoint) {
    addrinfo hints{};
    hints.ai_family = AF_INET;
    hints.ai_socktype = SOCK_STREAM;
    addrinfo* found = nullptr;
    const int rc = ::getaddrinfo(endpoint.host.c_str(), nullptr, &hints, &found);
    if (rc != 0 || found == nullptr) {
        throw std::runtime_error("cannot resolve host '" + endpoint.host + "': " + ::gai_strerror(rc));
    }
    sockaddr_in addr{};
    std::memcpy(&addr, found->ai_addr, sizeof addr);
    ::freeaddrinfo(found);
    addr.sin_port = htons(endpoint.port);
    return addr;
}

// 1 when readable, 0 on timeout.
int wait_readable(int fd, int timeout_ms) {
    pollfd p{fd, POLLIN, 0};
    for (;;) {
        const int rc = ::poll(&p, 1, timeout_ms);
        if (rc >= 0) {
            return rc;
        }
        if (errno != EINTR) {
            throw_errno("poll");
        }
    }
}

// Bytes read before end of stream or stop.
std::size_t read_some(const Socket& socket, std::uint8_t* out, std::size_t n, const std::atomic<bool>* stop) {
    std::size_t got = 0;
    while (got < n) {
        if (stop != nullptr && stop->load()) {
            return got;
        }
        if (wait_readable(socket.fd(), kPollMs) == 0) {
            continue;
        }
        const auto rc = ::recv(socket.fd(), out + got, n - got, 0);
        if (rc == 0) {
            return got;
        }
        if (rc < 0) {
            if (errno == EINTR) {
                continue;
            }
            if (errno == ECONNRESET) {
                return got;
            }
            throw_errno("recv");
        }
        got += static_cast<std::size_t>(rc);
    }
    return got;
}

}  // namespace

Endpoint parse_endpoint(const std::string& text) {
    const auto colon = text.rfind(':');
    if (colon == std::string::npos || colon == 0 || colon + 1 == text.size()) {
        throw std::invalid_argument("endpoint must be host:port, got '" + text + "'");
    }
    Endpoint e;
    e.host = text.substr(0, colon);
    unsigned port = 0;
    const char* first = text.data() + colon + 1;
    const char* last = text.data() + text.size();
    const auto [ptr, ec] = std::from_chars(first, last, port);
    if (ec != std::errc{} || ptr != last || port > 65535) {
        throw std::invalid_argument("bad port in endpoint '" + text + "'");
    }
    e.port = static_cast<std::uint16_t>(port);
    return e;
}

Socket& Socket::operator=(Socket&& other) noexcept {
    if (this != &other) {
        close();
        fd_ = other.release();
    }
    return *this;
}

int Socket::release() noexcept {
    const int fd = fd_;
    fd_ = -1;
    return fd;
}

void Socket::close() noexcept {
    if (fd_ >= 0) {
        ::close(fd_);
        fd_ = -1;
    }
}

Socket connect_to(const Endpoint& endpoint) {
    const auto addr = resolve(endpoint);
    Socket s(::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0));
    if (!s.valid()) {
        throw_errno("socket");
    }
    int one = 1;
    ::setsockopt(s.fd(), IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
    if (::connect(s.fd(), reinterpret_cast<const sockaddr*>(&addr), sizeof addr) != 0) {
        throw_errno("connect to " + endpoint.str());
    }
    return s;
}

void write_all(const Socket& socket, std::span<const std::uint8_t> bytes) {
    std::size_t sent = 0;
    while (sent < bytes.size()) {
        const auto rc = ::send(socket.fd(), bytes.data() + sent, bytes.size() - sent, MSG_NOSIGNAL);
        if (rc < 0) {
            if (errno == EINTR) {
                continue;
            }
            throw_errno("send");
        }
        sent += static_cast<std::size_t>(rc);
    }
}

std::optional<std::vector<std::uint8_t>> read_frame(const Socket& socket, const std::atomic<bool>* stop) {
    std::vector<std::uint8_t> frame(kHeaderBytes);
    const auto head = read_some(socket, frame.data(), kHeaderBytes, stop);
    if (head == 0 || (stop != nullptr && stop->load())) {
        return std::nullopt;
    }
    if (head >= kPacketMagic.size() && (frame[0] != kPacketMagic[0] || frame[1] != kPacketMagic[1])) {
        throw PacketError(PacketError::Kind::not_a_packet, "not a packet");
    }
    if (head < kHeaderBytes) {
        throw PacketError(PacketError::Kind::short_read, "short read");
    }
    const auto total = frame_length(frame);
    frame.resize(total);
    const auto body = read_some(socket, frame.data() + kHeaderBytes, total - kHeaderBytes, stop);
    if (stop != nullptr && stop->load()) {
        return std::nullopt;
    }
    if (body < total - kHeaderBytes) {
        throw PacketError(PacketError::Kind::short_read, "short read");
    }
    return frame;
}

Listener::Listener(const Endpoint& endpoint) {
    const auto addr = resolve(endpoint);
    socket_ = Socket(::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0));
    if (!socket_.valid()) {
        throw_errno("socket");
    }
    int one = 1;
    ::setsockopt(socket_.fd(), SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    if (::bind(socket_.fd(), reinterpret_cast<const sockaddr*>(&addr), sizeof addr) != 0) {
        throw_errno("bind " + endpoint.str());
    }
    if (::listen(socket_.fd(), 16) != 0) {
        throw_errno("listen");
    }
    sockaddr_in bound{};
    socklen_t len = sizeof bound;
    if (::getsockname(socket_.fd(), reinterpret_cast<sockaddr*>(&bound), &len) != 0) {
        throw_errno("getsockname");
    }
    port_ = ntohs(bound.sin_port);
}

std::optional<Socket> Listener::accept(std::chrono::milliseconds timeout) {
    if (wait_readable(socket_.fd(), static_cast<int>(timeout.count())) == 0) {
        return std::nullopt;
    }
    const int fd = ::accept4(socket_.fd(), nullptr, nullptr, SOCK_CLOEXEC);
    if (fd < 0) {
        if (errno == EINTR || errno == EAGAIN || errno == ECONNABORTED) {
            return std::nullopt;
        }
        throw_errno("accept");
    }
    return Socket(fd);
}

}  // namespace cardiospike::stream
