#pragma once

#include <atomic>
#include <cstddef>
#include <functional>
#include <mutex>
#include <string>
#include <vector>

#include "cardiospike/model/detector.hpp"
#include "cardiospike/stream/socket.hpp"
#include "cardiospike/training/inference.hpp"

namespace cardiospike::stream {

struct ServeOptions {
    Endpoint endpoint;             // port 0 picks a free port
    double threshold = 0.5;
    std::size_t max_sessions = 0;  // return after this many sessions; 0 = until stopped
};

struct SessionSummary {
    std::string sensor_id;
    std::size_t samples = 0;
    std::size_t packets = 0;
    std::size_t lost_packets = 0;
    std::vector<std::size_t> discontinuities;
    std::vector<training::SpikeEvent> events;
    bool clean_end = false;  // end marker received
    std::string error;       // why the session ended early, if it did
};

/// Accepts sensor connections and runs one detection session per
/// connection on its own thread. Sessions share only the read-only model.
class Server {
public:
    using LineFn = std::function<void(const std::string&)>;

    /// Binds immediately; throws std::system_error if the port is taken.
    Server(const model::DetectorParams& params, const model::DetectorConfig& config, ServeOptions options);

    std::uint16_t port() const { return listener_.port(); }

    /// Serves until `stop` is raised or max_sessions sessions have ended.
    /// `on_event` receives one formatted line per event and `on_log` status
    /// messages; both are called under a lock. Returns the finished sessions
    /// in completion order.
    std::vector<SessionSummary> run(const std::atomic<bool>& stop, const LineFn& on_event, const LineFn& on_log = {});

private:
    SessionSummary serve_connection(Socket socket, const std::atomic<bool>& stop, const LineFn& on_event,
                                    const LineFn& on_log);

    const model::DetectorParams* params_;
    model::DetectorConfig config_;
    ServeOptions options_;
    Listener listener_;
    std::mutex output_mutex_;
};

}  // namespace cardiospike::stream
