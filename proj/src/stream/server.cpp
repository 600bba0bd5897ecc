#include "cardiospike/stream/server.hpp"

#include <system_error>
#include <thread>

#include "cardiospike/stream/online.hpp"
#include "cardiospike/stream/packet.hpp"

namespace cardiospike::stream {

Server::Server(const model::DetectorParams& params, const model::DetectorConfig& config, ServeOptions options)
    : params_(&params), config_(config), options_(std::move(options)), listener_(options_.endpoint) {
    config_.validate();
    if (!(options_.threshold > 0.0 && options_.threshold < 1.0)) {
        throw std::invalid_argument("serve: threshold must lie in (0, 1)");
    }
}

SessionSummary Server::serve_connection(Socket socket, const std::atomic<bool>& stop, const LineFn& on_event,
                                        const LineFn& on_log) {
    SessionSummary summary;
    Session session(*params_, config_, options_.threshold);
    std::size_t seen_discontinuities = 0;

    auto emit = [&](const std::vector<training::SpikeEvent>& events) {
        if (events.empty()) {
            return;
        }
        std::lock_guard lock(output_mutex_);
        for (const auto& e : events) {
            summary.events.push_back(e);
            if (on_event) {
                on_event(format_event(session.state().sensor_id, e));
            }
        }
    };
    auto log = [&](const std::string& msg) {
        if (on_log) {
            std::lock_guard lock(output_mutex_);
            on_log(msg);
        }
    };

    try {
        for (;;) {
            auto frame = read_frame(socket, &stop);
            if (!frame) {
                summary.error = stop.load() ? "interrupted" : "connection closed without end marker";
                break;
            }
            const auto packet = decode_packet(*frame);
            if (packet.is_end_marker()) {
                summary.clean_end = true;
                break;
            }
            emit(session.on_packet(packet));
            const auto& d = session.state().discontinuities;
            for (; seen_discontinuities < d.size(); ++seen_discontinuities) {
                log("session " + session.state().sensor_id + ": discontinuity at sample " +
                    std::to_string(d[seen_discontinuities]));
            }
        }
    } catch (const std::exception& e) {
        summary.error = e.what();
    }
    emit(session.finish());

    const auto& state = session.state();
    summary.sensor_id = state.sensor_id;
    summary.samples = state.rr.size();
    summary.packets = state.packets;
    summary.lost_packets = state.lost_packets;
    summary.discontinuities = state.discontinuities;
    log("session " + (state.sensor_id.empty() ? std::string("?") : state.sensor_id) + " ended: " +
        std::to_string(summary.samples) + " samples, " + std::to_string(summary.packets) + " packets, " +
        std::to_string(summary.discontinuities.size()) + " discontinuities, " + std::to_string(summary.events.size()) +
        " events" + (summary.clean_end ? "" : " (" + summary.error + ")"));
    return summary;
}

std::vector<SessionSummary> Server::run(const std::atomic<bool>& stop, const LineFn& on_event, const LineFn& on_log) {
    std::vector<SessionSummary> finished;
    std::mutex finished_mutex;
    std::vector<std::thread> workers;
    std::size_t accepted = 0;

    while (!stop.load() && (options_.max_sessions == 0 || accepted < options_.max_sessions)) {
        auto socket = listener_.accept(std::chrono::milliseconds(100));
        if (!socket) {
            continue;
        }
        ++accepted;
        workers.emplace_back([this, s = std::move(*socket), &stop, &on_event, &on_log, &finished,
                              &finished_mutex]() mutable {
            auto summary = serve_connection(std::move(s), stop, on_event, on_log);
            std::lock_guard lock(finished_mutex);
            finished.push_back(std::move(summary));
        });
    }
    for (auto& w : workers) {
        w.join();
    }
    return finished;
}

}  // namespace cardiospike::stream
