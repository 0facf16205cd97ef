#pragma once

// Helpers for tests that run role runners inside the test process.

#include "ppa/config.hpp"
#include "ppa/net.hpp"
#include "ppa/runners.hpp"

#include <atomic>
#include <chrono>
#include <functional>
#include <sstream>
#include <string>
#include <thread>

namespace ppa::testing {

/// Port the kernel just handed out on loopback. Racy by nature, good enough here.
inline std::uint16_t free_port()
{
    auto s = net::listen_on({"127.0.0.1", 0});
    return net::local_port(s);
}

inline std::string loopback(std::uint16_t port)
{
    return "127.0.0.1:" + std::to_string(port);
}

/// One runner on its own thread with its own stop flag and output buffer.
/// The buffer is only read after join().
class RunnerThread {
public:
    using Fn = int (*)(const RunConfig&, std::atomic<bool>&, std::ostream&);

    RunnerThread(Fn fn, RunConfig cfg) : cfg_(std::move(cfg))
    {
        thread_ = std::thread([this, fn] {
            try {
                rc_ = fn(cfg_, stop_, out_);
            } catch (const std::exception& e) {
                out_ << "exception " << e.what() << "\n";
                rc_ = -1;
            }
            done_ = true;
        });
    }

    ~RunnerThread() { join(); }

    void stop() { stop_ = true; }
    bool done() const { return done_.load(); }

    void join()
    {
        if (thread_.joinable()) {
            thread_.join();
        }
    }

    /// Waits for the runner to return on its own; raises stop on timeout.
    bool wait(std::chrono::milliseconds timeout)
    {
        auto deadline = std::chrono::steady_clock::now() + timeout;
        while (!done_ && std::chrono::steady_clock::now() < deadline) {
            std::this_thread::sleep_for(std::chrono::milliseconds(20));
        }
        bool finished = done_;
        stop();
        join();
        return finished;
    }

    int rc() const { return rc_; }
    std::string output() const { return out_.str(); }

private:
    RunConfig cfg_;
    std::atomic<bool> stop_{false};
    std::atomic<bool> done_{false};
    std::ostringstream out_;
    int rc_ = 0;
    std::thread thread_;
};

/// Reads frames until one that is not a notification arrives.
inline std::optional<protocol::Message> next_reply(const net::Socket& s, const std::atomic<bool>& stop)
{
    while (auto env = net::read_frame(s, stop)) {
        auto msg = codec::from_envelope(*env);
        if (!std::holds_alternative<protocol::Notification>(msg)) {
            return msg;
        }
    }
    return std::nullopt;
}

} // namespace ppa::testing
