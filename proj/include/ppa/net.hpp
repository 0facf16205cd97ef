#pragma once

// Blocking TCP helpers for the role runners. Reads poll in short slices so a
// stop flag is noticed promptly.

#include "ppa/codec.hpp"

#include <atomic>
#include <chrono>
#include <cstdint>
#include <optional>
#include <string>

namespace ppa::net {

struct Endpoint {
    std::string host;
    std::uint16_t port = 0;
};

Endpoint parse_endpoint(const std::string& text);
std::string to_string(const Endpoint& ep);

class NetError : public Error {
public:
    using Error::Error;
};

class Socket {
public:
    Socket() = default;
    explicit Socket(int fd) : fd_(fd) {}
    ~Socket() { close(); }

    Socket(const Socket&) = delete;
    Socket& operator=(const Socket&) = delete;
    Socket(Socket&& other) noexcept : fd_(other.fd_) { other.fd_ = -1; }
    Socket& operator=(Socket&& other) noexcept;

    int fd() const { return fd_; }
    bool valid() const { return fd_ >= 0; }
    void close();
    /// Wakes any thread blocked on this socket without releasing the fd.
    void shutdown();

private:
    int fd_ = -1;
};

Socket listen_on(const Endpoint& ep, int backlog = 64);
std::uint16_t local_port(const Socket& s);

/// Waits up to `timeout` for a connection.
std::optional<Socket> accept_for(const Socket& listener, std::chrono::milliseconds timeout);

Socket connect_to(const Endpoint& ep);

/// Retries with exponential backoff (capped at 2 s) until connected or stopped.
std::optional<Socket> connect_with_retry(const Endpoint& ep, const std::atomic<bool>& stop,
                                         std::chrono::milliseconds initial_backoff = std::chrono::milliseconds(100));

void send_all(const Socket& s, std::string_view bytes);

inline void send_message(const Socket& s, const protocol::Message& msg) { send_all(s, codec::encode_message(msg)); }

/// Next frame, or nullopt on orderly close or when `stop` is raised.
/// Truncated or oversize frames throw.
std::optional<codec::Envelope> read_frame(const Socket& s, const std::atomic<bool>& stop,
                                          std::size_t max_frame = codec::kDefaultMaxFrame);

} // namespace ppa::net
