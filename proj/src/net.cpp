#include "ppa/net.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <thread>

namespace ppa::net {

namespace {

constexpr int kPollSliceMs = 100;

[[noreturn]] void fail(const std::string& what)
{
    throw NetError(what + ": " + std::strerror(errno));
}

sockaddr_in resolve(const Endpoint& ep)
{
    addrinfo hints{};
    hints.ai_family = AF_INET;
    hints.ai_socktype = SOCK_STREAM;
    addrinfo* res = nullptr;
    int rc = ::getaddrinfo(ep.host.c_str(), nullptr, &hints, &res);
    if (rc != 0 || res == nullptr) {
        throw NetError("cannot resolve '" + ep.host + "': " + ::gai_strerror(rc));
    }
    sockaddr_in addr{};
    std::memcpy(&addr, res->ai_addr, sizeof addr);
    ::freeaddrinfo(res);
    addr.sin_port = htons(ep.port);
    return addr;
}

// Returns false on orderly EOF before any byte, throws on EOF mid-buffer.
bool recv_exact(const Socket& s, char* out, std::size_t len, const std::atomic<bool>& stop)
{
    std::size_t got = 0;
    while (got < len) {
        pollfd pfd{s.fd(), POLLIN, 0};
        int rc = ::poll(&pfd, 1, kPollSliceMs);
        if (rc < 0) {
            if (errno == EINTR) {
                continue;
            }
            fail("poll");
        }
        if (rc == 0) {
            if (stop.load()) {
                return false;
            }
            continue;
        }
        ssize_t n = ::recv(s.fd(), out + got, len - got, 0);
        if (n == 0) {
            if (got == 0) {
                return false;
            }
            throw NetError("connection closed mid-frame");
        }
        if (n < 0) {
            if (errno == EINTR || errno == EAGAIN) {
                continue;
            }
            if (errno == ECONNRESET && got == 0) {
                return false;
            }
            fail("recv");
        }
        got += static_cast<std::size_t>(n);
    }
    return true;
}

} // namespace

Endpoint parse_endpoint(const std::string& text)
{
    auto colon = text.rfind(':');
    if (colon == std::string::npos || colon == 0 || colon + 1 == text.size()) {
        throw NetError("address '" + text + "' is not host:port");
    }
    Endpoint ep;
    ep.host = text.substr(0, colon);
    unsigned long port = 0;
    try {
        std::size_t used = 0;
        port = std::stoul(text.substr(colon + 1), &used);
        if (used != text.size() - colon - 1) {
            throw NetError("bad port");
        }
    } catch (const std::exception&) {
        throw NetError("address '" + text + "' has an invalid port");
    }
    if (port > 65535) {
        throw NetError("address '" + text + "' has an invalid port");
    }
    ep.port = static_cast<std::uint16_t>(port);
    return ep;
}

std::string to_string(const Endpoint& ep)
{
    return ep.host + ":" + std::to_string(ep.port);
}

Socket& Socket::operator=(Socket&& other) noexcept
{
    if (this != &other) {
        close();
        fd_ = other.fd_;
        other.fd_ = -1;
    }
    return *this;
}

void Socket::close()
{
    if (fd_ >= 0) {
        ::close(fd_);
        fd_ = -1;
    }
}

void Socket::shutdown()
{
    if (fd_ >= 0) {
        ::shutdown(fd_, SHUT_RDWR);
    }
}

Socket listen_on(const Endpoint& ep, int backlog)
{
    Socket s(::socket(AF_INET, SOCK_STREAM, 0));
    if (!s.valid()) {
        fail("socket");
    }
    int one = 1;
    ::setsockopt(s.fd(), SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    sockaddr_in addr = resolve(ep);
    if (::bind(s.fd(), reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0) {
        fail("bind " + to_string(ep));
    }
    if (::listen(s.fd(), backlog) != 0) {
        fail("listen");
    }
    return s;
}

std::uint16_t local_port(const Socket& s)
{
    sockaddr_in addr{};
    socklen_t len = sizeof addr;
    if (::getsockname(s.fd(), reinterpret_cast<sockaddr*>(&addr), &len) != 0) {
        fail("getsockname");
    }
    return ntohs(addr.sin_port);
}

std::optional<Socket> accept_for(const Socket& listener, std::chrono::milliseconds timeout)
{
    pollfd pfd{listener.fd(), POLLIN, 0};
    int rc = ::poll(&pfd, 1, static_cast<int>(timeout.count()));
    if (rc <= 0) {
        if (rc < 0 && errno != EINTR) {
            fail("poll");
        }
        return std::nullopt;
    }
    int fd = ::accept(listener.fd(), nullptr, nullptr);
    if (fd < 0) {
        if (errno == EINTR || errno == EAGAIN || errno == ECONNABORTED) {
            return std::nullopt;
        }
        fail("accept");
    }
    int one = 1;
    ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
    return Socket(fd);
}

Socket connect_to(const Endpoint& ep)
{
    Socket s(::socket(AF_INET, SOCK_STREAM, 0));
    if (!s.valid()) {
        fail("socket");
    }
    sockaddr_in addr = resolve(ep);
    if (::connect(s.fd(), reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0) {
        fail("connect " + to_string(ep));
    }
    int one = 1;
    ::setsockopt(s.fd(), IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
    return s;
}

std::optional<Socket> connect_with_retry(const Endpoint& ep, const std::atomic<bool>& stop,
                                         std::chrono::milliseconds initial_backoff)
{
    auto backoff = initial_backoff;
    while (!stop.load()) {
        try {
            return connect_to(ep);
        } catch (const NetError&) {
        }
        auto deadline = std::chrono::steady_clock::now() + backoff;
        while (!stop.load() && std::chrono::steady_clock::now() < deadline) {
            std::this_thread::sleep_for(std::chrono::milliseconds(20));
        }
        backoff = std::min(backoff * 2, std::chrono::milliseconds(2000));
    }
    return std::nullopt;
}

void send_all(const Socket& s, std::string_view bytes)
{
    std::size_t sent = 0;
    while (sent < bytes.size()) {
        ssize_t n = ::send(s.fd(), bytes.data() + sent, bytes.size() - sent, MSG_NOSIGNAL);
        if (n < 0) {
            if (errno == EINTR) {
                continue;
            }
            fail("send");
        }
        sent += static_cast<std::size_t>(n);
    }
}

std::optional<codec::Envelope> read_frame(const Socket& s, const std::atomic<bool>& stop, std::size_t max_frame)
{
    char header[4];
    if (!recv_exact(s, header, sizeof header, stop)) {
        return std::nullopt;
    }
    std::uint32_t len = codec::frame_length(std::string_view(header, 4), max_frame);
    std::string body(len, '\0');
    if (len > 0 && !recv_exact(s, body.data(), len, stop)) {
        if (stop.load()) {
            return std::nullopt;
        }
        throw NetError("connection closed mid-frame");
    }
    return codec::parse(body);
}

} // namespace ppa::net
