#pragma once

#include "bimshare/wire.hpp"

#include <atomic>
#include <cstdint>
#include <functional>
#include <string>
#include <thread>

namespace bimshare {

// Blocking request/response channel over a TCP connection. One frame out,
// one frame back; a fresh connection per request keeps the channel
// stateless. Default timeout 10 s.
class TcpChannel final : public Channel {
public:
    TcpChannel(std::string host, std::uint16_t port, int timeout_ms = 10000)
        : host_(std::move(host)), port_(port), timeout_ms_(timeout_ms) {}

    Message request(const Message& msg) override;

private:
    std::string host_;
    std::uint16_t port_;
    int timeout_ms_;
};

// Accept loop serving framed requests with a handler; one thread per
// connection, frames on a connection handled sequentially.
class TcpServer {
public:
    using Handler = std::function<Message(const Message&)>;

    // Binds immediately (port 0 picks a free port); serve loop starts on
    // start(). Throws Error on bind failure.
    TcpServer(std::uint16_t port, Handler handler);
    ~TcpServer();

    std::uint16_t port() const { return port_; }
    void start();
    void stop();

private:
    void accept_loop();

    int listen_fd_ = -1;
    std::uint16_t port_ = 0;
    Handler handler_;
    std::thread accept_thread_;
    std::atomic<bool> running_{false};
};

} // namespace bimshare
