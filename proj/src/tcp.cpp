#include "bimshare/tcp.hpp"

#include "bimshare/errors.hpp"

#include <cstring>
#include <vector>

#include <arpa/inet.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

namespace bimshare {

namespace {

void set_timeout(int fd, int timeout_ms) {
    timeval tv{};
    tv.tv_sec = timeout_ms / 1000;
    tv.tv_usec = (timeout_ms % 1000) * 1000;
    setsockopt(fd, SOL_SOCKET, SO_RCVTIMEO, &tv, sizeof(tv));
    setsockopt(fd, SOL_SOCKET, SO_SNDTIMEO, &tv, sizeof(tv));
}

void send_all(int fd, const std::string& data) {
    std::size_t off = 0;
    while (off < data.size()) {
        ssize_t n = ::send(fd, data.data() + off, data.size() - off, MSG_NOSIGNAL);
        if (n <= 0) throw ProtocolError(errc::BAD_PAYLOAD, "socket send failed");
        off += static_cast<std::size_t>(n);
    }
}

bool recv_exact(int fd, char* buf, std::size_t len) {
    std::size_t off = 0;
    while (off < len) {
        ssize_t n = ::recv(fd, buf + off, len - off, 0);
        if (n <= 0) return false;
        off += static_cast<std::size_t>(n);
    }
    return true;
}

// Reads one length-prefixed frame; false on clean EOF before any byte.
bool recv_frame(int fd, Message& out) {
    unsigned char hdr[4];
    if (!recv_exact(fd, reinterpret_cast<char*>(hdr), 4)) return false;
    std::uint32_t n = (std::uint32_t(hdr[0]) << 24) | (std::uint32_t(hdr[1]) << 16) |
                      (std::uint32_t(hdr[2]) << 8) | std::uint32_t(hdr[3]);
    if (n > kMaxFrameBytes) throw ProtocolError(errc::BAD_PAYLOAD, "frame exceeds 64 MiB");
    std::string payload(n, '\0');
    if (!recv_exact(fd, payload.data(), n))
        throw ProtocolError(errc::BAD_PAYLOAD, "truncated frame");
    out = decode_payload(payload);
    return true;
}

struct FdGuard {
    int fd;
    ~FdGuard() {
        if (fd >= 0) ::close(fd);
    }
};

} // namespace

Message TcpChannel::request(const Message& msg) {
    int fd = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd < 0) throw Error("socket() failed");
    FdGuard guard{fd};
    set_timeout(fd, timeout_ms_);

    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(port_);
    if (::inet_pton(AF_INET, host_.c_str(), &addr.sin_addr) != 1)
        throw Error("bad address: " + host_);
    if (::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0)
        throw Error("connect to " + host_ + ":" + std::to_string(port_) + " failed");

    send_all(fd, encode_frame(msg));
    Message reply;
    if (!recv_frame(fd, reply))
        throw ProtocolError(errc::BAD_PAYLOAD, "connection closed before reply");
    return reply;
}

TcpServer::TcpServer(std::uint16_t port, Handler handler) : handler_(std::move(handler)) {
    listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    if (listen_fd_ < 0) throw Error("socket() failed");
    int one = 1;
    setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
    addr.sin_port = htons(port);
    if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0) {
        ::close(listen_fd_);
        throw Error("bind to port " + std::to_string(port) + " failed");
    }
    socklen_t len = sizeof(addr);
    getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
    port_ = ntohs(addr.sin_port);
    if (::listen(listen_fd_, 16) != 0) {
        ::close(listen_fd_);
        throw Error("listen failed");
    }
}

TcpServer::~TcpServer() { stop(); }

void TcpServer::start() {
    if (running_.exchange(true)) return;
    accept_thread_ = std::thread([this] { accept_loop(); });
}

void TcpServer::stop() {
    if (!running_.exchange(false)) {
        if (listen_fd_ >= 0) {
            ::close(listen_fd_);
            listen_fd_ = -1;
        }
        return;
    }
    ::shutdown(listen_fd_, SHUT_RDWR);
    ::close(listen_fd_);
    listen_fd_ = -1;
    if (accept_thread_.joinable()) accept_thread_.join();
}

void TcpServer::accept_loop() {
    std::vector<std::thread> workers;
    while (running_) {
        int fd = ::accept(listen_fd_, nullptr, nullptr);
        if (fd < 0) break;
        workers.emplace_back([this, fd] {
            FdGuard guard{fd};
            set_timeout(fd, 10000);
            Message req;
            try {
                while (recv_frame(fd, req)) send_all(fd, encode_frame(handler_(req)));
            } catch (const std::exception&) {
                // connection-level failure: drop the connection
            }
        });
    }
    for (auto& w : workers)
        if (w.joinable()) w.join();
}

} // namespace bimshare
