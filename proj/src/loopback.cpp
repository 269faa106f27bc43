#include "lrs/loopback.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>

#include "lrs/error.hpp"
#include "lrs/wire.hpp"

namespace lrs::loopback {

namespace {

bool write_all(int fd, std::span<const std::uint8_t> data) {
    std::size_t sent = 0;
    while (sent < data.size()) {
        auto n = ::send(fd, data.data() + sent, data.size() - sent, MSG_NOSIGNAL);
        if (n < 0 && errno == EINTR) continue;
        if (n <= 0) return false;
        sent += static_cast<std::size_t>(n);
    }
    return true;
}

/// Reads until `buffer` holds one complete message; false on EOF, error or timeout.
bool read_message(int fd, Bytes& buffer, Bytes& message, int timeout_ms) {
    for (;;) {
        if (auto size = wire::complete_message_size(buffer)) {
            message.assign(buffer.begin(), buffer.begin() + static_cast<std::ptrdiff_t>(*size));
            buffer.erase(buffer.begin(), buffer.begin() + static_cast<std::ptrdiff_t>(*size));
            return true;
        }
        pollfd p{fd, POLLIN, 0};
        int r = ::poll(&p, 1, timeout_ms);
        if (r < 0 && errno == EINTR) continue;
        if (r <= 0) return false;
        std::uint8_t chunk[4096];
        auto n = ::recv(fd, chunk, sizeof chunk, 0);
        if (n < 0 && errno == EINTR) continue;
        if (n <= 0) return false;
        buffer.insert(buffer.end(), chunk, chunk + n);
    }
}

}  // namespace

OpServer::OpServer(op::OpNode& node, Clock clock) : node_(node), clock_(std::move(clock)) {}

OpServer::~OpServer() { stop(); }

int OpServer::start(int port) {
    listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    if (listen_fd_ < 0) throw UnavailableError(std::string("socket: ") + std::strerror(errno));
    int one = 1;
    ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
    addr.sin_port = htons(static_cast<std::uint16_t>(port));
    if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) < 0 || ::listen(listen_fd_, 16) < 0) {
        ::close(listen_fd_);
        listen_fd_ = -1;
        throw UnavailableError(std::string("bind: ") + std::strerror(errno));
    }
    socklen_t len = sizeof addr;
    ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
    running_ = true;
    acceptor_ = std::thread([this] { accept_loop(); });
    return ntohs(addr.sin_port);
}

void OpServer::accept_loop() {
    while (running_) {
        pollfd p{listen_fd_, POLLIN, 0};
        if (::poll(&p, 1, 50) <= 0) continue;
        int fd = ::accept(listen_fd_, nullptr, nullptr);
        if (fd < 0) continue;
        int one = 1;
        ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
        std::lock_guard lock(mu_);
        client_fds_.push_back(fd);
        workers_.emplace_back([this, fd] { serve(fd); });
    }
}

void OpServer::serve(int fd) {
    Bytes buffer;
    Bytes message;
    while (running_) {
        if (!read_message(fd, buffer, message, 50)) {
            // Timeouts just recheck running_; EOF and errors end the connection.
            pollfd p{fd, POLLIN, 0};
            if (::poll(&p, 1, 0) > 0) {
                std::uint8_t probe;
                if (::recv(fd, &probe, 1, MSG_PEEK) <= 0) break;
            }
            continue;
        }
        auto reply = node_.handle_bytes(message, clock_());
        if (!write_all(fd, reply)) break;
    }
    ::shutdown(fd, SHUT_RDWR);
}

void OpServer::stop() {
    if (!running_.exchange(false)) return;
    if (acceptor_.joinable()) acceptor_.join();
    std::list<std::thread> workers;
    {
        std::lock_guard lock(mu_);
        workers.swap(workers_);
    }
    for (auto& w : workers) w.join();
    for (int fd : client_fds_) ::close(fd);
    client_fds_.clear();
    ::close(listen_fd_);
    listen_fd_ = -1;
}

OpClient::OpClient(const std::string& host, int port) {
    fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd_ < 0) throw UnavailableError(std::string("socket: ") + std::strerror(errno));
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(static_cast<std::uint16_t>(port));
    if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) throw ConfigError("bad IPv4 address '" + host + "'");
    if (::connect(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) < 0) {
        ::close(fd_);
        fd_ = -1;
        throw UnavailableError(std::string("connect: ") + std::strerror(errno));
    }
    int one = 1;
    ::setsockopt(fd_, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
}

OpClient::~OpClient() {
    if (fd_ >= 0) ::close(fd_);
}

Bytes OpClient::request(std::span<const std::uint8_t> message, std::chrono::milliseconds timeout) {
    if (!write_all(fd_, message)) throw UnavailableError("connection closed while sending");
    Bytes buffer;
    Bytes reply;
    if (!read_message(fd_, buffer, reply, static_cast<int>(timeout.count())))
        throw UnavailableError("no reply within " + std::to_string(timeout.count()) + " ms");
    return reply;
}

proto::ReplyMessage OpClient::call(const proto::QueryMessage& q, std::chrono::milliseconds timeout) {
    return wire::decode_reply(request(wire::encode(q), timeout));
}

}  // namespace lrs::loopback
