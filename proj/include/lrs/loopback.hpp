#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <functional>
#include <list>
#include <mutex>
#include <string>
#include <thread>

#include "lrs/op_node.hpp"

// Real TCP transport for the query protocol, used to check the OP node as a
// concurrent server. The simulator never goes through it.
namespace lrs::loopback {

/// Serves an OpNode on 127.0.0.1, one thread per connection.
class OpServer {
public:
    using Clock = std::function<std::int64_t()>;

    OpServer(op::OpNode& node, Clock clock);
    ~OpServer();
    OpServer(const OpServer&) = delete;
    OpServer& operator=(const OpServer&) = delete;

    /// Port 0 picks a free one. Returns the bound port.
    int start(int port = 0);
    void stop();

private:
    void accept_loop();
    void serve(int fd);

    op::OpNode& node_;
    Clock clock_;
    int listen_fd_ = -1;
    std::atomic<bool> running_{false};
    std::thread acceptor_;
    std::mutex mu_;
    std::list<std::thread> workers_;
    std::list<int> client_fds_;
};

class OpClient {
public:
    OpClient(const std::string& host, int port);
    ~OpClient();
    OpClient(const OpClient&) = delete;
    OpClient& operator=(const OpClient&) = delete;

    /// Sends one message and reads one reply. Throws UnavailableError on
    /// timeout or a closed connection.
    Bytes request(std::span<const std::uint8_t> message, std::chrono::milliseconds timeout);
    proto::ReplyMessage call(const proto::QueryMessage& q,
                             std::chrono::milliseconds timeout = std::chrono::milliseconds(2000));

private:
    int fd_ = -1;
};

}  // namespace lrs::loopback
