#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <utility>

#include "cosim/wire.hpp"

namespace cosim {

// Duplex, FIFO, reliable message channel carrying wire frames. Safe for one
// sending thread and one receiving thread operating concurrently.
class PeerLink {
public:
    virtual ~PeerLink() = default;

    // Throws TransportError(kClosed) once either side has closed.
    virtual void send(const Message& msg) = 0;

    // Blocks for the next message. Throws TransportError(kClosed) after the
    // peer closed and every queued frame was consumed, kTimeout when the
    // receive timeout elapses.
    virtual Message receive() = 0;

    // Graceful close: frames already sent remain deliverable to the peer.
    virtual void close() = 0;

    virtual uint64_t frames_sent() const = 0;
    virtual uint64_t frames_received() const = 0;
};

// One direction of an in-process link: a queue of encoded frames.
class FrameQueue {
public:
    void push(Bytes frame);
    // nullopt when closed and drained; throws TransportError(kTimeout) on timeout.
    std::optional<Bytes> pop(std::optional<std::chrono::nanoseconds> timeout);
    void close();
    bool closed() const;

private:
    mutable std::mutex mu_;
    std::condition_variable cv_;
    std::deque<Bytes> frames_;
    bool closed_ = false;
};

// In-process endpoint. Messages are framed with the wire codec so the byte
// stream is the same one a socket would carry.
class InProcessLink final : public PeerLink {
public:
    InProcessLink(std::shared_ptr<FrameQueue> outbound, std::shared_ptr<FrameQueue> inbound)
        : out_(std::move(outbound)), in_(std::move(inbound)) {}
    ~InProcessLink() override;

    void send(const Message& msg) override;
    Message receive() override;
    void close() override;
    uint64_t frames_sent() const override { return sent_; }
    uint64_t frames_received() const override { return received_; }

    void set_receive_timeout(std::optional<std::chrono::nanoseconds> timeout) { timeout_ = timeout; }

private:
    std::shared_ptr<FrameQueue> out_;
    std::shared_ptr<FrameQueue> in_;
    std::optional<std::chrono::nanoseconds> timeout_;
    uint64_t sent_ = 0;
    uint64_t received_ = 0;
};

std::pair<std::unique_ptr<InProcessLink>, std::unique_ptr<InProcessLink>> make_in_process_link_pair();

// Stream-socket endpoint (TCP or a connected local socket) using wire framing.
class SocketLink final : public PeerLink {
public:
    // Takes ownership of a connected stream socket.
    explicit SocketLink(int fd);
    ~SocketLink() override;

    SocketLink(const SocketLink&) = delete;
    SocketLink& operator=(const SocketLink&) = delete;

    static std::unique_ptr<SocketLink> connect_tcp(const std::string& host, uint16_t port,
                                                   std::chrono::milliseconds timeout = std::chrono::seconds(5));

    void send(const Message& msg) override;
    Message receive() override;
    void close() override;
    uint64_t frames_sent() const override { return sent_; }
    uint64_t frames_received() const override { return received_; }

    void set_receive_timeout(std::optional<std::chrono::milliseconds> timeout) { timeout_ = timeout; }

private:
    int fd_;
    bool write_closed_ = false;
    Bytes rx_;
    std::optional<std::chrono::milliseconds> timeout_;
    uint64_t sent_ = 0;
    uint64_t received_ = 0;
};

// Listening TCP socket; port 0 picks an ephemeral port.
class TcpListener {
public:
    explicit TcpListener(uint16_t port = 0, const std::string& bind_host = "127.0.0.1");
    ~TcpListener();

    TcpListener(const TcpListener&) = delete;
    TcpListener& operator=(const TcpListener&) = delete;

    uint16_t port() const { return port_; }
    std::unique_ptr<SocketLink> accept(std::chrono::milliseconds timeout = std::chrono::seconds(5));

private:
    int fd_ = -1;
    uint16_t port_ = 0;
};

}  // namespace cosim
