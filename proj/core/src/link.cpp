#include "cosim/link.hpp"

#include <arpa/inet.h>
#include <fcntl.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>

#include "cosim/error.hpp"

namespace cosim {

void FrameQueue::push(Bytes frame) {
    {
        std::lock_guard lock(mu_);
        if (closed_) throw TransportError(TransportErrorKind::kClosed, "link closed");
        frames_.push_back(std::move(frame));
    }
    cv_.notify_one();
}

std::optional<Bytes> FrameQueue::pop(std::optional<std::chrono::nanoseconds> timeout) {
    std::unique_lock lock(mu_);
    const auto ready = [this] { return !frames_.empty() || closed_; };
    if (timeout) {
        if (!cv_.wait_for(lock, *timeout, ready)) {
            throw TransportError(TransportErrorKind::kTimeout, "receive timed out");
        }
    } else {
        cv_.wait(lock, ready);
    }
    if (frames_.empty()) return std::nullopt;
    Bytes frame = std::move(frames_.front());
    frames_.pop_front();
    return frame;
}

void FrameQueue::close() {
    {
        std::lock_guard lock(mu_);
        closed_ = true;
    }
    cv_.notify_all();
}

bool FrameQueue::closed() const {
    std::lock_guard lock(mu_);
    return closed_;
}

InProcessLink::~InProcessLink() { close(); }

void InProcessLink::send(const Message& msg) {
    out_->push(encode_frame(msg));
    ++sent_;
}

Message InProcessLink::receive() {
    std::optional<Bytes> frame = in_->pop(timeout_);
    if (!frame) throw TransportError(TransportErrorKind::kClosed, "peer closed the link");
    FrameDecode d = decode_frame(*frame);
    if (!d.message || !d.remaining.empty()) {
        throw TransportError(TransportErrorKind::kIo, "in-process frame was not exactly one message");
    }
    ++received_;
    return std::move(*d.message);
}

void InProcessLink::close() {
    out_->close();
}

std::pair<std::unique_ptr<InProcessLink>, std::unique_ptr<InProcessLink>> make_in_process_link_pair() {
    auto a_to_b = std::make_shared<FrameQueue>();
    auto b_to_a = std::make_shared<FrameQueue>();
    return {std::make_unique<InProcessLink>(a_to_b, b_to_a), std::make_unique<InProcessLink>(b_to_a, a_to_b)};
}

namespace {

[[noreturn]] void io_error(const std::string& what) {
    throw TransportError(TransportErrorKind::kIo, what + ": " + std::strerror(errno));
}

// Waits for `events` on fd; false on timeout.
bool wait_fd(int fd, short events, std::optional<std::chrono::milliseconds> timeout) {
    pollfd pfd{fd, events, 0};
    const int ms = timeout ? static_cast<int>(timeout->count()) : -1;
    for (;;) {
        const int rc = ::poll(&pfd, 1, ms);
        if (rc > 0) return true;
        if (rc == 0) return false;
        if (errno != EINTR) io_error("poll");
    }
}

}  // namespace

SocketLink::SocketLink(int fd) : fd_(fd) {
    int one = 1;
    ::setsockopt(fd_, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
}

SocketLink::~SocketLink() {
    if (fd_ >= 0) ::close(fd_);
}

std::unique_ptr<SocketLink> SocketLink::connect_tcp(const std::string& host, uint16_t port,
                                                    std::chrono::milliseconds timeout) {
    addrinfo hints{};
    hints.ai_family = AF_INET;
    hints.ai_socktype = SOCK_STREAM;
    addrinfo* res = nullptr;
    const std::string service = std::to_string(port);
    if (::getaddrinfo(host.c_str(), service.c_str(), &hints, &res) != 0 || res == nullptr) {
        throw TransportError(TransportErrorKind::kIo, "cannot resolve " + host);
    }
    const int fd = ::socket(res->ai_family, res->ai_socktype, res->ai_protocol);
    if (fd < 0) {
        ::freeaddrinfo(res);
        io_error("socket");
    }
    const int flags = ::fcntl(fd, F_GETFL, 0);
    ::fcntl(fd, F_SETFL, flags | O_NONBLOCK);
    int rc = ::connect(fd, res->ai_addr, res->ai_addrlen);
    ::freeaddrinfo(res);
    if (rc != 0 && errno != EINPROGRESS) {
        ::close(fd);
        io_error("connect");
    }
    if (rc != 0) {
        if (!wait_fd(fd, POLLOUT, timeout)) {
            ::close(fd);
            throw TransportError(TransportErrorKind::kTimeout, "connect timed out");
        }
        int err = 0;
        socklen_t len = sizeof(err);
        ::getsockopt(fd, SOL_SOCKET, SO_ERROR, &err, &len);
        if (err != 0) {
            ::close(fd);
            errno = err;
            io_error("connect");
        }
    }
    ::fcntl(fd, F_SETFL, flags);
    return std::make_unique<SocketLink>(fd);
}

void SocketLink::send(const Message& msg) {
    if (write_closed_) throw TransportError(TransportErrorKind::kClosed, "link closed");
    const Bytes frame = encode_frame(msg);
    size_t off = 0;
    while (off < frame.size()) {
        const ssize_t n = ::send(fd_, frame.data() + off, frame.size() - off, MSG_NOSIGNAL);
        if (n < 0) {
            if (errno == EINTR) continue;
            if (errno == EPIPE || errno == ECONNRESET) throw TransportError(TransportErrorKind::kClosed, "peer closed the link");
            io_error("send");
        }
        off += static_cast<size_t>(n);
    }
    ++sent_;
}

Message SocketLink::receive() {
    for (;;) {
        if (!rx_.empty()) {
            FrameDecode d = decode_frame(rx_);
            if (d.message) {
                rx_.erase(rx_.begin(), rx_.end() - static_cast<std::ptrdiff_t>(d.remaining.size()));
                ++received_;
                return std::move(*d.message);
            }
        }
        if (!wait_fd(fd_, POLLIN, timeout_)) throw TransportError(TransportErrorKind::kTimeout, "receive timed out");
        uint8_t buf[16384];
        const ssize_t n = ::recv(fd_, buf, sizeof(buf), 0);
        if (n < 0) {
            if (errno == EINTR) continue;
            if (errno == ECONNRESET) throw TransportError(TransportErrorKind::kClosed, "peer closed the link");
            io_error("recv");
        }
        if (n == 0) {
            if (!rx_.empty()) throw TransportError(TransportErrorKind::kIo, "peer closed mid-frame");
            throw TransportError(TransportErrorKind::kClosed, "peer closed the link");
        }
        rx_.insert(rx_.end(), buf, buf + n);
    }
}

void SocketLink::close() {
    if (write_closed_) return;
    write_closed_ = true;
    ::shutdown(fd_, SHUT_WR);
}

TcpListener::TcpListener(uint16_t port, const std::string& bind_host) {
    fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd_ < 0) io_error("socket");
    int one = 1;
    ::setsockopt(fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(port);
    if (::inet_pton(AF_INET, bind_host.c_str(), &addr.sin_addr) != 1) {
        ::close(fd_);
        throw TransportError(TransportErrorKind::kIo, "invalid bind address " + bind_host);
    }
    if (::bind(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0 || ::listen(fd_, 4) != 0) {
        const int saved = errno;
        ::close(fd_);
        errno = saved;
        io_error("bind/listen");
    }
    socklen_t len = sizeof(addr);
    ::getsockname(fd_, reinterpret_cast<sockaddr*>(&addr), &len);
    port_ = ntohs(addr.sin_port);
}

TcpListener::~TcpListener() {
    if (fd_ >= 0) ::close(fd_);
}

std::unique_ptr<SocketLink> TcpListener::accept(std::chrono::milliseconds timeout) {
    if (!wait_fd(fd_, POLLIN, timeout)) throw TransportError(TransportErrorKind::kTimeout, "accept timed out");
    const int fd = ::accept(fd_, nullptr, nullptr);
    if (fd < 0) io_error("accept");
    return std::make_unique<SocketLink>(fd);
}

}  // namespace cosim
