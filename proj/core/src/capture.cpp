#include "cosim/capture.hpp"

#include <arpa/inet.h>
#include <fcntl.h>
#include <linux/if.h>
#include <linux/if_tun.h>
#include <netinet/in.h>
#include <sys/ioctl.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstdio>
#include <cstring>
#include <utility>

#include "cosim/error.hpp"

namespace cosim {

void InProcessBackend::Endpoint::send(Ipv4 dst, Bytes payload) { owner_.ingest({address_, dst, std::move(payload)}); }

std::optional<RawPacket> InProcessBackend::Endpoint::try_receive() {
    std::lock_guard lock(mu_);
    if (inbox_.empty()) return std::nullopt;
    RawPacket pkt = std::move(inbox_.front());
    inbox_.pop_front();
    return pkt;
}

std::vector<RawPacket> InProcessBackend::Endpoint::receive_all() {
    std::lock_guard lock(mu_);
    std::vector<RawPacket> out(std::make_move_iterator(inbox_.begin()), std::make_move_iterator(inbox_.end()));
    inbox_.clear();
    return out;
}

uint64_t InProcessBackend::Endpoint::delivered() const {
    std::lock_guard lock(mu_);
    return delivered_;
}

InProcessBackend::InProcessBackend(const std::vector<Ipv4>& addresses) {
    for (Ipv4 a : addresses) {
        if (endpoints_.count(a) != 0) throw ConfigError("", "duplicate endpoint address " + a.to_string());
        endpoints_.emplace(a, std::unique_ptr<Endpoint>(new Endpoint(*this, a)));
    }
}

InProcessBackend::Endpoint& InProcessBackend::endpoint(Ipv4 address) {
    auto it = endpoints_.find(address);
    if (it == endpoints_.end()) throw ConfigError("", "no endpoint for address " + address.to_string());
    return *it->second;
}

void InProcessBackend::ingest(RawPacket pkt) {
    std::lock_guard lock(mu_);
    ingress_.push_back(std::move(pkt));
}

std::vector<RawPacket> InProcessBackend::drain_ingress() {
    std::lock_guard lock(mu_);
    std::vector<RawPacket> out;
    out.swap(ingress_);
    return out;
}

void InProcessBackend::deliver(Ipv4 src, Ipv4 dst, Bytes payload) {
    auto it = endpoints_.find(dst);
    if (it == endpoints_.end()) {
        std::lock_guard lock(mu_);
        ++undeliverable_;
        return;
    }
    Endpoint& ep = *it->second;
    std::lock_guard lock(ep.mu_);
    ep.inbox_.push_back({src, dst, std::move(payload)});
    ++ep.delivered_;
}

uint64_t InProcessBackend::undeliverable() const {
    std::lock_guard lock(mu_);
    return undeliverable_;
}

namespace {

[[noreturn]] void tun_error(const std::string& what) {
    throw TransportError(TransportErrorKind::kIo, "TUN setup failed (" + what + "): " + std::strerror(errno));
}

}  // namespace

TunBackend::TunBackend(const std::vector<Ipv4>& addresses, const std::string& name_prefix) {
    const int ctl = ::socket(AF_INET, SOCK_DGRAM, 0);
    if (ctl < 0) tun_error("control socket");
    try {
        for (size_t i = 0; i < addresses.size(); ++i) {
            Device dev;
            dev.address = addresses[i];
            dev.fd = ::open("/dev/net/tun", O_RDWR | O_NONBLOCK | O_CLOEXEC);
            if (dev.fd < 0) tun_error("open /dev/net/tun");
            devices_.push_back(dev);

            ifreq ifr{};
            ifr.ifr_flags = IFF_TUN | IFF_NO_PI;
            std::snprintf(ifr.ifr_name, IFNAMSIZ, "%s%zu", name_prefix.c_str(), i);
            if (::ioctl(devices_.back().fd, TUNSETIFF, &ifr) < 0) tun_error("TUNSETIFF");
            devices_.back().name = ifr.ifr_name;

            auto* sin = reinterpret_cast<sockaddr_in*>(&ifr.ifr_addr);
            sin->sin_family = AF_INET;
            sin->sin_addr.s_addr = htonl(addresses[i].value());
            if (::ioctl(ctl, SIOCSIFADDR, &ifr) < 0) tun_error("SIOCSIFADDR " + devices_.back().name);

            // Point-to-point /32 interface.
            sin = reinterpret_cast<sockaddr_in*>(&ifr.ifr_netmask);
            sin->sin_family = AF_INET;
            sin->sin_addr.s_addr = htonl(0xFFFFFFFFu);
            if (::ioctl(ctl, SIOCSIFNETMASK, &ifr) < 0) tun_error("SIOCSIFNETMASK " + devices_.back().name);

            if (::ioctl(ctl, SIOCGIFFLAGS, &ifr) < 0) tun_error("SIOCGIFFLAGS " + devices_.back().name);
            ifr.ifr_flags |= IFF_UP | IFF_RUNNING;
            if (::ioctl(ctl, SIOCSIFFLAGS, &ifr) < 0) tun_error("SIOCSIFFLAGS " + devices_.back().name);
        }
    } catch (...) {
        ::close(ctl);
        for (Device& d : devices_) ::close(d.fd);
        devices_.clear();
        throw;
    }
    ::close(ctl);
}

TunBackend::~TunBackend() {
    for (Device& d : devices_) {
        if (d.fd >= 0) ::close(d.fd);
    }
}

std::optional<std::pair<Ipv4, Ipv4>> TunBackend::parse_ipv4_addresses(ByteView packet) {
    if (packet.size() < 20 || (packet[0] >> 4) != 4) return std::nullopt;
    const size_t ihl = size_t{packet[0] & 0x0Fu} * 4;
    if (ihl < 20 || packet.size() < ihl) return std::nullopt;
    auto addr = [&](size_t at) {
        return Ipv4((uint32_t{packet[at]} << 24) | (uint32_t{packet[at + 1]} << 16) | (uint32_t{packet[at + 2]} << 8) |
                    uint32_t{packet[at + 3]});
    };
    return std::pair{addr(12), addr(16)};
}

std::vector<RawPacket> TunBackend::drain_ingress() {
    std::vector<RawPacket> out;
    uint8_t buf[65536];
    for (Device& d : devices_) {
        for (;;) {
            const ssize_t n = ::read(d.fd, buf, sizeof(buf));
            if (n <= 0) break;  // EAGAIN: nothing more queued
            ByteView pkt(buf, static_cast<size_t>(n));
            auto addrs = parse_ipv4_addresses(pkt);
            if (!addrs) continue;  // non-IPv4 traffic is ignored
            out.push_back({addrs->first, addrs->second, Bytes(pkt.begin(), pkt.end())});
        }
    }
    return out;
}

void TunBackend::deliver(Ipv4, Ipv4 dst, Bytes payload) {
    for (Device& d : devices_) {
        if (d.address == dst) {
            if (::write(d.fd, payload.data(), payload.size()) < 0) {
                throw TransportError(TransportErrorKind::kIo, "TUN write to " + d.name + ": " + std::strerror(errno));
            }
            return;
        }
    }
}

}  // namespace cosim
