#pragma once

#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "cosim/wire.hpp"

namespace cosim {

struct RawPacket {
    Ipv4 src;
    Ipv4 dst;
    Bytes payload;
};

// Where application traffic enters and leaves the co-simulation.
class CaptureBackend {
public:
    virtual ~CaptureBackend() = default;

    // Packets sent by applications since the previous call, in ingress order.
    virtual std::vector<RawPacket> drain_ingress() = 0;

    // Hands a released packet to the application bound to `dst`.
    virtual void deliver(Ipv4 src, Ipv4 dst, Bytes payload) = 0;
};

// Deterministic virtual endpoints, one per configured address. Addresses
// travel as metadata; payloads are opaque.
class InProcessBackend final : public CaptureBackend {
public:
    class Endpoint {
    public:
        Ipv4 address() const { return address_; }

        // Safe from any application thread.
        void send(Ipv4 dst, Bytes payload);

        // Single consumer.
        std::optional<RawPacket> try_receive();
        std::vector<RawPacket> receive_all();
        uint64_t delivered() const;

    private:
        friend class InProcessBackend;
        Endpoint(InProcessBackend& owner, Ipv4 address) : owner_(owner), address_(address) {}

        InProcessBackend& owner_;
        Ipv4 address_;
        mutable std::mutex mu_;
        std::deque<RawPacket> inbox_;
        uint64_t delivered_ = 0;
    };

    explicit InProcessBackend(const std::vector<Ipv4>& addresses);

    // Throws ConfigError for an unconfigured address.
    Endpoint& endpoint(Ipv4 address);

    std::vector<RawPacket> drain_ingress() override;
    void deliver(Ipv4 src, Ipv4 dst, Bytes payload) override;

    // Deliveries addressed to unknown endpoints.
    uint64_t undeliverable() const;

private:
    void ingest(RawPacket pkt);

    std::map<Ipv4, std::unique_ptr<Endpoint>> endpoints_;
    mutable std::mutex mu_;
    std::vector<RawPacket> ingress_;
    uint64_t undeliverable_ = 0;
};

// One TUN interface per configured address (Linux, needs CAP_NET_ADMIN).
// Reads and writes raw IPv4 packets; source and destination come from the IP
// header. Construction throws TransportError when the devices cannot be set up.
class TunBackend final : public CaptureBackend {
public:
    explicit TunBackend(const std::vector<Ipv4>& addresses, const std::string& name_prefix = "cosim");
    ~TunBackend() override;

    TunBackend(const TunBackend&) = delete;
    TunBackend& operator=(const TunBackend&) = delete;

    std::vector<RawPacket> drain_ingress() override;
    void deliver(Ipv4 src, Ipv4 dst, Bytes payload) override;

    // Source/destination of a raw IPv4 packet, nullopt if it is not one.
    static std::optional<std::pair<Ipv4, Ipv4>> parse_ipv4_addresses(ByteView packet);

private:
    struct Device {
        Ipv4 address;
        int fd = -1;
        std::string name;
    };
    std::vector<Device> devices_;
};

}  // namespace cosim
