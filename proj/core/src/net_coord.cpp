#include "cosim/net_coord.hpp"

#include <cmath>
#include <string>
#include <utility>

#include "cosim/error.hpp"

namespace cosim {

namespace {

// Uniform in (0, 1], from the top 53 bits.
double unit_open_closed(BerRng& rng) { return (static_cast<double>(rng() >> 11) + 1.0) * 0x1.0p-53; }

}  // namespace

Bytes apply_ber(ByteView payload, double ber, BerRng& rng) {
    Bytes out(payload.begin(), payload.end());
    if (!(ber > 0.0)) return out;
    if (ber >= 1.0) {
        for (uint8_t& b : out) b = static_cast<uint8_t>(~b);
        return out;
    }
    // Gaps between flipped bits are geometric with success probability ber.
    const uint64_t nbits = uint64_t{out.size()} * 8;
    const double log_keep = std::log1p(-ber);
    auto gap = [&] {
        const double g = std::floor(std::log(unit_open_closed(rng)) / log_keep);
        return g >= static_cast<double>(nbits) ? nbits : static_cast<uint64_t>(g);
    };
    for (uint64_t bit = gap(); bit < nbits; bit += 1 + gap()) {
        out[bit / 8] ^= static_cast<uint8_t>(0x80u >> (bit % 8));
    }
    return out;
}

NetworkCoordinator::NetworkCoordinator(NetCoordConfig config, CaptureBackend& backend)
    : config_(std::move(config)), backend_(backend), rng_(config_.seed) {
    if (config_.window_ns == 0) throw ConfigError("window_ns", "must be positive");
}

size_t NetworkCoordinator::capture(uint64_t window_start) {
    size_t accepted = 0;
    for (RawPacket& pkt : backend_.drain_ingress()) {
        if (pkt.payload.empty() || !config_.agent_address_map.contains(pkt.dst) ||
            !config_.agent_address_map.contains(pkt.src)) {
            ++counters_.rejected;
            continue;
        }
        CapturedPacket cp;
        cp.pkt_id = next_id_++;
        cp.src = pkt.src;
        cp.dst = pkt.dst;
        cp.captured_at = window_start;
        cp.payload = std::move(pkt.payload);
        counters_.bytes_captured += cp.payload.size();
        ++counters_.captured;
        held_.emplace(cp.pkt_id, std::move(cp));
        ++accepted;
    }
    return accepted;
}

NetworkUpdate NetworkCoordinator::build_manifest(uint64_t t) {
    NetworkUpdate m;
    m.msg_type = MsgType::kBegin;
    m.time_val = t;
    // Ids are assigned monotonically, so unmanifested packets sit at the tail.
    for (auto it = held_.lower_bound(next_manifest_id_); it != held_.end(); ++it) {
        CapturedPacket& pkt = it->second;
        pkt.manifested = true;
        m.pkt_id.push_back(it->first);
        m.pkt_lengths.push_back(static_cast<uint32_t>(pkt.payload.size()));
        m.src_ip.push_back(pkt.src);
        m.dst_ip.push_back(pkt.dst);
    }
    next_manifest_id_ = next_id_;
    return m;
}

size_t NetworkCoordinator::release(const NetworkUpdate& clearances) {
    if (clearances.msg_type != MsgType::kEnd) throw ProtocolError("clearances must arrive in an END update");
    size_t released = 0;
    for (size_t i = 0; i < clearances.clear_pkt_id.size(); ++i) {
        const uint64_t id = clearances.clear_pkt_id[i];
        auto it = held_.find(id);
        if (it == held_.end()) {
            if (expired_ids_.count(id) != 0) {
                ++counters_.late_clearances;
                continue;
            }
            throw ProtocolError("network simulator cleared pkt_id " + std::to_string(id) + " which is not held");
        }
        CapturedPacket pkt = std::move(it->second);
        held_.erase(it);
        Bytes out = apply_ber(pkt.payload, clearances.ber[i], rng_);
        for (size_t b = 0; b < out.size(); ++b) {
            counters_.bits_flipped += static_cast<uint64_t>(__builtin_popcount(out[b] ^ pkt.payload[b]));
        }
        counters_.bytes_released += out.size();
        ++counters_.released;
        latency_.push_back({id, pkt.captured_at, clearances.time_val});
        backend_.deliver(pkt.src, pkt.dst, std::move(out));
        ++released;
    }
    return released;
}

size_t NetworkCoordinator::expire(uint64_t t) {
    size_t n = 0;
    // captured_at is non-decreasing in id order, so the oldest packets come first.
    for (auto it = held_.begin(); it != held_.end();) {
        const CapturedPacket& pkt = it->second;
        if (t < pkt.captured_at || (t - pkt.captured_at) / config_.window_ns <= config_.expiry_windows) break;
        expired_ids_.insert(it->first);
        it = held_.erase(it);
        ++counters_.expired;
        ++n;
    }
    return n;
}

NetworkDriver::NetworkDriver(NetworkCoordinator& coordinator, NetSimInterface& netsim, ApplicationHook hook)
    : coordinator_(coordinator), netsim_(netsim), hook_(std::move(hook)) {}

Message NetworkDriver::simulate(uint64_t window_start, uint64_t window, const std::optional<Message>& peer_end) {
    if (peer_end) {
        const auto* p = std::get_if<PhysicsUpdate>(&*peer_end);
        if (p == nullptr) throw ProtocolError("network side expected a PhysicsUpdate from its peer");
        if (!p->channel_data.empty()) {
            channel_ = unpack_channel_data(p->channel_data);
            netsim_.apply_channel(*channel_);
        }
    }
    NetworkUpdate clearances = netsim_.advance(window_start, window, coordinator_.build_manifest(window_start));
    coordinator_.release(clearances);
    coordinator_.expire(window_start);
    if (hook_) hook_(window_start + window, channel_ ? &*channel_ : nullptr);
    coordinator_.capture(window_start);
    return clearances;
}

NetRunSummary run_network_coordinator(const NetCoordConfig& config, PeerLink& link, NetSimInterface& netsim,
                                      CaptureBackend& backend, ApplicationHook hook) {
    if (config.window_ns == 0) throw ConfigError("window_ns", "must be positive");
    if (config.duration_ns % config.window_ns != 0) {
        throw ConfigError("duration_ns", "duration " + std::to_string(config.duration_ns) +
                                             " is not a multiple of the window " + std::to_string(config.window_ns));
    }
    NetworkCoordinator coordinator(config, backend);
    NetworkDriver driver(coordinator, netsim, std::move(hook));
    SyncPeer peer(Role::kNetworkSide, config.window_ns);
    const uint64_t windows = config.duration_ns / config.window_ns;
    peer.start(link);
    for (uint64_t k = 0; k < windows; ++k) peer.run_window(link, driver);
    peer.shutdown(link);

    NetRunSummary summary;
    summary.windows = peer.stats().windows_completed;
    summary.counters = coordinator.counters();
    summary.latency = coordinator.latency();
    summary.frames_sent = link.frames_sent();
    summary.sync = peer.stats();
    return summary;
}

}  // namespace cosim
