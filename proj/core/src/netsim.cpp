#include "cosim/netsim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "cosim/error.hpp"

namespace cosim {

std::vector<McsEntry> default_mcs_table() {
    return {{5.0, 6.5e6},   {8.0, 13.0e6},  {11.0, 19.5e6}, {14.0, 26.0e6},
            {17.0, 39.0e6}, {20.0, 52.0e6}, {23.0, 58.5e6}, {26.0, 65.0e6}};
}

void validate(const RadioParams& p, const std::string& path) {
    auto finite = [&](double v, const char* field) {
        if (!std::isfinite(v)) throw ConfigError(path + "/" + field, "must be finite");
    };
    finite(p.tx_power_dbm, "tx_power_dbm");
    finite(p.noise_floor_dbm, "noise_floor_dbm");
    finite(p.pl0_db, "pl0_db");
    finite(p.path_loss_exponent, "path_loss_exponent");
    finite(p.ber_at_threshold, "ber_at_threshold");
    if (!(p.ref_distance_m > 0.0) || !std::isfinite(p.ref_distance_m)) {
        throw ConfigError(path + "/ref_distance_m", "must be > 0");
    }
    if (!(p.ber_decade_per_db > 0.0) || !std::isfinite(p.ber_decade_per_db)) {
        throw ConfigError(path + "/ber_decade_per_db", "must be > 0");
    }
    if (!(p.ber_at_threshold > 0.0 && p.ber_at_threshold <= 0.5)) {
        throw ConfigError(path + "/ber_at_threshold", "must lie in (0, 0.5]");
    }
    if (p.queue_capacity == 0) throw ConfigError(path + "/queue_capacity", "must be at least 1");
    if (p.mcs_table.empty()) throw ConfigError(path + "/mcs_table", "must not be empty");
    for (size_t i = 0; i < p.mcs_table.size(); ++i) {
        const McsEntry& e = p.mcs_table[i];
        const std::string at = path + "/mcs_table/" + std::to_string(i);
        if (!std::isfinite(e.snr_threshold_db) || !(e.phy_rate_bps > 0.0) || !std::isfinite(e.phy_rate_bps)) {
            throw ConfigError(at, "threshold must be finite and rate > 0");
        }
        if (i > 0 && !(e.snr_threshold_db > p.mcs_table[i - 1].snr_threshold_db)) {
            throw ConfigError(at, "thresholds must be strictly increasing");
        }
        if (i > 0 && !(e.phy_rate_bps > p.mcs_table[i - 1].phy_rate_bps)) {
            throw ConfigError(at, "rates must be strictly increasing");
        }
    }
}

LinkState compute_link_state(double distance_m, double wall_loss_db, const RadioParams& p) {
    LinkState s;
    s.distance_m = distance_m;
    s.wall_loss_db = wall_loss_db;
    const double d = std::max(distance_m, p.ref_distance_m);
    s.path_loss_db = p.pl0_db + 10.0 * p.path_loss_exponent * std::log10(d / p.ref_distance_m) + wall_loss_db;
    s.snr_db = p.tx_power_dbm - s.path_loss_db - p.noise_floor_dbm;

    const McsEntry* selected = nullptr;
    for (const McsEntry& e : p.mcs_table) {
        if (e.snr_threshold_db <= s.snr_db) selected = &e;
    }
    if (selected == nullptr) {
        s.phy_rate_bps.reset();
        s.ber = 0.5;
        return s;
    }
    s.phy_rate_bps = selected->phy_rate_bps;
    const double margin = s.snr_db - selected->snr_threshold_db;
    s.ber = std::clamp(p.ber_at_threshold * std::pow(10.0, -margin / p.ber_decade_per_db), 1e-9, 0.5);
    return s;
}

uint64_t service_time_ns(uint32_t length_bytes, double phy_rate_bps, const RadioParams& p) {
    const uint64_t bits = uint64_t{length_bytes} * 8;
    uint64_t airtime = 0;
    const double whole = std::floor(phy_rate_bps);
    if (whole == phy_rate_bps && phy_rate_bps < 9.0e15) {
        // Integral rates: exact ceil(bits * 1e9 / rate).
        const unsigned __int128 num = static_cast<unsigned __int128>(bits) * 1'000'000'000u;
        const auto rate = static_cast<uint64_t>(phy_rate_bps);
        airtime = static_cast<uint64_t>((num + rate - 1) / rate);
    } else {
        airtime = static_cast<uint64_t>(std::ceil(static_cast<double>(bits) * 1e9 / phy_rate_bps));
    }
    return p.per_packet_overhead_ns + airtime;
}

ReferenceNetSim::ReferenceNetSim(RadioParams params, AgentAddressMap addresses)
    : params_(std::move(params)), addresses_(std::move(addresses)) {
    validate(params_);
}

LinkState ReferenceNetSim::link(uint32_t a, uint32_t b) const {
    const auto key = std::minmax(a, b);
    if (auto it = links_.find({key.first, key.second}); it != links_.end()) return it->second;
    LinkState down;
    down.pair = {key.first, key.second};
    down.distance_m = std::numeric_limits<double>::infinity();
    down.path_loss_db = std::numeric_limits<double>::infinity();
    down.snr_db = -std::numeric_limits<double>::infinity();
    return down;
}

size_t ReferenceNetSim::queued() const {
    size_t n = 0;
    for (const auto& [node, q] : queues_) n += q.size();
    return n;
}

void ReferenceNetSim::apply_channel(const ChannelData& cd) {
    std::map<std::pair<uint32_t, uint32_t>, LinkState> links;
    const size_t n = cd.node_list.size();
    for (size_t k = 0; k < cd.path_details.size(); ++k) {
        const PathDetails& pd = cd.path_details[k];
        if (pd.ids[0] >= n || pd.ids[1] >= n || pd.ids[0] == pd.ids[1]) {
            throw ChannelError("path_details[" + std::to_string(k) + "] references agents (" +
                               std::to_string(pd.ids[0]) + ", " + std::to_string(pd.ids[1]) + ") but node_list has " +
                               std::to_string(n) + " entries");
        }
        const auto key = std::minmax(pd.ids[0], pd.ids[1]);
        const double dist = distance(cd.node_list[pd.ids[0]].position, cd.node_list[pd.ids[1]].position);
        LinkState s;
        if (!pd.los && pd.num_hops.empty()) {
            // No path at all (e.g. out of disk range).
            s = compute_link_state(dist, 0.0, params_);
            s.phy_rate_bps.reset();
            s.ber = 0.5;
        } else {
            double wall = 0.0;
            if (!pd.los && !pd.num_hops.empty()) {
                // Only the first path is modelled.
                for (uint32_t h = 0; h < pd.num_hops[0] && h < pd.hop_points.size(); ++h) wall += pd.hop_points[h].loss_db;
            }
            s = compute_link_state(dist, wall, params_);
        }
        s.pair = {key.first, key.second};
        links[{key.first, key.second}] = s;
    }
    links_ = std::move(links);
}

void ReferenceNetSim::check_manifest(uint64_t window_start, uint64_t window, const NetworkUpdate& m) {
    if (m.msg_type != MsgType::kBegin) throw ManifestError("manifest must be a BEGIN update");
    if (m.time_val != window_start) {
        throw ManifestError("manifest time_val " + std::to_string(m.time_val) + " does not match window start " +
                            std::to_string(window_start));
    }
    try {
        validate(m);
    } catch (const WireError& e) {
        throw ManifestError(e.what());
    }
    if (window == 0 && !m.pkt_id.empty()) throw ManifestError("packets submitted to a zero-length window");
    for (size_t i = 0; i < m.pkt_id.size(); ++i) {
        if (submitted_.count(m.pkt_id[i]) != 0) {
            throw ManifestError("pkt_id " + std::to_string(m.pkt_id[i]) + " was already submitted");
        }
        if (!addresses_.contains(m.src_ip[i]) || !addresses_.contains(m.dst_ip[i])) {
            throw ManifestError("pkt_id " + std::to_string(m.pkt_id[i]) + " uses an unconfigured address");
        }
    }
}

void ReferenceNetSim::log(MediumEvent::Kind kind, uint64_t time, const Queued& pkt) {
    if (log_events_) events_.push_back({time, kind, pkt.pkt_id, pkt.src, pkt.dst});
}

NetworkUpdate ReferenceNetSim::advance(uint64_t window_start, uint64_t window, const NetworkUpdate& manifest) {
    check_manifest(window_start, window, manifest);
    last_trace_.clear();
    NetworkUpdate out;
    out.msg_type = MsgType::kEnd;
    out.time_val = window_start;
    if (window == 0) return out;

    for (size_t i = 0; i < manifest.pkt_id.size(); ++i) {
        submitted_.insert(manifest.pkt_id[i]);
        const uint32_t src_node = *addresses_.agent_of(manifest.src_ip[i]);
        std::deque<Queued>& q = queues_[src_node];
        if (q.size() >= params_.queue_capacity) {
            dropped_.push_back(manifest.pkt_id[i]);
            continue;
        }
        q.push_back({manifest.pkt_id[i], window_start, src_node, *addresses_.agent_of(manifest.dst_ip[i]),
                     manifest.src_ip[i], manifest.dst_ip[i], manifest.pkt_lengths[i]});
    }

    const uint64_t window_end = window_start + window;
    auto clear = [&](const Transmission& tx) {
        log(MediumEvent::Kind::kTxEnd, tx.tx_end, tx.pkt);
        out.clear_pkt_id.push_back(tx.pkt.pkt_id);
        out.clear_src_ip.push_back(tx.pkt.src);
        out.clear_dst_ip.push_back(tx.pkt.dst);
        out.ber.push_back(tx.ber);
        last_trace_.push_back({tx.pkt.pkt_id, tx.tx_start, tx.tx_end, tx.ber});
    };

    for (;;) {
        if (current_) {
            if (current_->tx_end > window_end) break;  // still on air at the window end
            clear(*current_);
            medium_free_ns_ = current_->tx_end;
            current_.reset();
        }
        const uint64_t start = std::max(medium_free_ns_, window_start);
        if (start >= window_end) break;

        // Oldest enqueued packet (ties by pkt_id) whose destination is reachable.
        std::deque<Queued>* best_q = nullptr;
        std::deque<Queued>::iterator best;
        for (auto& [node, q] : queues_) {
            for (auto it = q.begin(); it != q.end(); ++it) {
                if (!link(it->src_node, it->dst_node).up()) continue;
                if (best_q == nullptr || it->enqueue_ns < best->enqueue_ns ||
                    (it->enqueue_ns == best->enqueue_ns && it->pkt_id < best->pkt_id)) {
                    best_q = &q;
                    best = it;
                }
                break;  // per-node FIFO: only the first reachable packet is a candidate
            }
        }
        if (best_q == nullptr) break;

        const LinkState ls = link(best->src_node, best->dst_node);
        Transmission tx{*best, start, start + service_time_ns(best->length, *ls.phy_rate_bps, params_), ls.ber};
        best_q->erase(best);
        log(MediumEvent::Kind::kTxStart, tx.tx_start, tx.pkt);
        current_ = tx;
    }
    return out;
}

SocketNetSim::SocketNetSim(std::unique_ptr<PeerLink> link) : link_(std::move(link)) {}

SocketNetSim::~SocketNetSim() {
    if (link_) link_->close();
}

void SocketNetSim::apply_channel(const ChannelData& cd) { pending_channel_ = pack_channel_data(cd); }

NetworkUpdate SocketNetSim::advance(uint64_t window_start, uint64_t, const NetworkUpdate& manifest) {
    if (pending_channel_) {
        link_->send(PhysicsUpdate{MsgType::kBegin, window_start, std::move(*pending_channel_)});
        pending_channel_.reset();
    }
    link_->send(manifest);
    Message reply = link_->receive();
    auto* nu = std::get_if<NetworkUpdate>(&reply);
    if (nu == nullptr || nu->msg_type != MsgType::kEnd) {
        throw ProtocolError("external network simulator must reply with NetworkUpdate END");
    }
    if (nu->time_val != window_start) throw DesyncError(window_start, nu->time_val, "network simulator reply");
    return std::move(*nu);
}

uint64_t serve_network_simulator(PeerLink& link, NetSimInterface& sim, uint64_t window_ns) {
    uint64_t served = 0;
    for (;;) {
        Message msg;
        try {
            msg = link.receive();
        } catch (const TransportError& e) {
            if (e.kind() == TransportErrorKind::kClosed) break;
            throw;
        }
        if (auto* p = std::get_if<PhysicsUpdate>(&msg)) {
            if (!p->channel_data.empty()) sim.apply_channel(unpack_channel_data(p->channel_data));
            continue;
        }
        const auto& manifest = std::get<NetworkUpdate>(msg);
        if (manifest.msg_type != MsgType::kBegin) throw ProtocolError("network server expects BEGIN manifests");
        link.send(sim.advance(manifest.time_val, window_ns, manifest));
        ++served;
    }
    link.close();
    return served;
}

}  // namespace cosim
