#include "cosim/sync.hpp"

#include <string>
#include <utility>

#include "cosim/error.hpp"

namespace cosim {

const char* to_string(Role role) { return role == Role::kPhysicsSide ? "PHYSICS_SIDE" : "NETWORK_SIDE"; }

const char* to_string(PeerState state) {
    switch (state) {
        case PeerState::kInit: return "INIT";
        case PeerState::kAwaitPeerBegin: return "AWAIT_PEER_BEGIN";
        case PeerState::kLocalSimulating: return "LOCAL_SIMULATING";
        case PeerState::kAwaitPeerEnd: return "AWAIT_PEER_END";
        case PeerState::kDone: return "DONE";
    }
    return "?";
}

SyncPeer::SyncPeer(Role role, uint64_t window_ns) : role_(role), window_(window_ns) {
    if (window_ns == 0) throw ConfigError("window_ns", "window size must be positive");
}

SyncStats SyncPeer::stats() const {
    std::lock_guard lock(stats_mu_);
    return stats_;
}

Message SyncPeer::make_local(MsgType type, uint64_t time_val, Message payload) const {
    // The physics side speaks PhysicsUpdate, the network side NetworkUpdate.
    if (role_ == Role::kPhysicsSide) {
        PhysicsUpdate* p = std::get_if<PhysicsUpdate>(&payload);
        if (p == nullptr) throw ProtocolError("physics-side driver returned a NetworkUpdate");
        p->msg_type = type;
        p->time_val = time_val;
    } else {
        NetworkUpdate* n = std::get_if<NetworkUpdate>(&payload);
        if (n == nullptr) throw ProtocolError("network-side driver returned a PhysicsUpdate");
        n->msg_type = type;
        n->time_val = time_val;
    }
    return payload;
}

Message SyncPeer::expect(PeerLink& link, MsgType type, uint64_t time_val) {
    Message msg = link.receive();
    const bool want_network = role_ == Role::kPhysicsSide;
    if (std::holds_alternative<NetworkUpdate>(msg) != want_network) {
        throw ProtocolError(std::string(to_string(role_)) + " received a " +
                            (want_network ? "PhysicsUpdate" : "NetworkUpdate") + " from its peer");
    }
    const MsgType got_type = msg_type_of(msg);
    const uint64_t got_time = time_val_of(msg);
    if (got_type != type) {
        throw ProtocolError(std::string("expected ") + to_string(type) + "(" + std::to_string(time_val) +
                            ") but received " + to_string(got_type) + "(" + std::to_string(got_time) + ")");
    }
    if (got_time != time_val) throw DesyncError(time_val, got_time, to_string(type));
    return msg;
}

void SyncPeer::start(PeerLink& link) {
    std::lock_guard lock(window_mu_);
    if (state_ != PeerState::kInit) {
        throw ProtocolError(std::string("start() called in state ") + to_string(state_.load()));
    }
    link.send(make_local(MsgType::kBegin, 0, role_ == Role::kPhysicsSide ? Message{PhysicsUpdate{}}
                                                                          : Message{NetworkUpdate{}}));
    state_ = PeerState::kAwaitPeerBegin;
}

WindowReport SyncPeer::run_window(PeerLink& link, SimDriver& driver) {
    std::lock_guard lock(window_mu_);
    if (state_ != PeerState::kAwaitPeerBegin) {
        throw ProtocolError(std::string("run_window() called in state ") + to_string(state_.load()));
    }
    runner_ = std::this_thread::get_id();
    in_window_ = true;
    struct InWindow {
        std::atomic<bool>& flag;
        ~InWindow() { flag = false; }
    } guard{in_window_};

    const auto wall_start = std::chrono::steady_clock::now();
    const uint64_t t = t_.load();

    expect(link, MsgType::kBegin, t);

    state_ = PeerState::kLocalSimulating;
    Message local_end = make_local(MsgType::kEnd, t, driver.simulate(t, window_, last_peer_end_));
    link.send(local_end);

    state_ = PeerState::kAwaitPeerEnd;
    Message peer_end = expect(link, MsgType::kEnd, t);

    t_ = t + window_;
    link.send(make_local(MsgType::kBegin, t + window_,
                         role_ == Role::kPhysicsSide ? Message{PhysicsUpdate{}} : Message{NetworkUpdate{}}));
    state_ = PeerState::kAwaitPeerBegin;
    last_peer_end_ = peer_end;

    WindowReport report{t, std::move(peer_end),
                        std::chrono::duration_cast<std::chrono::nanoseconds>(std::chrono::steady_clock::now() - wall_start)};
    {
        std::lock_guard slock(stats_mu_);
        ++stats_.windows_completed;
        stats_.total_wall += report.wall_time;
        if (report.wall_time > stats_.max_wall) stats_.max_wall = report.wall_time;
    }
    if (shutdown_requested_) finish_shutdown(link);
    return report;
}

void SyncPeer::shutdown(PeerLink& link) {
    shutdown_requested_ = true;
    // Called from inside the running window (e.g. by the driver): run_window
    // completes the window and then closes.
    if (in_window_ && runner_ == std::this_thread::get_id()) return;
    std::lock_guard lock(window_mu_);
    finish_shutdown(link);
}

void SyncPeer::finish_shutdown(PeerLink& link) {
    if (state_ == PeerState::kDone) return;
    link.close();
    state_ = PeerState::kDone;
}

}  // namespace cosim
