#pragma once

// Sliding-window lockstep between the physics side and the network side.
//
// Each peer repeats, for its current window start t:
//   wait for the peer's BEGIN(t); simulate [t, t + W); send END(t) with the
//   local payload; collect the peer's END(t); t += W; send BEGIN(t).
// The very first BEGIN(0) is sent by start().

#include <atomic>
#include <chrono>
#include <cstdint>
#include <mutex>
#include <optional>
#include <thread>

#include "cosim/link.hpp"
#include "cosim/wire.hpp"

namespace cosim {

inline constexpr uint64_t kDefaultWindowNs = 1'000'000;

enum class Role : uint8_t { kPhysicsSide, kNetworkSide };
enum class PeerState : uint8_t { kInit, kAwaitPeerBegin, kLocalSimulating, kAwaitPeerEnd, kDone };

const char* to_string(Role role);
const char* to_string(PeerState state);

class SimDriver {
public:
    virtual ~SimDriver() = default;

    // Advances the local simulator over [window_start, window_start + window).
    // `peer_end` is the peer's END payload from the previous window, absent on
    // the first one. The returned message becomes the local END payload; its
    // msg_type and time_val are overwritten by the protocol.
    virtual Message simulate(uint64_t window_start, uint64_t window, const std::optional<Message>& peer_end) = 0;
};

struct WindowReport {
    uint64_t window_start = 0;
    Message peer_end;
    std::chrono::nanoseconds wall_time{0};
};

struct SyncStats {
    uint64_t windows_completed = 0;
    std::chrono::nanoseconds total_wall{0};
    std::chrono::nanoseconds max_wall{0};
};

class SyncPeer {
public:
    SyncPeer(Role role, uint64_t window_ns);

    SyncPeer(const SyncPeer&) = delete;
    SyncPeer& operator=(const SyncPeer&) = delete;

    // Sends BEGIN(0). Only valid in INIT.
    void start(PeerLink& link);

    // Runs one full window. Throws DesyncError on a timestamp mismatch,
    // ProtocolError on an unexpected message or state, TransportError when the
    // link fails.
    WindowReport run_window(PeerLink& link, SimDriver& driver);

    // Closes the link and moves to DONE. An in-flight window completes first;
    // callable from any thread; repeated calls are no-ops.
    void shutdown(PeerLink& link);

    Role role() const { return role_; }
    uint64_t time() const { return t_.load(); }
    uint64_t window() const { return window_; }
    PeerState state() const { return state_.load(); }
    SyncStats stats() const;

private:
    Message make_local(MsgType type, uint64_t time_val, Message payload) const;
    Message expect(PeerLink& link, MsgType type, uint64_t time_val);
    void finish_shutdown(PeerLink& link);

    Role role_;
    uint64_t window_;
    std::atomic<uint64_t> t_{0};
    std::atomic<PeerState> state_{PeerState::kInit};
    std::optional<Message> last_peer_end_;

    std::mutex window_mu_;
    std::atomic<bool> in_window_{false};
    std::atomic<bool> shutdown_requested_{false};
    std::atomic<std::thread::id> runner_{};

    mutable std::mutex stats_mu_;
    SyncStats stats_;
};

}  // namespace cosim
