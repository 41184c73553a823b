// Acceptance runner: one PASS/FAIL line per criterion.
//
//   cosim_acceptance                 all criteria
//   cosim_acceptance --only 7        a single criterion
//
// Exit status is 0 only when every selected criterion passes.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <thread>

#include "../support/oracles.hpp"
#include "../support/random_messages.hpp"
#include "CLI11.hpp"
#include "cosim/error.hpp"
#include "cosim/net_coord.hpp"
#include "cosim/netsim.hpp"
#include "cosim/phys_coord.hpp"
#include "cosim/scenario.hpp"
#include "cosim/sync.hpp"
#include "cosim/wire.hpp"

using namespace cosim;

namespace {

using Clock = std::chrono::steady_clock;

struct Verdict {
    bool pass = false;
    std::string detail;
};

std::string format(const char* fmt, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof(buf), fmt, args...);
    return buf;
}

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

// ---------------------------------------------------------------------------
// 1. Lockstep soundness under processing jitter

class JitterDriver : public SimDriver {
public:
    JitterDriver(Role role, uint64_t seed) : role_(role), rng_(seed) {}

    Message simulate(uint64_t, uint64_t, const std::optional<Message>&) override {
        std::this_thread::sleep_for(std::chrono::nanoseconds(jitter_(rng_)));
        if (role_ == Role::kPhysicsSide) return PhysicsUpdate{};
        return NetworkUpdate{};
    }

private:
    Role role_;
    std::mt19937_64 rng_;
    std::uniform_int_distribution<uint64_t> jitter_{0, 2'000'000};
};

Verdict lockstep() {
    constexpr uint64_t kWindows = 10'000;
    constexpr uint64_t kWindow = 1'000'000;
    auto [a, b] = make_in_process_link_pair();
    SyncPeer phys(Role::kPhysicsSide, kWindow);
    SyncPeer net(Role::kNetworkSide, kWindow);
    JitterDriver pd(Role::kPhysicsSide, 1);
    JitterDriver nd(Role::kNetworkSide, 2);

    uint64_t desyncs = 0;
    std::string error;
    auto run = [&](SyncPeer& peer, PeerLink& link, SimDriver& driver) {
        try {
            peer.start(link);
            for (uint64_t k = 0; k < kWindows; ++k) peer.run_window(link, driver);
            peer.shutdown(link);
        } catch (const DesyncError& e) {
            ++desyncs;
            error = e.what();
            link.close();
        } catch (const std::exception& e) {
            error = e.what();
            link.close();
        }
    };
    const auto t0 = Clock::now();
    std::thread t([&, link = a.get()] { run(phys, *link, pd); });
    run(net, *b, nd);
    t.join();
    const double wall = seconds_since(t0);

    const bool same_t = phys.time() == net.time() && phys.time() == kWindows * kWindow;
    const bool frames = a->frames_sent() == 2 * kWindows + 1 && b->frames_sent() == 2 * kWindows + 1;
    Verdict v;
    v.pass = error.empty() && desyncs == 0 && same_t && frames && wall < 10.0;
    v.detail = format("desyncs=%llu final_t=%llu/%llu ns frames=%llu/%llu runtime=%.2f s (limit 10 s)%s%s",
                      static_cast<unsigned long long>(desyncs), static_cast<unsigned long long>(phys.time()),
                      static_cast<unsigned long long>(net.time()), static_cast<unsigned long long>(a->frames_sent()),
                      static_cast<unsigned long long>(b->frames_sent()), wall, error.empty() ? "" : " error: ",
                      error.c_str());
    return v;
}

// ---------------------------------------------------------------------------
// 2. Wire round trip and malformed-frame corpus

struct MalformedCase {
    std::string name;
    std::function<void()> run;
    WireErrorKind expected;
};

Verdict wire_round_trip() {
    fixtures::Rng rng(2024);
    size_t ok = 0;
    size_t max_agents = 0;
    for (int i = 0; i < 1000; ++i) {
        Message m;
        if (i % 2 == 0) {
            PhysicsUpdate p = fixtures::random_physics_update(rng);
            if (!p.channel_data.empty()) max_agents = std::max(max_agents, unpack_channel_data(p.channel_data).node_list.size());
            m = std::move(p);
        } else {
            m = fixtures::random_network_update(rng);
        }
        const Bytes frame = encode_frame(m);
        const FrameDecode d = decode_frame(frame);
        if (d.message && *d.message == m && d.remaining.empty() && encode_frame(*d.message) == frame) ++ok;
    }

    auto frame_with = [](Bytes f, size_t at, uint8_t value) {
        f[at] = value;
        return f;
    };
    const Bytes empty_phys = encode_frame(PhysicsUpdate{});
    NetworkUpdate clear;
    clear.clear_pkt_id = {1};
    clear.clear_src_ip = {Ipv4(1, 1, 1, 1)};
    clear.clear_dst_ip = {Ipv4(2, 2, 2, 2)};
    clear.ber = {0.5};

    std::vector<MalformedCase> corpus;
    auto decode = [](Bytes f) { return [f] { decode_frame(f); }; };
    corpus.push_back({"bad magic", decode(frame_with(empty_phys, 0, 'X')), WireErrorKind::kBadMagic});
    corpus.push_back({"unknown tag", decode(frame_with(empty_phys, 4, 9)), WireErrorKind::kUnknownTag});
    corpus.push_back({"over-cap length",
                      decode(Bytes{'R', 'N', 'S', '1', 1, 0x01, 0x00, 0x00, 0x01}), WireErrorKind::kOversizeFrame});
    {
        Bytes f = empty_phys;
        f.resize(f.size() - 3);
        f[5] = static_cast<uint8_t>(f.size() - kFrameHeaderSize);
        corpus.push_back({"truncated payload", decode(f), WireErrorKind::kMalformedPayload});
    }
    corpus.push_back({"unknown msg_type", decode(frame_with(empty_phys, kFrameHeaderSize, 7)),
                      WireErrorKind::kMalformedPayload});
    {
        Bytes f = encode_frame(clear);
        const double bad = -0.25;
        std::memcpy(&f[f.size() - 8], &bad, 8);
        corpus.push_back({"ber outside [0,1]", decode(f), WireErrorKind::kInvariantViolation});
    }
    {
        Bytes f = encode_frame(clear);
        f[f.size() - 12] = 0;  // ber count 1 -> 0, drop the value
        f.resize(f.size() - 8);
        f[5] = static_cast<uint8_t>(f[5] - 8);
        corpus.push_back({"unequal clearance lists", decode(f), WireErrorKind::kInvariantViolation});
    }
    {
        NetworkUpdate dup;
        dup.pkt_id = {3, 3};
        dup.pkt_lengths = {1, 1};
        dup.src_ip = {Ipv4(), Ipv4()};
        dup.dst_ip = {Ipv4(), Ipv4()};
        corpus.push_back({"duplicate pkt_id", [dup] { encode_frame(dup); }, WireErrorKind::kInvariantViolation});
    }
    {
        ChannelData cd;
        cd.node_list.resize(2);
        PathDetails pd;
        pd.ids = {0, 1};
        pd.num_hops = {3};
        pd.hop_points.resize(1);
        cd.path_details = {pd};
        corpus.push_back({"hop count mismatch", [cd] { pack_channel_data(cd); }, WireErrorKind::kInvariantViolation});
        cd.path_details[0].hop_points.resize(3);
        cd.path_details[0].ids = {1, 1};
        corpus.push_back({"self pair", [cd] { pack_channel_data(cd); }, WireErrorKind::kInvariantViolation});
    }
    {
        Bytes f{'R', 'N', 'S', '1', 0, 17, 0, 0, 0, 0, 1, 0, 0, 0, 0, 0, 0, 0, 4, 0, 0, 0, 0xde, 0xad, 0xbe, 0xef};
        corpus.push_back({"undecodable channel_data", decode(f), WireErrorKind::kInvariantViolation});
        corpus.push_back({"corrupt deflate stream",
                          [] { decompress_channel_data(Bytes{0xff, 0xff, 0xff, 0xff}); }, WireErrorKind::kCompression});
    }
    {
        const Bytes bomb = compress_channel_data(Bytes(size_t{80} << 20, 0));
        corpus.push_back({"decompression cap", [bomb] { decompress_channel_data(bomb); }, WireErrorKind::kCompression});
    }

    std::string wrong;
    for (const MalformedCase& c : corpus) {
        try {
            c.run();
            wrong += " [" + c.name + ": accepted]";
        } catch (const WireError& e) {
            if (e.kind() != c.expected) {
                wrong += " [" + c.name + ": " + to_string(e.kind()) + " != " + to_string(c.expected) + "]";
            }
        } catch (const std::exception& e) {
            wrong += " [" + c.name + ": " + e.what() + "]";
        }
    }
    Verdict v;
    v.pass = ok == 1000 && wrong.empty() && max_agents == 16;
    v.detail = format("round-trip %zu/1000 bit-exact (up to %zu agents), malformed corpus %zu cases", ok, max_agents,
                      corpus.size()) +
               (wrong.empty() ? std::string(" all rejected with the expected class") : wrong);
    return v;
}

// ---------------------------------------------------------------------------
// 3. Geometry oracle

Verdict geometry() {
    std::mt19937_64 rng(303);
    auto u = [&](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); };
    uint64_t pairs = 0;
    uint64_t mismatches = 0;
    uint64_t blocked = 0;
    uint64_t hop_violations = 0;
    uint64_t crossing_mismatches = 0;
    for (int world_i = 0; world_i < 1000; ++world_i) {
        WorldModel w;
        w.bounds = {{0, 0, 0}, {100, 100, 40}, 0};
        const int boxes = static_cast<int>(fixtures::below(rng, 11));
        for (int b = 0; b < boxes; ++b) {
            const Vec3 lo{u(0, 90), u(0, 90), u(0, 30)};
            const Vec3 hi{lo.x + u(1, 30), lo.y + u(1, 30), lo.z + u(1, 20)};
            w.obstacles.push_back({lo, {std::min(hi.x, 100.0), std::min(hi.y, 100.0), std::min(hi.z, 40.0)}, u(0, 20)});
        }
        const int agents = 2 + static_cast<int>(fixtures::below(rng, 7));
        std::vector<AgentState> states(agents);
        for (int i = 0; i < agents; ++i) {
            states[i].agent_id = static_cast<uint32_t>(i);
            states[i].pose.position = {u(0, 100), u(0, 100), u(0, 40)};
        }
        const ChannelData cd = extract_channel_data(w, states, ChannelFidelity::los_nlos());
        // Hop-count conservation, checked on the emitted (encoded and decoded) message.
        const ChannelData emitted = unpack_channel_data(pack_channel_data(cd));
        for (const PathDetails& pd : emitted.path_details) {
            uint64_t hops = 0;
            for (uint32_t h : pd.num_hops) hops += h;
            if (hops != pd.hop_points.size()) ++hop_violations;
            const Vec3& a = emitted.node_list[pd.ids[0]].position;
            const Vec3& b = emitted.node_list[pd.ids[1]].position;
            const bool oracle = fixtures::sampled_los(a, b, w.obstacles);
            ++pairs;
            blocked += !oracle;
            if (oracle != pd.los) ++mismatches;
            if (!pd.los && static_cast<int>(hops) != fixtures::sampled_crossings(a, b, w.obstacles)) ++crossing_mismatches;
        }
    }
    Verdict v;
    v.pass = mismatches == 0 && hop_violations == 0;
    v.detail = format("%llu pairs (%llu blocked), LOS mismatches=%llu, hop-count violations=%llu, "
                      "crossing-count mismatches=%llu",
                      static_cast<unsigned long long>(pairs), static_cast<unsigned long long>(blocked),
                      static_cast<unsigned long long>(mismatches), static_cast<unsigned long long>(hop_violations),
                      static_cast<unsigned long long>(crossing_mismatches));
    return v;
}

// ---------------------------------------------------------------------------
// Shared scenario builders

ScenarioConfig two_agents(Vec3 a, Vec3 b, uint64_t duration_ns) {
    ScenarioConfig c;
    c.name = "acceptance";
    c.world.bounds = {{-1000, -1000, -100}, {1000, 1000, 200}, 0};
    AgentTrack ta;
    ta.agent_id = 0;
    ta.waypoints = {a};
    AgentTrack tb;
    tb.agent_id = 1;
    tb.waypoints = {b};
    c.tracks = {ta, tb};
    c.agent_address_map = AgentAddressMap({{0, Ipv4(10, 0, 0, 1)}, {1, Ipv4(10, 0, 0, 2)}});
    c.duration_ns = duration_ns;
    c.flows = {FlowSpec{Ipv4(10, 0, 0, 1), Ipv4(10, 0, 0, 2)}};
    c.seed = 1;
    return c;
}

double mean(const std::vector<double>& v) {
    double s = 0;
    size_t n = 0;
    for (double x : v) {
        if (std::isnan(x)) continue;
        s += x;
        ++n;
    }
    return n ? s / static_cast<double>(n) : std::numeric_limits<double>::quiet_NaN();
}

// ---------------------------------------------------------------------------
// 4. Radio-model monotonicity

Verdict radio_monotonicity() {
    const RadioParams p;
    std::vector<LinkState> states;
    for (int walls = 0; walls <= 4; ++walls) states.push_back(compute_link_state(50.0, 10.0 * walls, p));
    bool model_ok = true;
    for (size_t i = 1; i < states.size(); ++i) {
        model_ok = model_ok && states[i].snr_db <= states[i - 1].snr_db;
        model_ok = model_ok && states[i].phy_rate_bps.value_or(0.0) <= states[i - 1].phy_rate_bps.value_or(0.0);
        model_ok = model_ok && states[i].ber >= states[i - 1].ber;
    }

    // Full runs: two static agents 50 m apart with 0..4 walls of 10 dB between them.
    // Small payloads keep the clean link usable at this range, so the sweep is informative.
    std::vector<double> goodput;
    std::vector<double> delay;
    std::string detail;
    for (int walls = 0; walls <= 4; ++walls) {
        ScenarioConfig c = two_agents({0, 0, 10}, {50, 0, 10}, 10'000'000'000);
        c.flows[0].payload_size = 100;
        for (int k = 0; k < walls; ++k) {
            const double x = 10.0 + 8.0 * k;
            c.world.obstacles.push_back({{x, -20, 0}, {x + 1, 20, 30}, 10.0});
        }
        const ScenarioResult r = run_scenario(c);
        goodput.push_back(mean(r.metrics.goodput_bps));
        // No deliveries at all counts as an unbounded delay.
        delay.push_back(r.metrics.delay_empty ? std::numeric_limits<double>::infinity() : mean(r.metrics.delays_s));
        detail += format(" %d:[snr %.1f dB, rate %.1f Mb/s, ber %.2g, goodput %.3f Mb/s, delay %.1f ms]", walls,
                         states[walls].snr_db, states[walls].phy_rate_bps.value_or(0.0) * 1e-6, states[walls].ber,
                         goodput.back() * 1e-6, delay.back() * 1e3);
    }
    bool runs_ok = true;
    for (size_t i = 1; i < goodput.size(); ++i) {
        runs_ok = runs_ok && goodput[i] <= goodput[i - 1] && delay[i] >= delay[i - 1];
    }
    return {model_ok && runs_ok, std::string(model_ok ? "model monotone" : "model NOT monotone") +
                                     (runs_ok ? ", runs monotone;" : ", runs NOT monotone;") + detail};
}

// ---------------------------------------------------------------------------
// 5. Netsim oracle equivalence

Verdict netsim_oracle() {
    std::mt19937_64 rng(505);
    const AgentAddressMap map({{0, Ipv4(10, 0, 0, 1)}, {1, Ipv4(10, 0, 0, 2)}});
    int cases = 0;
    int exact = 0;
    for (int trial = 0; trial < 500; ++trial) {
        const double dist = std::uniform_real_distribution<double>(1.0, 60.0)(rng);
        ChannelData cd;
        cd.node_list = {{{0, 0, 0}, {}}, {{dist, 0, 0}, {}}};
        PathDetails pd;
        pd.ids = {0, 1};
        pd.los = true;
        pd.num_hops = {0};
        cd.path_details = {pd};
        RadioParams params;
        params.per_packet_overhead_ns = fixtures::below(rng, 300'000);
        ReferenceNetSim sim(params, map);
        sim.apply_channel(cd);
        const LinkState ls = sim.link(0, 1);
        if (!ls.up()) continue;
        ++cases;

        const auto n = 1 + fixtures::below(rng, 5);
        std::vector<uint32_t> lengths;
        NetworkUpdate m;
        for (uint64_t i = 0; i < n; ++i) {
            lengths.push_back(static_cast<uint32_t>(1 + fixtures::below(rng, 65535)));
            m.pkt_id.push_back(i);
            m.pkt_lengths.push_back(lengths.back());
            m.src_ip.push_back(Ipv4(10, 0, 0, 1));
            m.dst_ip.push_back(Ipv4(10, 0, 0, 2));
        }
        const auto expected = fixtures::fifo_finish_times(lengths, static_cast<uint64_t>(*ls.phy_rate_bps),
                                                         params.per_packet_overhead_ns);
        const uint64_t window = 1 + fixtures::below(rng, 2'000'000);
        std::vector<uint64_t> got;
        bool windows_ok = true;
        for (uint64_t t = 0; got.size() < n && t < expected.back() + 2 * window; t += window) {
            NetworkUpdate manifest = t == 0 ? m : NetworkUpdate{};
            manifest.time_val = t;
            const NetworkUpdate end = sim.advance(t, window, manifest);
            for (const TxRecord& r : sim.last_window_trace()) {
                got.push_back(r.tx_end_ns);
                windows_ok = windows_ok && r.tx_end_ns > t && r.tx_end_ns <= t + window;
            }
            windows_ok = windows_ok && end.clear_pkt_id.size() == sim.last_window_trace().size();
        }
        if (got == expected && windows_ok) ++exact;
    }
    return {cases > 0 && exact == cases, format("%d/%d random cases match the FIFO closed form exactly", exact, cases)};
}

// ---------------------------------------------------------------------------
// 6. BER application over full runs

class FixedBerNetSim final : public NetSimInterface {
public:
    FixedBerNetSim(RadioParams params, AgentAddressMap map, double ber) : inner_(params, map), ber_(ber) {}

    void apply_channel(const ChannelData& cd) override { inner_.apply_channel(cd); }
    NetworkUpdate advance(uint64_t t, uint64_t w, const NetworkUpdate& m) override {
        NetworkUpdate out = inner_.advance(t, w, m);
        for (double& b : out.ber) b = ber_;
        return out;
    }

private:
    ReferenceNetSim inner_;
    double ber_;
};

struct BerRun {
    uint64_t sent = 0;
    uint64_t delivered = 0;
    uint64_t bits = 0;
    uint64_t flipped = 0;
    bool identical = true;
    bool complemented = true;
};

BerRun run_with_ber(double ber) {
    ScenarioConfig c = two_agents({0, 0, 10}, {10, 0, 10}, 2'000'000'000);
    const Ipv4 a = Ipv4(10, 0, 0, 1);
    const Ipv4 b = Ipv4(10, 0, 0, 2);
    auto [phys_link, net_link] = make_in_process_link_pair();
    PhysCoordConfig pc;
    pc.window_ns = c.window_ns;
    pc.duration_ns = c.duration_ns;
    ReferencePhysicsSim physics(c.world, c.tracks);
    InProcessBackend backend({a, b});
    FixedBerNetSim netsim(c.radio, c.agent_address_map, ber);
    NetCoordConfig nc;
    nc.window_ns = c.window_ns;
    nc.duration_ns = c.duration_ns;
    nc.seed = 42;
    nc.agent_address_map = c.agent_address_map;

    BerRun out;
    std::vector<Bytes> originals;
    ApplicationHook hook = [&](uint64_t, const ChannelData*) {
        // The medium is FIFO on this single link, so the n-th delivery is the n-th send.
        for (RawPacket& p : backend.endpoint(b).receive_all()) {
            const Bytes& orig = originals.at(out.delivered++);
            out.bits += 8 * orig.size();
            for (size_t i = 0; i < orig.size(); ++i) {
                const uint8_t x = static_cast<uint8_t>(orig[i] ^ p.payload[i]);
                out.flipped += static_cast<uint64_t>(__builtin_popcount(x));
                out.identical = out.identical && x == 0;
                out.complemented = out.complemented && x == 0xff;
            }
        }
        originals.push_back(flow_payload(0, out.sent++, 1000));
        backend.endpoint(a).send(b, originals.back());
    };
    std::thread t([&, link = phys_link.get()] {
        try {
            run_physics_coordinator(pc, *link, physics);
        } catch (...) {
            link->close();
        }
    });
    run_network_coordinator(nc, *net_link, netsim, backend, hook);
    t.join();
    return out;
}

Verdict ber_application() {
    const BerRun zero = run_with_ber(0.0);
    const BerRun half = run_with_ber(0.5);
    const BerRun one = run_with_ber(1.0);
    const double frac = static_cast<double>(half.flipped) / static_cast<double>(half.bits);
    Verdict v;
    v.pass = zero.delivered > 0 && zero.identical && zero.flipped == 0 && half.bits >= 1'000'000 &&
             std::abs(frac - 0.5) <= 0.02 && one.delivered > 0 && one.complemented;
    v.detail = format("ber=0: %llu packets byte-exact=%s; ber=0.5: %.4f of %llu bits flipped (50%% +- 2%%); "
                      "ber=1: %llu packets complemented=%s",
                      static_cast<unsigned long long>(zero.delivered), zero.identical ? "yes" : "no", frac,
                      static_cast<unsigned long long>(half.bits), static_cast<unsigned long long>(one.delivered),
                      one.complemented ? "yes" : "no");
    return v;
}

// ---------------------------------------------------------------------------
// 7. Patrol phenomenology

struct PatrolVerdicts {
    bool troughs = false;
    bool deep = false;
    bool correlation = false;
    bool tail = false;
    std::string detail;

    bool all() const { return troughs && deep && correlation && tail; }
    std::string signature() const {
        return std::string(troughs ? "a" : "-") + (deep ? "b" : "-") + (correlation ? "c" : "-") + (tail ? "d" : "-");
    }
};

PatrolVerdicts evaluate_patrol(const ScenarioResult& r) {
    const MetricsSeries& m = r.metrics;
    PatrolVerdicts pv;
    double los_sum = 0;
    size_t los_n = 0;
    for (size_t k = 0; k < m.goodput_bps.size(); ++k) {
        if (r.labels[k].known && r.labels[k].los) {
            los_sum += m.goodput_bps[k];
            ++los_n;
        }
    }
    const double los_mean = los_n ? los_sum / static_cast<double>(los_n) : 0.0;

    // (a) contiguous runs of smoothed goodput below half the LOS mean that contain NLOS samples.
    int nlos_troughs = 0;
    for (size_t k = 0; k < m.smoothed_goodput_bps.size();) {
        if (!(m.smoothed_goodput_bps[k] < 0.5 * los_mean)) {
            ++k;
            continue;
        }
        bool nlos = false;
        size_t j = k;
        for (; j < m.smoothed_goodput_bps.size() && m.smoothed_goodput_bps[j] < 0.5 * los_mean; ++j) {
            nlos = nlos || (r.labels[j].known && !r.labels[j].los);
        }
        nlos_troughs += nlos;
        k = j;
    }
    pv.troughs = los_mean > 0 && nlos_troughs >= 2;

    // (b) deep NLOS: more than 100 m apart with at least two walls in between.
    double deep_sum = 0;
    size_t deep_n = 0;
    for (size_t k = 0; k < m.goodput_bps.size(); ++k) {
        const SampleLabel& l = r.labels[k];
        if (l.known && !l.los && l.distance_m > 100.0 && l.walls >= 2) {
            deep_sum += m.goodput_bps[k];
            ++deep_n;
        }
    }
    const double deep_mean = deep_n ? deep_sum / static_cast<double>(deep_n) : 0.0;
    pv.deep = deep_n > 0 && deep_mean < 0.05 * los_mean;

    // (c) sampled rate against smoothed delay.
    std::vector<double> rate;
    std::vector<double> delay;
    for (const ScatterPoint& p : scatter_points(m)) {
        rate.push_back(p.goodput_bps);
        delay.push_back(p.smoothed_delay_s);
    }
    const double rho = spearman(rate, delay);
    pv.correlation = rho < -0.3;

    // (d) mode < mean < p95 of the per-packet delay distribution.
    const double mode = m.delay_density.mode();
    const double dmean = mean(m.delays_s);
    const double p95 = quantile(m.delays_s, 0.95);
    pv.tail = !m.delay_empty && mode < dmean && dmean < p95;
    int peaks = 0;
    const auto& y = m.delay_density.y;
    const double ymax = y.empty() ? 0.0 : *std::max_element(y.begin(), y.end());
    for (size_t i = 1; i + 1 < y.size(); ++i) peaks += y[i] > y[i - 1] && y[i] >= y[i + 1] && y[i] > 0.05 * ymax;

    pv.detail = format("LOS mean %.2f Mb/s over %zu samples; (a) %d NLOS troughs %s; (b) deep NLOS %zu samples, "
                       "mean %.3f Mb/s = %.1f%% of LOS %s; (c) Spearman %.3f %s; (d) mode %.1f ms, mean %.1f ms, "
                       "p95 %.1f ms %s (%d density peaks above 5%% of the maximum)",
                       los_mean * 1e-6, los_n, nlos_troughs, pv.troughs ? "ok" : "FAIL", deep_n, deep_mean * 1e-6,
                       los_mean > 0 ? 100.0 * deep_mean / los_mean : 0.0, pv.deep ? "ok" : "FAIL", rho,
                       pv.correlation ? "ok" : "FAIL", mode * 1e3, dmean * 1e3, p95 * 1e3, pv.tail ? "ok" : "FAIL",
                       peaks);
    return pv;
}

ScenarioConfig patrol_config(const std::string& path) {
    ScenarioConfig c = load_scenario(path);
    validate(c);
    return c;
}

Verdict patrol(const std::string& path) {
    const ScenarioConfig c = patrol_config(path);
    const ScenarioResult r = run_scenario(c);
    const PatrolVerdicts pv = evaluate_patrol(r);
    const double sim_s = static_cast<double>(c.duration_ns) * 1e-9;
    const double wall = r.wall_time.count();
    Verdict v;
    v.pass = pv.all() && c.duration_ns <= 60'000'000'000 && wall < 120.0;
    v.detail = format("%.0f s simulated in %.1f s wall; ", sim_s, wall) + pv.detail;
    return v;
}

// ---------------------------------------------------------------------------
// 8. Calibration band

Verdict calibration() {
    const ScenarioConfig c = two_agents({0, 0, 10}, {30, 0, 10}, 10'000'000'000);
    const ScenarioResult r = run_scenario(c);
    const auto& g = r.metrics.goodput_bps;
    // Steady state: skip the first second (link bring-up and window ramp).
    const size_t skip = g.size() / 10;
    const std::vector<double> steady(g.begin() + static_cast<std::ptrdiff_t>(skip), g.end());
    const double mbps = mean(steady) * 1e-6;
    // Sample-to-sample variation of the 200 ms moving average.
    double lo = INFINITY;
    double hi = -INFINITY;
    for (size_t k = skip; k < r.metrics.smoothed_goodput_bps.size(); ++k) {
        lo = std::min(lo, r.metrics.smoothed_goodput_bps[k] * 1e-6);
        hi = std::max(hi, r.metrics.smoothed_goodput_bps[k] * 1e-6);
    }
    Verdict v;
    v.pass = mbps >= 4.0 && mbps <= 16.0;
    v.detail = format("30 m LOS steady goodput %.2f Mb/s (band [4, 16]); smoothed range %.2f..%.2f Mb/s; "
                      "payload mismatches %llu",
                      mbps, lo, hi, static_cast<unsigned long long>(r.flows.at(0).counters.payload_mismatches));
    return v;
}

// ---------------------------------------------------------------------------
// 9. Determinism

std::map<std::string, std::string> csv_files(const std::filesystem::path& dir) {
    std::map<std::string, std::string> out;
    for (const auto& e : std::filesystem::directory_iterator(dir)) {
        if (e.path().extension() != ".csv") continue;
        std::ifstream in(e.path(), std::ios::binary);
        std::stringstream ss;
        ss << in.rdbuf();
        out[e.path().filename().string()] = ss.str();
    }
    return out;
}

Verdict determinism(const std::string& path) {
    const ScenarioConfig base = patrol_config(path);
    const auto root = std::filesystem::temp_directory_path() / ("cosim_acceptance_" + std::to_string(::getpid()));
    std::filesystem::remove_all(root);

    auto run = [&](uint64_t seed, const std::string& name) {
        ScenarioConfig c = base;
        c.seed = seed;
        ScenarioResult r = run_scenario(c);
        write_artifacts(r, root / name, false);
        return r;
    };
    const ScenarioResult r1 = run(base.seed, "a");
    const ScenarioResult r2 = run(base.seed, "b");
    const ScenarioResult r3 = run(base.seed + 1, "c");
    const auto f1 = csv_files(root / "a");
    const auto f2 = csv_files(root / "b");
    const auto f3 = csv_files(root / "c");
    std::filesystem::remove_all(root);

    const bool identical = f1 == f2 && f1.size() >= 7;
    auto corruption = [](const ScenarioResult& r) {
        return std::tuple(r.net.counters.bits_flipped, r.corrupted_packets, r.flows.at(0).counters.retransmissions,
                          r.ledger.size());
    };
    const bool changed = corruption(r1) != corruption(r3) && f1 != f3;
    const std::string s1 = evaluate_patrol(r1).signature();
    const std::string s3 = evaluate_patrol(r3).signature();
    Verdict v;
    v.pass = identical && changed && s1 == s3;
    v.detail = format("same seed: %zu CSV files %s; seed %llu vs %llu: bits flipped %llu vs %llu, corrupted packets "
                      "%llu vs %llu; criterion 7 verdicts %s vs %s",
                      f1.size(), identical ? "byte-identical" : "DIFFER", static_cast<unsigned long long>(base.seed),
                      static_cast<unsigned long long>(base.seed + 1),
                      static_cast<unsigned long long>(r1.net.counters.bits_flipped),
                      static_cast<unsigned long long>(r3.net.counters.bits_flipped),
                      static_cast<unsigned long long>(r1.corrupted_packets),
                      static_cast<unsigned long long>(r3.corrupted_packets), s1.c_str(), s3.c_str());
    return v;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Acceptance criteria"};
    std::vector<int> only;
    std::string scenario = COSIM_PATROL_SCENARIO;
    app.add_option("--only", only, "Run only these criteria (1-9)")->check(CLI::Range(1, 9));
    app.add_option("--scenario", scenario, "Patrol scenario used by criteria 7 and 9")->capture_default_str();
    CLI11_PARSE(app, argc, argv);

    const std::vector<std::pair<const char*, std::function<Verdict()>>> criteria = {
        {"lockstep soundness", lockstep},
        {"wire round-trip", wire_round_trip},
        {"geometry oracle", geometry},
        {"radio-model monotonicity", radio_monotonicity},
        {"netsim oracle equivalence", netsim_oracle},
        {"BER application", ber_application},
        {"patrol phenomenology", [&] { return patrol(scenario); }},
        {"calibration band", calibration},
        {"determinism", [&] { return determinism(scenario); }},
    };

    int failed = 0;
    for (size_t i = 0; i < criteria.size(); ++i) {
        const int id = static_cast<int>(i) + 1;
        if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
        Verdict v;
        const auto t0 = Clock::now();
        try {
            v = criteria[i].second();
        } catch (const std::exception& e) {
            v = {false, std::string("error: ") + e.what()};
        }
        std::printf("criterion %d (%s): %s - %s [%.1f s]\n", id, criteria[i].first, v.pass ? "PASS" : "FAIL",
                    v.detail.c_str(), seconds_since(t0));
        std::fflush(stdout);
        failed += !v.pass;
    }
    return failed == 0 ? 0 : 1;
}
