#include <benchmark/benchmark.h>

#include <thread>

#include "cosim/sync.hpp"

using namespace cosim;

namespace {

class EmptyDriver : public SimDriver {
public:
    explicit EmptyDriver(Role role) : role_(role) {}
    Message simulate(uint64_t, uint64_t, const std::optional<Message>&) override {
        if (role_ == Role::kPhysicsSide) return PhysicsUpdate{};
        return NetworkUpdate{};
    }

private:
    Role role_;
};

}  // namespace

// Round trips per second for an in-process pair with no simulation work.
static void BM_LockstepWindows(benchmark::State& state) {
    const auto windows = static_cast<uint64_t>(state.range(0));
    for (auto _ : state) {
        auto [a, b] = make_in_process_link_pair();
        SyncPeer phys(Role::kPhysicsSide, 1'000'000);
        SyncPeer net(Role::kNetworkSide, 1'000'000);
        EmptyDriver pd(Role::kPhysicsSide);
        EmptyDriver nd(Role::kNetworkSide);
        std::thread t([&, link = a.get()] {
            phys.start(*link);
            for (uint64_t k = 0; k < windows; ++k) phys.run_window(*link, pd);
        });
        net.start(*b);
        for (uint64_t k = 0; k < windows; ++k) net.run_window(*b, nd);
        t.join();
    }
    state.SetItemsProcessed(static_cast<int64_t>(state.iterations() * windows));
}
BENCHMARK(BM_LockstepWindows)->Arg(1000)->Unit(benchmark::kMillisecond);
