#include <benchmark/benchmark.h>

#include <random>

#include "cosim/physics.hpp"

using namespace cosim;

namespace {

WorldModel city(int boxes) {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(0, 180);
    WorldModel w;
    w.bounds = {{0, 0, 0}, {200, 200, 50}, 0};
    for (int i = 0; i < boxes; ++i) {
        const double x = u(rng);
        const double y = u(rng);
        w.obstacles.push_back({{x, y, 0}, {x + 15, y + 15, 30}, 10});
    }
    return w;
}

}  // namespace

static void BM_ExtractChannelData(benchmark::State& state) {
    const WorldModel w = city(static_cast<int>(state.range(1)));
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0, 200);
    std::vector<AgentState> agents(static_cast<size_t>(state.range(0)));
    for (size_t i = 0; i < agents.size(); ++i) {
        agents[i].agent_id = static_cast<uint32_t>(i);
        agents[i].pose.position = {u(rng), u(rng), 10};
    }
    for (auto _ : state) benchmark::DoNotOptimize(extract_channel_data(w, agents, ChannelFidelity::los_nlos()));
}
BENCHMARK(BM_ExtractChannelData)->Args({2, 4})->Args({8, 10})->Args({16, 40});
