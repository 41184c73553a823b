// cosim: run or validate a co-simulation scenario.
//
//   cosim run --scenario scenarios/patrol.json --out out/ --plots
//   cosim validate --scenario scenarios/patrol.json
//
// Exit codes: 0 success, 1 invalid scenario, 2 runtime failure (desync,
// protocol or transport error).

#include <cstdio>
#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "cosim/error.hpp"
#include "cosim/scenario.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInvalid = 1;
constexpr int kExitRuntime = 2;

void report_config_error(const cosim::ConfigError& e) {
    std::cerr << "invalid scenario";
    if (!e.path().empty()) std::cerr << " at " << e.path();
    std::cerr << ": " << e.what() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Lockstep physics/network co-simulation"};
    app.require_subcommand(1);

    std::string scenario_path;
    std::optional<uint64_t> seed;
    std::optional<uint64_t> window_ns;
    std::optional<uint64_t> duration_ns;
    std::string out_dir = "out";
    bool plots = false;

    CLI::App* run = app.add_subcommand("run", "Run a scenario and write its artifacts");
    run->add_option("--scenario", scenario_path, "Scenario JSON file")->required()->check(CLI::ExistingFile);
    run->add_option("--seed", seed, "Override the scenario seed");
    run->add_option("--window-ns", window_ns, "Override the synchronization window (ns)");
    run->add_option("--duration-ns", duration_ns, "Override the simulated duration (ns)");
    run->add_option("--out", out_dir, "Output directory")->capture_default_str();
    run->add_flag("--plots", plots, "Also write SVG plots");

    CLI::App* check = app.add_subcommand("validate", "Check a scenario file without running it");
    check->add_option("--scenario", scenario_path, "Scenario JSON file")->required()->check(CLI::ExistingFile);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitInvalid;
    }

    cosim::ScenarioConfig config;
    try {
        config = cosim::load_scenario(scenario_path);
        if (seed) config.seed = *seed;
        if (window_ns) config.window_ns = *window_ns;
        if (duration_ns) config.duration_ns = *duration_ns;
        cosim::validate(config);
    } catch (const cosim::ConfigError& e) {
        report_config_error(e);
        return kExitInvalid;
    }

    if (check->parsed()) {
        std::cout << scenario_path << ": ok (" << config.tracks.size() << " agents, " << config.flows.size()
                  << " flows, " << config.duration_ns / config.window_ns << " windows)\n";
        return kExitOk;
    }

    cosim::ScenarioResult result;
    try {
        result = cosim::run_scenario(config, /*keep_partial=*/true);
    } catch (const cosim::ConfigError& e) {
        report_config_error(e);
        return kExitInvalid;
    } catch (const std::exception& e) {
        std::cerr << "run failed: " << e.what() << "\n";
        return kExitRuntime;
    }

    try {
        cosim::write_artifacts(result, out_dir, plots);
    } catch (const std::exception& e) {
        std::cerr << "writing artifacts failed: " << e.what() << "\n";
        return kExitRuntime;
    }

    if (!result.completed) {
        std::cerr << "run aborted: " << result.error << " (partial artifacts in " << out_dir << ")\n";
        return kExitRuntime;
    }

    uint64_t delivered = 0;
    for (const cosim::FlowState& f : result.flows) delivered += f.counters.bytes_delivered;
    std::printf("%llu windows in %.2f s wall, %llu payload bytes delivered, artifacts in %s\n",
                static_cast<unsigned long long>(result.net.windows), result.wall_time.count(),
                static_cast<unsigned long long>(delivered), out_dir.c_str());
    return kExitOk;
}
