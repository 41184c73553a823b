#pragma once

// Scenario files, the end-to-end run that wires both coordinators together,
// and the artifacts written from it.

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "cosim/address_map.hpp"
#include "cosim/flow.hpp"
#include "cosim/metrics.hpp"
#include "cosim/net_coord.hpp"
#include "cosim/netsim.hpp"
#include "cosim/phys_coord.hpp"
#include "cosim/physics.hpp"

namespace cosim {

struct ScenarioConfig {
    std::string name;
    WorldModel world;
    std::vector<AgentTrack> tracks;
    AgentAddressMap agent_address_map;
    RadioParams radio;
    uint64_t window_ns = kDefaultWindowNs;
    uint64_t duration_ns = 0;
    ChannelFidelity fidelity = ChannelFidelity::los_nlos();
    std::vector<FlowSpec> flows;
    uint64_t seed = 0;
    MetricsConfig metrics;
    uint32_t substeps_per_window = 1;
    uint64_t expiry_windows = 30'000;
};

// Parses a scenario document. Unknown keys are rejected and omitted optional
// fields take their defaults. Every error is a ConfigError whose path() is a
// JSON pointer into the document.
ScenarioConfig parse_scenario(const std::string& json_text);
ScenarioConfig load_scenario(const std::filesystem::path& path);

// Cross-field invariants, rechecked after command-line overrides.
void validate(const ScenarioConfig& config);

// Canonical JSON form of a configuration with every default filled in.
std::string scenario_to_json(const ScenarioConfig& config, int indent = 2);

// Radio-relevant view of the first flow's pair at the end of each sample.
struct SampleLabel {
    bool known = false;  // false until the first channel update has arrived
    bool los = false;
    double distance_m = 0.0;
    double wall_loss_db = 0.0;
    uint32_t walls = 0;
    double snr_db = 0.0;
    double phy_rate_bps = 0.0;  // 0 when the link is down
};

struct ScenarioResult {
    ScenarioConfig config;
    std::vector<DeliveryRecord> ledger;
    std::vector<FlowState> flows;
    uint64_t corrupted_packets = 0;
    std::vector<SampleLabel> labels;  // one per metrics sample
    MetricsSeries metrics;
    NetRunSummary net;
    PhysRunSummary phys;
    std::vector<uint64_t> netsim_dropped;
    std::chrono::duration<double> wall_time{0};
    bool completed = false;
    std::string error;  // set when the run aborted; artifacts are then partial
};

// Runs the physics side and the network side on two threads joined by an
// in-process link. Coordinator errors are rethrown after both threads have
// stopped unless `keep_partial` is set, in which case the partial result is
// returned with `error` filled in.
ScenarioResult run_scenario(const ScenarioConfig& config, bool keep_partial = false);

// Writes rate.csv, delay.csv, rate_hist.csv, delay_hist.csv, rate_density.csv,
// delay_density.csv, scatter.csv and run_summary.json, plus SVG plots on request.
void write_artifacts(const ScenarioResult& result, const std::filesystem::path& out_dir, bool plots);

// Scatter pairs used for the rate/delay correlation: the raw goodput and the
// smoothed delay of every sample whose smoothed delay is defined.
struct ScatterPoint {
    double time_s = 0.0;
    double goodput_bps = 0.0;
    double smoothed_delay_s = 0.0;
};
std::vector<ScatterPoint> scatter_points(const MetricsSeries& metrics);

}  // namespace cosim
