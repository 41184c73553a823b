#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <thread>

#include "cosim/error.hpp"
#include "cosim/plot.hpp"
#include "cosim/scenario.hpp"
#include "json.hpp"

namespace cosim {

namespace {

using nlohmann::json;

SampleLabel make_label(const ChannelData* channel, const LinkState& link, uint32_t a, uint32_t b) {
    SampleLabel l;
    if (channel == nullptr) return l;
    l.known = true;
    l.distance_m = link.distance_m;
    l.wall_loss_db = link.wall_loss_db;
    l.snr_db = link.snr_db;
    l.phy_rate_bps = link.phy_rate_bps.value_or(0.0);
    if (a < channel->node_list.size() && b < channel->node_list.size()) {
        l.distance_m = distance(channel->node_list[a].position, channel->node_list[b].position);
    }
    const auto key = std::minmax(a, b);
    for (const PathDetails& p : channel->path_details) {
        if (std::minmax(p.ids[0], p.ids[1]) != key) continue;
        l.los = p.los;
        l.walls = p.num_hops.empty() ? 0 : p.num_hops.front();
        break;
    }
    return l;
}

// A closed link (the peer gave up) is a consequence; anything else is a cause.
bool is_consequence(const std::exception_ptr& e) {
    try {
        std::rethrow_exception(e);
    } catch (const TransportError& t) {
        return t.kind() == TransportErrorKind::kClosed;
    } catch (...) {
        return false;
    }
}

std::string describe(const std::exception_ptr& e) {
    try {
        std::rethrow_exception(e);
    } catch (const std::exception& x) {
        return x.what();
    } catch (...) {
        return "unknown error";
    }
}

// snprintf is locale independent here, so the CSV bytes depend only on the values.
std::string fmt(double v) {
    if (std::isnan(v)) return "";
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.10g", v);
    return buf;
}

std::string fmt_s(uint64_t ns) { return fmt(static_cast<double>(ns) * 1e-9); }

void write_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + path.string());
    out << content;
    if (!out) throw Error("failed writing " + path.string());
}

std::string histogram_csv(const Histogram& h) {
    std::string s = "bin_lo,bin_hi,mass,density\n";
    for (size_t i = 0; i < h.bins(); ++i) {
        s += fmt(h.edges[i]) + "," + fmt(h.edges[i + 1]) + "," + fmt(h.mass[i]) + "," + fmt(h.density(i)) + "\n";
    }
    return s;
}

std::string density_csv(const DensityEstimate& d) {
    std::string s = "x,density\n";
    for (size_t i = 0; i < d.x.size(); ++i) s += fmt(d.x[i]) + "," + fmt(d.y[i]) + "\n";
    return s;
}

json counters_json(const FlowCounters& c) {
    return {{"data_sent", c.data_sent},
            {"retransmissions", c.retransmissions},
            {"timeouts", c.timeouts},
            {"fast_retransmissions", c.fast_retransmissions},
            {"bytes_sent", c.bytes_sent},
            {"bytes_delivered", c.bytes_delivered},
            {"data_received", c.data_received},
            {"duplicates", c.duplicates},
            {"acks_sent", c.acks_sent},
            {"acks_received", c.acks_received},
            {"payload_mismatches", c.payload_mismatches}};
}

json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

PlotSeries series(std::string label, std::vector<double> x, std::vector<double> y, PlotSeries::Style style,
                  std::string color) {
    PlotSeries s;
    s.label = std::move(label);
    s.x = std::move(x);
    s.y = std::move(y);
    s.style = style;
    s.color = std::move(color);
    return s;
}

std::vector<double> scaled(const std::vector<double>& v, double k) {
    std::vector<double> out(v.size());
    for (size_t i = 0; i < v.size(); ++i) out[i] = v[i] * k;
    return out;
}

void write_plots(const ScenarioResult& r, const std::filesystem::path& dir) {
    const MetricsSeries& m = r.metrics;
    std::vector<double> t(m.goodput_bps.size());
    for (size_t k = 0; k < t.size(); ++k) t[k] = static_cast<double>((k + 1) * m.sample_period_ns) * 1e-9;

    PlotSpec rate{"Goodput", "time [s]", "goodput [Mb/s]", {}, 900, 420};
    rate.series.push_back(series("sampled", t, scaled(m.goodput_bps, 1e-6), PlotSeries::Style::kPoints, "#1f77b4"));
    rate.series.push_back(
        series("moving average", t, scaled(m.smoothed_goodput_bps, 1e-6), PlotSeries::Style::kLine, "#d62728"));
    write_file(dir / "rate.svg", render_svg(rate));

    PlotSpec delay{"Delay", "time [s]", "delay [ms]", {}, 900, 420};
    delay.series.push_back(series("sampled", t, scaled(m.sample_delay_s, 1e3), PlotSeries::Style::kPoints, "#1f77b4"));
    delay.series.push_back(
        series("moving average", t, scaled(m.smoothed_delay_s, 1e3), PlotSeries::Style::kLine, "#d62728"));
    write_file(dir / "delay.svg", render_svg(delay));

    auto hist_plot = [&](const char* title, const char* xl, const Histogram& h, const DensityEstimate& d, double k) {
        PlotSpec p{title, xl, "probability density", {}, 700, 420};
        std::vector<double> left(h.edges.begin(), h.edges.end());
        std::vector<double> dens(h.bins());
        for (size_t i = 0; i < h.bins(); ++i) dens[i] = h.density(i) / k;
        p.series.push_back(series("histogram", scaled(left, k), dens, PlotSeries::Style::kBars, "#1f77b4"));
        p.series.push_back(series("density estimate", scaled(d.x, k), scaled(d.y, 1.0 / k), PlotSeries::Style::kLine,
                                  "#d62728"));
        return render_svg(p);
    };
    write_file(dir / "rate_hist.svg", hist_plot("Goodput distribution", "goodput [Mb/s]", m.rate_hist, m.rate_density, 1e-6));
    write_file(dir / "delay_hist.svg", hist_plot("Delay distribution", "delay [ms]", m.delay_hist, m.delay_density, 1e3));

    std::vector<double> sx;
    std::vector<double> sy;
    for (const ScatterPoint& p : scatter_points(m)) {
        sx.push_back(p.smoothed_delay_s * 1e3);
        sy.push_back(p.goodput_bps * 1e-6);
    }
    PlotSpec sc{"Goodput against delay", "smoothed delay [ms]", "goodput [Mb/s]", {}, 700, 500};
    sc.series.push_back(series("", sx, sy, PlotSeries::Style::kPoints, "#1f77b4"));
    write_file(dir / "scatter.svg", render_svg(sc));
}

}  // namespace

std::vector<ScatterPoint> scatter_points(const MetricsSeries& m) {
    std::vector<ScatterPoint> out;
    for (size_t k = 0; k < m.goodput_bps.size(); ++k) {
        if (std::isnan(m.smoothed_delay_s[k])) continue;
        out.push_back({static_cast<double>((k + 1) * m.sample_period_ns) * 1e-9, m.goodput_bps[k], m.smoothed_delay_s[k]});
    }
    return out;
}

ScenarioResult run_scenario(const ScenarioConfig& config, bool keep_partial) {
    validate(config);
    const auto wall_start = std::chrono::steady_clock::now();
    ScenarioResult res;
    res.config = config;

    auto [phys_link, net_link] = make_in_process_link_pair();

    PhysCoordConfig pc;
    pc.window_ns = config.window_ns;
    pc.duration_ns = config.duration_ns;
    pc.substeps_per_window = config.substeps_per_window;
    pc.fidelity = config.fidelity;
    pc.agent_address_map = config.agent_address_map;
    ReferencePhysicsSim physics(config.world, config.tracks);

    std::vector<Ipv4> addresses;
    for (const AgentAddress& e : config.agent_address_map.entries()) addresses.push_back(e.address);
    InProcessBackend backend(addresses);
    ReferenceNetSim netsim(config.radio, config.agent_address_map);
    FlowSet flows(config.flows, backend);

    NetCoordConfig nc;
    nc.window_ns = config.window_ns;
    nc.duration_ns = config.duration_ns;
    nc.expiry_windows = config.expiry_windows;
    nc.seed = config.seed;
    nc.agent_address_map = config.agent_address_map;

    const uint64_t period = config.metrics.sample_period_ns;
    res.labels.assign(config.duration_ns / period, SampleLabel{});
    uint32_t label_a = 0;
    uint32_t label_b = config.tracks.size() > 1 ? 1 : 0;
    if (!config.flows.empty()) {
        label_a = *config.agent_address_map.agent_of(config.flows.front().src);
        label_b = *config.agent_address_map.agent_of(config.flows.front().dst);
    }
    ApplicationHook hook = [&](uint64_t now, const ChannelData* channel) {
        flows.tick(now);
        if (now % period == 0 && now / period - 1 < res.labels.size()) {
            res.labels[now / period - 1] = make_label(channel, netsim.link(label_a, label_b), label_a, label_b);
        }
    };

    std::exception_ptr phys_error;
    std::exception_ptr net_error;
    std::thread phys_thread([&, link = phys_link.get()] {
        try {
            res.phys = run_physics_coordinator(pc, *link, physics);
        } catch (...) {
            phys_error = std::current_exception();
            link->close();
        }
    });
    try {
        res.net = run_network_coordinator(nc, *net_link, netsim, backend, hook);
    } catch (...) {
        net_error = std::current_exception();
        net_link->close();
    }
    phys_thread.join();

    res.ledger = flows.ledger();
    res.flows = flows.states();
    res.corrupted_packets = flows.corrupted();
    res.netsim_dropped = netsim.dropped();
    res.metrics = collect_metrics(res.ledger, config.duration_ns, config.metrics);
    res.wall_time = std::chrono::steady_clock::now() - wall_start;

    std::exception_ptr primary = net_error;
    if (!primary || (phys_error && is_consequence(net_error) && !is_consequence(phys_error))) primary = phys_error;
    if (primary) {
        res.error = describe(primary);
        if (!keep_partial) std::rethrow_exception(primary);
        return res;
    }
    res.completed = true;
    return res;
}

void write_artifacts(const ScenarioResult& r, const std::filesystem::path& dir, bool plots) {
    std::filesystem::create_directories(dir);
    const MetricsSeries& m = r.metrics;

    std::string rate =
        "time_s,goodput_bps,smoothed_goodput_bps,delay_s,smoothed_delay_s,los,distance_m,walls,wall_loss_db,snr_db,"
        "phy_rate_bps\n";
    for (size_t k = 0; k < m.goodput_bps.size(); ++k) {
        const SampleLabel& l = k < r.labels.size() ? r.labels[k] : SampleLabel{};
        rate += fmt_s((k + 1) * m.sample_period_ns) + "," + fmt(m.goodput_bps[k]) + "," +
                fmt(m.smoothed_goodput_bps[k]) + "," + fmt(m.sample_delay_s[k]) + "," + fmt(m.smoothed_delay_s[k]) +
                "," + (l.known ? (l.los ? "1" : "0") : "") + "," + (l.known ? fmt(l.distance_m) : "") + "," +
                (l.known ? std::to_string(l.walls) : "") + "," + (l.known ? fmt(l.wall_loss_db) : "") + "," +
                (l.known ? fmt(l.snr_db) : "") + "," + (l.known ? fmt(l.phy_rate_bps) : "") + "\n";
    }
    write_file(dir / "rate.csv", rate);

    std::string delay = "flow,seq,first_send_s,delivered_s,delay_s\n";
    for (const DeliveryRecord& d : r.ledger) {
        delay += std::to_string(d.flow) + "," + std::to_string(d.seq) + "," + fmt_s(d.first_send_ns) + "," +
                 fmt_s(d.delivered_ns) + "," + fmt_s(d.delay_ns()) + "\n";
    }
    write_file(dir / "delay.csv", delay);

    write_file(dir / "rate_hist.csv", histogram_csv(m.rate_hist));
    write_file(dir / "delay_hist.csv", histogram_csv(m.delay_hist));
    write_file(dir / "rate_density.csv", density_csv(m.rate_density));
    write_file(dir / "delay_density.csv", density_csv(m.delay_density));

    std::string scatter = "time_s,goodput_bps,smoothed_delay_s\n";
    std::vector<double> sr;
    std::vector<double> sd;
    for (const ScatterPoint& p : scatter_points(m)) {
        scatter += fmt(p.time_s) + "," + fmt(p.goodput_bps) + "," + fmt(p.smoothed_delay_s) + "\n";
        sr.push_back(p.goodput_bps);
        sd.push_back(p.smoothed_delay_s);
    }
    write_file(dir / "scatter.csv", scatter);

    json summary;
    summary["status"] = r.completed ? "completed" : "partial";
    if (!r.error.empty()) summary["error"] = r.error;
    summary["seed"] = r.config.seed;
    summary["windows"] = r.net.windows;
    summary["wall_time_s"] = r.wall_time.count();
    summary["network"] = {{"captured", r.net.counters.captured},
                          {"rejected", r.net.counters.rejected},
                          {"released", r.net.counters.released},
                          {"expired", r.net.counters.expired},
                          {"late_clearances", r.net.counters.late_clearances},
                          {"bytes_captured", r.net.counters.bytes_captured},
                          {"bytes_released", r.net.counters.bytes_released},
                          {"bits_flipped", r.net.counters.bits_flipped},
                          {"queue_drops", r.netsim_dropped.size()},
                          {"corrupted_packets", r.corrupted_packets},
                          {"frames_sent", r.net.frames_sent}};
    summary["physics"] = {{"windows", r.phys.windows},
                          {"agents", r.phys.agents},
                          {"physics_time_ns", r.phys.physics_time_ns},
                          {"extractions", r.phys.extractions},
                          {"frames_sent", r.phys.frames_sent}};
    json flows = json::array();
    for (size_t i = 0; i < r.flows.size(); ++i) {
        json f = counters_json(r.flows[i].counters);
        f["flow"] = i;
        f["delivered_packets"] = r.flows[i].delivered.size();
        flows.push_back(f);
    }
    summary["flows"] = flows;

    const double duration_s = static_cast<double>(r.config.duration_ns) * 1e-9;
    uint64_t bytes_delivered = 0;
    for (const FlowState& f : r.flows) bytes_delivered += f.counters.bytes_delivered;
    summary["metrics"] = {
        {"samples", m.goodput_bps.size()},
        {"mean_goodput_bps", duration_s > 0 ? 8.0 * static_cast<double>(bytes_delivered) / duration_s : 0.0},
        {"delay_empty", m.delay_empty},
        {"delay_mean_s", number_or_null(m.delays_s.empty() ? NAN
                                                           : std::accumulate(m.delays_s.begin(), m.delays_s.end(), 0.0) /
                                                                 static_cast<double>(m.delays_s.size()))},
        {"delay_mode_s", number_or_null(m.delay_density.mode())},
        {"delay_p95_s", number_or_null(quantile(m.delays_s, 0.95))},
        {"delay_bandwidth_s", number_or_null(m.delay_density.bandwidth)},
        {"rate_delay_spearman", number_or_null(spearman(sr, sd))}};
    summary["columns"] = {
        {"rate.csv",
         {{"time_s", "end of the sample interval"},
          {"goodput_bps", "payload bits delivered in (t - P, t] divided by P"},
          {"smoothed_goodput_bps", "centered moving average of goodput_bps over smoothing_window_ns"},
          {"delay_s", "mean first-send to delivery delay of packets first sent in the sample (empty if none)"},
          {"smoothed_delay_s", "centered moving average of delay_s, ignoring empty samples"},
          {"los", "1 if the first flow's agents had line of sight at t"},
          {"distance_m", "distance between the first flow's agents"},
          {"walls", "obstacles crossed by the direct path"},
          {"wall_loss_db", "summed penetration loss of those obstacles"},
          {"snr_db", "link SNR used by the network model"},
          {"phy_rate_bps", "selected PHY rate, 0 when the link is down"}}},
        {"delay.csv",
         {{"flow", "flow index"},
          {"seq", "sequence number"},
          {"first_send_s", "first transmission time"},
          {"delivered_s", "in-order delivery time"},
          {"delay_s", "delivered_s - first_send_s"}}},
        {"rate_hist.csv / delay_hist.csv",
         {{"bin_lo", "lower bin edge"},
          {"bin_hi", "upper bin edge"},
          {"mass", "fraction of samples in the bin (sums to 1)"},
          {"density", "mass / bin width"}}},
        {"rate_density.csv / delay_density.csv",
         {{"x", "evaluation point"}, {"density", "Gaussian kernel density estimate, Silverman bandwidth"}}},
        {"scatter.csv",
         {{"time_s", "end of the sample interval"},
          {"goodput_bps", "sampled goodput"},
          {"smoothed_delay_s", "smoothed delay at the same sample"}}}};
    summary["config"] = json::parse(scenario_to_json(r.config));
    write_file(dir / "run_summary.json", summary.dump(2) + "\n");

    if (plots) write_plots(r, dir);
}

}  // namespace cosim
