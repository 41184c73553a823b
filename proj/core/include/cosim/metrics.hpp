#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "cosim/flow.hpp"

namespace cosim {

struct MetricsConfig {
    uint64_t sample_period_ns = 10'000'000;
    uint64_t smoothing_window_ns = 200'000'000;
    uint32_t histogram_bins = 40;
};

struct Histogram {
    std::vector<double> edges;  // bins + 1 edges
    std::vector<double> mass;   // sums to 1 (all zero for an empty sample)

    size_t bins() const { return mass.size(); }
    double width(size_t i) const { return edges[i + 1] - edges[i]; }
    double density(size_t i) const { return mass[i] / width(i); }
};

struct DensityEstimate {
    double bandwidth = 0.0;
    std::vector<double> x;
    std::vector<double> y;

    // Trapezoidal integral over the evaluation grid.
    double integral() const;
    // Grid point of the highest density; NaN for an empty estimate.
    double mode() const;
};

struct MetricsSeries {
    uint64_t sample_period_ns = 0;
    std::vector<double> goodput_bps;
    std::vector<double> smoothed_goodput_bps;
    // Mean delay of the packets first sent in each sample (and delivered at
    // some point); NaN when there are none.
    std::vector<double> sample_delay_s;
    std::vector<double> smoothed_delay_s;
    std::vector<double> delays_s;  // one per delivered packet, ledger order
    Histogram rate_hist;
    Histogram delay_hist;
    DensityEstimate rate_density;
    DensityEstimate delay_density;
    bool delay_empty = true;
};

// Centered moving average over `width` samples (k - width/2 .. k + width - 1 - width/2).
// NaN inputs are skipped; near the ends and around gaps the mean is taken over
// whatever samples are available, and is NaN only when there are none.
std::vector<double> moving_average(std::span<const double> xs, size_t width);

// Equal-width bins over [min, max]; a degenerate range is widened by 0.5 on each side.
// Non-finite values are ignored.
Histogram make_histogram(std::span<const double> xs, uint32_t bins);

// Gaussian KDE with Silverman's rule-of-thumb bandwidth on a grid spanning
// min - 5h .. max + 5h at a spacing of at most h / 4.
DensityEstimate gaussian_kde(std::span<const double> xs);

double silverman_bandwidth(std::span<const double> xs);

// Spearman rank correlation with average ranks for ties. NaN for fewer than
// two pairs or a constant input.
double spearman(std::span<const double> a, std::span<const double> b);

// Linear-interpolation quantile (the "type 7" definition). NaN for an empty input.
double quantile(std::vector<double> xs, double q);

// Goodput sample k counts the payload bits of deliveries with
// k*P < delivered_ns <= (k+1)*P, because deliveries are observed at window ends.
// The delay of sample k averages the packets whose first send falls in the
// same interval, so a packet held through an outage is charged to the moment
// it entered the network rather than to the moment the link came back.
MetricsSeries collect_metrics(std::span<const DeliveryRecord> ledger, uint64_t duration_ns,
                              const MetricsConfig& config);

}  // namespace cosim
