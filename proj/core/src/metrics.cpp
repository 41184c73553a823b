#include "cosim/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "cosim/error.hpp"

namespace cosim {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::vector<double> finite_only(std::span<const double> xs) {
    std::vector<double> out;
    out.reserve(xs.size());
    for (double x : xs) {
        if (std::isfinite(x)) out.push_back(x);
    }
    return out;
}

std::vector<double> average_ranks(std::span<const double> xs) {
    std::vector<size_t> order(xs.size());
    std::iota(order.begin(), order.end(), size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) { return xs[a] < xs[b]; });
    std::vector<double> ranks(xs.size());
    for (size_t i = 0; i < order.size();) {
        size_t j = i;
        while (j + 1 < order.size() && xs[order[j + 1]] == xs[order[i]]) ++j;
        const double r = 0.5 * static_cast<double>(i + j) + 1.0;
        for (size_t k = i; k <= j; ++k) ranks[order[k]] = r;
        i = j + 1;
    }
    return ranks;
}

}  // namespace

double DensityEstimate::integral() const {
    double sum = 0.0;
    for (size_t i = 1; i < x.size(); ++i) sum += 0.5 * (y[i] + y[i - 1]) * (x[i] - x[i - 1]);
    return sum;
}

double DensityEstimate::mode() const {
    if (y.empty()) return kNaN;
    return x[static_cast<size_t>(std::max_element(y.begin(), y.end()) - y.begin())];
}

std::vector<double> moving_average(std::span<const double> xs, size_t width) {
    if (width == 0) throw ConfigError("/metrics/smoothing_window_ns", "smoothing width must be positive");
    const size_t n = xs.size();
    // Prefix sums of values and of counts, skipping NaN.
    std::vector<double> sum(n + 1, 0.0);
    std::vector<size_t> count(n + 1, 0);
    for (size_t i = 0; i < n; ++i) {
        const bool ok = !std::isnan(xs[i]);
        sum[i + 1] = sum[i] + (ok ? xs[i] : 0.0);
        count[i + 1] = count[i] + (ok ? 1 : 0);
    }
    const size_t before = width / 2;
    const size_t after = width - 1 - before;
    std::vector<double> out(n);
    for (size_t k = 0; k < n; ++k) {
        const size_t lo = k >= before ? k - before : 0;
        const size_t hi = std::min(n, k + after + 1);
        const size_t c = count[hi] - count[lo];
        out[k] = c == 0 ? kNaN : (sum[hi] - sum[lo]) / static_cast<double>(c);
    }
    return out;
}

Histogram make_histogram(std::span<const double> xs, uint32_t bins) {
    if (bins == 0) throw ConfigError("/metrics/histogram_bins", "must be positive");
    const std::vector<double> v = finite_only(xs);
    Histogram h;
    double lo = 0.0;
    double hi = 1.0;
    if (!v.empty()) {
        auto [mn, mx] = std::minmax_element(v.begin(), v.end());
        lo = *mn;
        hi = *mx;
    }
    if (!(hi > lo)) {
        lo -= 0.5;
        hi += 0.5;
    }
    h.edges.resize(bins + 1);
    for (uint32_t i = 0; i <= bins; ++i) h.edges[i] = lo + (hi - lo) * i / bins;
    h.edges[bins] = hi;
    h.mass.assign(bins, 0.0);
    if (v.empty()) return h;
    std::vector<uint64_t> counts(bins, 0);
    for (double x : v) {
        auto b = static_cast<size_t>((x - lo) / (hi - lo) * bins);
        ++counts[std::min<size_t>(b, bins - 1)];
    }
    for (uint32_t i = 0; i < bins; ++i) h.mass[i] = static_cast<double>(counts[i]) / static_cast<double>(v.size());
    return h;
}

double silverman_bandwidth(std::span<const double> xs) {
    std::vector<double> v = finite_only(xs);
    const size_t n = v.size();
    if (n == 0) return kNaN;
    const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(n);
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    const double sd = n > 1 ? std::sqrt(ss / static_cast<double>(n - 1)) : 0.0;
    const double iqr = quantile(v, 0.75) - quantile(v, 0.25);
    double spread = sd;
    if (iqr > 0.0) spread = std::min(sd, iqr / 1.34);
    double h = 0.9 * spread * std::pow(static_cast<double>(n), -0.2);
    if (!(h > 0.0)) {
        // All samples equal: fall back to a bandwidth proportional to their magnitude.
        h = std::max(std::abs(mean) * 1e-3, 1e-12);
    }
    return h;
}

DensityEstimate gaussian_kde(std::span<const double> xs) {
    std::vector<double> v = finite_only(xs);
    DensityEstimate d;
    if (v.empty()) return d;
    std::sort(v.begin(), v.end());
    const double h = silverman_bandwidth(v);
    d.bandwidth = h;

    const double lo = v.front() - 5.0 * h;
    const double hi = v.back() + 5.0 * h;
    constexpr size_t kMinPoints = 513;
    constexpr size_t kMaxPoints = 1 << 20;
    size_t points = std::max<size_t>(kMinPoints, static_cast<size_t>(std::ceil((hi - lo) / (h / 4.0))) + 1);
    points = std::min(points, kMaxPoints);
    const double step = (hi - lo) / static_cast<double>(points - 1);
    d.x.resize(points);
    for (size_t i = 0; i < points; ++i) d.x[i] = lo + step * static_cast<double>(i);
    d.y.assign(points, 0.0);

    // Each sample only touches grid points within 8h; the truncated mass is below 1e-15.
    const double norm = 1.0 / (static_cast<double>(v.size()) * h * std::sqrt(2.0 * M_PI));
    const double reach = 8.0 * h;
    for (double s : v) {
        const auto first = static_cast<size_t>(std::max(0.0, std::ceil((s - reach - lo) / step)));
        const auto last = std::min(points - 1, static_cast<size_t>(std::floor((s + reach - lo) / step)));
        for (size_t i = first; i <= last; ++i) {
            const double z = (d.x[i] - s) / h;
            d.y[i] += std::exp(-0.5 * z * z);
        }
    }
    for (double& y : d.y) y *= norm;
    return d;
}

double spearman(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw Error("spearman: inputs differ in length");
    if (a.size() < 2) return kNaN;
    const std::vector<double> ra = average_ranks(a);
    const std::vector<double> rb = average_ranks(b);
    const double n = static_cast<double>(a.size());
    const double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / n;
    const double mb = std::accumulate(rb.begin(), rb.end(), 0.0) / n;
    double sab = 0.0;
    double saa = 0.0;
    double sbb = 0.0;
    for (size_t i = 0; i < ra.size(); ++i) {
        sab += (ra[i] - ma) * (rb[i] - mb);
        saa += (ra[i] - ma) * (ra[i] - ma);
        sbb += (rb[i] - mb) * (rb[i] - mb);
    }
    if (saa == 0.0 || sbb == 0.0) return kNaN;
    return sab / std::sqrt(saa * sbb);
}

double quantile(std::vector<double> xs, double q) {
    if (xs.empty()) return kNaN;
    std::sort(xs.begin(), xs.end());
    const double pos = q * static_cast<double>(xs.size() - 1);
    const auto i = static_cast<size_t>(std::floor(pos));
    if (i + 1 >= xs.size()) return xs.back();
    return xs[i] + (pos - static_cast<double>(i)) * (xs[i + 1] - xs[i]);
}

MetricsSeries collect_metrics(std::span<const DeliveryRecord> ledger, uint64_t duration_ns,
                              const MetricsConfig& config) {
    const uint64_t period = config.sample_period_ns;
    if (period == 0) throw ConfigError("/metrics/sample_period_ns", "must be positive");
    if (config.smoothing_window_ns < period || config.smoothing_window_ns % period != 0) {
        throw ConfigError("/metrics/smoothing_window_ns", "must be a positive multiple of sample_period_ns");
    }
    const size_t samples = duration_ns / period;
    const size_t width = config.smoothing_window_ns / period;

    MetricsSeries m;
    m.sample_period_ns = period;
    std::vector<double> bits(samples, 0.0);
    std::vector<double> delay_sum(samples, 0.0);
    std::vector<uint64_t> delay_count(samples, 0);
    // Both timestamps are window ends, so (k*P, (k+1)*P] maps to index (t - 1) / P.
    auto sample_of = [&](uint64_t t) { return t == 0 ? samples : (t - 1) / period; };
    for (const DeliveryRecord& r : ledger) {
        const double delay = static_cast<double>(r.delay_ns()) * 1e-9;
        m.delays_s.push_back(delay);
        if (const uint64_t k = sample_of(r.delivered_ns); k < samples) bits[k] += 8.0 * r.bytes;
        if (const uint64_t k = sample_of(r.first_send_ns); k < samples) {
            delay_sum[k] += delay;
            ++delay_count[k];
        }
    }
    const double period_s = static_cast<double>(period) * 1e-9;
    m.goodput_bps.resize(samples);
    m.sample_delay_s.resize(samples);
    for (size_t k = 0; k < samples; ++k) {
        m.goodput_bps[k] = bits[k] / period_s;
        m.sample_delay_s[k] = delay_count[k] == 0 ? kNaN : delay_sum[k] / static_cast<double>(delay_count[k]);
    }
    m.smoothed_goodput_bps = moving_average(m.goodput_bps, width);
    m.smoothed_delay_s = moving_average(m.sample_delay_s, width);
    m.delay_empty = m.delays_s.empty();
    m.rate_hist = make_histogram(m.goodput_bps, config.histogram_bins);
    m.delay_hist = make_histogram(m.delays_s, config.histogram_bins);
    m.rate_density = gaussian_kde(m.goodput_bps);
    m.delay_density = gaussian_kde(m.delays_s);
    return m;
}

}  // namespace cosim
