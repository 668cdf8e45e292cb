#include "mixplat/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <Eigen/Core>
#include <fmt/format.h>

namespace mixplat {

namespace {

constexpr double kTimeTol = 1e-9;
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct Rows {
    Eigen::Index first = 0;
    Eigen::Index count = 0;
};

Rows rows_in(const Trace& trace, const Window& w)
{
    const auto begin = std::lower_bound(trace.time.begin(), trace.time.end(), w.t0 - kTimeTol);
    const auto end = std::upper_bound(trace.time.begin(), trace.time.end(), w.t1 + kTimeTol);
    Rows r;
    r.first = static_cast<Eigen::Index>(begin - trace.time.begin());
    r.count = std::max<Eigen::Index>(0, static_cast<Eigen::Index>(end - begin));
    return r;
}

void require_same_size(const Trace& a, const Trace& b, const char* what)
{
    if (a.vehicles() != b.vehicles()) {
        throw MetricError(fmt::format("{}: traces have {} and {} vehicles", what, a.vehicles(), b.vehicles()));
    }
}

VehicleMetric platoon_minimum(std::vector<double> per_vehicle)
{
    VehicleMetric m;
    m.value = std::numeric_limits<double>::infinity();
    for (std::size_t i = 1; i < per_vehicle.size(); ++i) {
        if (per_vehicle[i] < m.value) {
            m.value = per_vehicle[i];
            m.vehicle = static_cast<int>(i);
        }
    }
    m.per_vehicle = std::move(per_vehicle);
    return m;
}

/// max |a_i| over the window, skipping samples below `speed_floor`.
Eigen::VectorXd peak_accel(const Trace& trace, const Window& w, double speed_floor)
{
    const Rows r = rows_in(trace, w);
    const auto a = trace.accel.middleRows(r.first, r.count).cwiseAbs();
    if (speed_floor <= 0.0) {
        return r.count > 0 ? Eigen::VectorXd(a.colwise().maxCoeff().transpose())
                           : Eigen::VectorXd::Zero(trace.vehicles());
    }
    const auto moving = (trace.speed.middleRows(r.first, r.count).array() >= speed_floor).cast<double>();
    const Eigen::MatrixXd masked = (a.array() * moving).matrix();
    return r.count > 0 ? Eigen::VectorXd(masked.colwise().maxCoeff().transpose())
                       : Eigen::VectorXd::Zero(trace.vehicles());
}

Eigen::VectorXd min_gap(const Trace& trace, const Window& w)
{
    const Rows r = rows_in(trace, w);
    if (r.count == 0) {
        throw MetricError("min_gap: empty analysis window");
    }
    return trace.gap.middleRows(r.first, r.count).colwise().minCoeff().transpose();
}

double speed_floor_of(const AnalysisRule& rule)
{
    return rule.kind == AnalysisRule::Kind::Braking ? rule.stop_speed : 0.0;
}

}  // namespace

AnalysisRule AnalysisRule::fixed(double t0, double t1)
{
    AnalysisRule r;
    r.kind = Kind::Fixed;
    r.t0 = t0;
    r.t1 = t1;
    return r;
}

AnalysisRule AnalysisRule::braking()
{
    AnalysisRule r;
    r.kind = Kind::Braking;
    return r;
}

Window braking_window(const Trace& trace, double emergency_threshold, double stop_speed)
{
    const Eigen::Index n = trace.ticks();
    Eigen::Index onset = -1;
    for (Eigen::Index k = 0; k < n; ++k) {
        if (trace.ctrl(k, 0) <= emergency_threshold) {
            onset = k;
            break;
        }
    }
    if (onset < 0) {
        throw MetricError("braking_window: no braking onset found in trace");
    }
    Window w;
    w.t0 = trace.time[static_cast<std::size_t>(onset)];
    for (Eigen::Index k = onset; k < n; ++k) {
        if ((trace.speed.row(k).array() < stop_speed).all()) {
            w.t1 = trace.time[static_cast<std::size_t>(k)];
            return w;
        }
    }
    w.t1 = trace.time.back();
    w.truncated = true;
    return w;
}

Window resolve_window(const Trace& trace, const AnalysisRule& rule)
{
    if (rule.kind == AnalysisRule::Kind::Braking) {
        return braking_window(trace, rule.emergency_threshold, rule.stop_speed);
    }
    if (trace.time.empty() || rule.t0 < trace.time.front() - kTimeTol || rule.t1 > trace.time.back() + kTimeTol
        || rule.t1 < rule.t0) {
        throw MetricError(fmt::format("analysis window [{}, {}] outside trace bounds", rule.t0, rule.t1));
    }
    return Window{rule.t0, rule.t1, false};
}

VehicleMetric delta_a(const Trace& trace_c, const Trace& trace_acc, const AnalysisRule& rule)
{
    require_same_size(trace_c, trace_acc, "delta_a");
    const double floor = speed_floor_of(rule);
    const Eigen::VectorXd peak_c = peak_accel(trace_c, resolve_window(trace_c, rule), floor);
    const Eigen::VectorXd peak_a = peak_accel(trace_acc, resolve_window(trace_acc, rule), floor);

    std::vector<double> per(static_cast<std::size_t>(trace_c.vehicles()), kNaN);
    for (Eigen::Index i = 1; i < trace_c.vehicles(); ++i) {
        per[static_cast<std::size_t>(i)] = peak_a(i) - peak_c(i);
    }
    return platoon_minimum(std::move(per));
}

VehicleMetric delta_d(const Trace& trace_c, const std::map<char, const Trace*>& homogeneous, const AnalysisRule& rule)
{
    const Eigen::VectorXd gaps_c = min_gap(trace_c, resolve_window(trace_c, rule));
    std::map<char, Eigen::VectorXd> baseline;

    std::vector<double> per(static_cast<std::size_t>(trace_c.vehicles()), kNaN);
    for (Eigen::Index i = 1; i < trace_c.vehicles(); ++i) {
        const char label = trace_c.labels[static_cast<std::size_t>(i)];
        auto it = baseline.find(label);
        if (it == baseline.end()) {
            const auto h = homogeneous.find(label);
            if (h == homogeneous.end() || h->second == nullptr) {
                throw MetricError(fmt::format("delta_d: missing homogeneous baseline for controller '{}'", label));
            }
            require_same_size(trace_c, *h->second, "delta_d");
            it = baseline.emplace(label, min_gap(*h->second, resolve_window(*h->second, rule))).first;
        }
        per[static_cast<std::size_t>(i)] = gaps_c(i) - it->second(i);
    }
    return platoon_minimum(std::move(per));
}

double max_occupancy(const Trace& trace, const Window& window)
{
    const Rows r = rows_in(trace, window);
    if (r.count == 0 || trace.vehicles() < 2) {
        throw MetricError("max_occupancy: empty window");
    }
    const Eigen::VectorXd sums = trace.gap.block(r.first, 1, r.count, trace.vehicles() - 1).rowwise().sum();
    return sums.maxCoeff();
}

double eta(const Trace& trace_c, const Trace& trace_acc, const AnalysisRule& rule)
{
    require_same_size(trace_c, trace_acc, "eta");
    const double occ_c = max_occupancy(trace_c, resolve_window(trace_c, rule));
    const double occ_a = max_occupancy(trace_acc, resolve_window(trace_acc, rule));
    if (!(occ_c > 0.0) || !(occ_a > 0.0)) {
        throw MetricError(fmt::format("eta: degenerate occupancy ({} vs {})", occ_a, occ_c));
    }
    return occ_a / occ_c;
}

// ---------------------------------------------------------------------------

ThroughputSeries throughput_series(const std::vector<CounterEvent>& events, double window_s, double t_start,
                                   double t_end)
{
    if (!(window_s > 0.0)) {
        throw MetricError("throughput_series: window must be positive");
    }
    const auto windows = static_cast<std::size_t>(std::max(0.0, std::ceil((t_end - t_start) / window_s - 1e-9)));
    ThroughputSeries out;
    std::array<std::vector<long>, 4> counts;
    for (auto& c : counts) {
        c.assign(windows, 0);
    }
    for (const auto& e : events) {
        if (e.t < t_start || e.t >= t_end) {
            continue;
        }
        const auto dev = std::find(kDevices.begin(), kDevices.end(), e.device) - kDevices.begin();
        if (dev >= 4) {
            continue;
        }
        const auto w = std::min(windows - 1, static_cast<std::size_t>((e.t - t_start) / window_s));
        ++counts[static_cast<std::size_t>(dev)][w];
        ++out.raw_counts[static_cast<std::size_t>(dev)];
    }
    const double scale = 3600.0 / window_s;
    out.overall.assign(windows, 0.0);
    for (std::size_t d = 0; d < 4; ++d) {
        out.per_device[d].resize(windows);
        for (std::size_t w = 0; w < windows; ++w) {
            out.per_device[d][w] = static_cast<double>(counts[d][w]) * scale;
            out.overall[w] += out.per_device[d][w] / 4.0;
        }
    }
    if (windows > 0) {
        out.mean = std::accumulate(out.overall.begin(), out.overall.end(), 0.0) / static_cast<double>(windows);
    }
    return out;
}

double volatility(const std::vector<double>& speeds)
{
    if (speeds.size() < 2) {
        throw MetricError("volatility: need at least 2 samples");
    }
    const Eigen::Map<const Eigen::ArrayXd> s(speeds.data(), static_cast<Eigen::Index>(speeds.size()));
    const double mean = s.mean();
    if (mean == 0.0) {
        throw MetricError("volatility: zero-mean series");
    }
    const double var = (s - mean).square().sum() / static_cast<double>(speeds.size() - 1);
    return std::sqrt(var) / std::abs(mean);
}

std::vector<double> volatility_all(const std::vector<std::vector<double>>& series, std::size_t* skipped)
{
    std::vector<double> out;
    out.reserve(series.size());
    std::size_t bad = 0;
    for (const auto& s : series) {
        try {
            out.push_back(volatility(s));
        } catch (const MetricError&) {
            ++bad;
        }
    }
    if (skipped != nullptr) {
        *skipped = bad;
    }
    return out;
}

namespace {

double quantile_sorted(const std::vector<double>& v, double q)
{
    const double pos = q * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

}  // namespace

BoxStats box_stats(std::vector<double> values)
{
    BoxStats b;
    b.count = values.size();
    if (values.empty()) {
        return b;
    }
    std::sort(values.begin(), values.end());
    b.q1 = quantile_sorted(values, 0.25);
    b.median = quantile_sorted(values, 0.5);
    b.q3 = quantile_sorted(values, 0.75);
    const double iqr = b.q3 - b.q1;
    const double lo_fence = b.q1 - 1.5 * iqr;
    const double hi_fence = b.q3 + 1.5 * iqr;
    b.whisker_low = b.q1;
    b.whisker_high = b.q3;
    for (double v : values) {
        if (v < lo_fence || v > hi_fence) {
            b.outliers.push_back(v);
        } else {
            b.whisker_low = std::min(b.whisker_low, v);
            b.whisker_high = std::max(b.whisker_high, v);
        }
    }
    return b;
}

}  // namespace mixplat
