#pragma once

#include <array>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "mixplat/topology.hpp"
#include "mixplat/trace.hpp"

namespace mixplat {

class MetricError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct Window {
    double t0 = 0.0;
    double t1 = 0.0;
    bool truncated = false;  ///< braking never reached the stop speed
};

/// How the analysis window of a trace is found. Fixed windows apply as-is;
/// braking windows are located in each trace separately.
struct AnalysisRule {
    enum class Kind { Fixed, Braking };
    Kind kind = Kind::Fixed;
    double t0 = 0.0;
    double t1 = 0.0;
    double emergency_threshold = -4.0;  ///< head input at or below which braking has started
    double stop_speed = 5.0 / 3.6;

    static AnalysisRule fixed(double t0, double t1);
    static AnalysisRule braking();
};

/// [first tick with head input <= threshold, first tick where every vehicle
/// is below the stop speed]. Throws MetricError when no onset exists.
Window braking_window(const Trace& trace, double emergency_threshold = -4.0, double stop_speed = 5.0 / 3.6);

Window resolve_window(const Trace& trace, const AnalysisRule& rule);

/// Per-follower values (index 0, the head, is NaN) and the platoon minimum
/// with the vehicle producing it (lowest index on ties).
struct VehicleMetric {
    std::vector<double> per_vehicle;
    double value = 0.0;
    int vehicle = 1;
};

VehicleMetric delta_a(const Trace& trace_c, const Trace& trace_acc, const AnalysisRule& rule);

/// Each follower is compared against its own gap in the homogeneous run of
/// its controller, looked up by label in `homogeneous`.
VehicleMetric delta_d(const Trace& trace_c, const std::map<char, const Trace*>& homogeneous, const AnalysisRule& rule);

/// Maximum over the window of the summed follower gaps.
double max_occupancy(const Trace& trace, const Window& window);

double eta(const Trace& trace_c, const Trace& trace_acc, const AnalysisRule& rule);

struct MetricReport {
    std::string config;
    std::string scenario;
    VehicleMetric comfort;  ///< delta_a
    VehicleMetric safety;   ///< delta_d
    double eta = 1.0;
    Window window;
};

// ---------------------------------------------------------------------------
// Ring-road metrics

struct ThroughputSeries {
    std::array<std::vector<double>, 4> per_device;  ///< veh/h per window, N E S W
    std::vector<double> overall;                    ///< mean of the four devices per window
    double mean = 0.0;                              ///< mean of `overall`
    std::array<long, 4> raw_counts{};
};

/// Counts per window of `window_s` seconds over [t_start, t_end), scaled to veh/h.
ThroughputSeries throughput_series(const std::vector<CounterEvent>& events, double window_s, double t_start,
                                   double t_end);

/// Coefficient of variation with the sample (n-1) standard deviation.
/// Throws MetricError for fewer than 2 samples or a zero mean.
double volatility(const std::vector<double>& speeds);

struct BoxStats {
    std::size_t count = 0;
    double q1 = 0.0;
    double median = 0.0;
    double q3 = 0.0;
    double whisker_low = 0.0;
    double whisker_high = 0.0;
    std::vector<double> outliers;
};

/// Quartiles by linear interpolation, whiskers at the last sample within
/// 1.5 IQR of the box.
BoxStats box_stats(std::vector<double> values);

/// Volatility of every vehicle whose series is defined; undefined series are
/// counted in `skipped`.
std::vector<double> volatility_all(const std::vector<std::vector<double>>& series, std::size_t* skipped = nullptr);

}  // namespace mixplat
