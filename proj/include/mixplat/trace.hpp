#pragma once

#include <array>
#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace mixplat {

struct TraceEvent {
    double t = 0.0;
    std::string kind;  ///< collision, mode_switch, lane_change, degraded
    int veh_a = -1;
    int veh_b = -1;
    std::string detail;
};

/// Counting devices in road order.
inline constexpr std::array<char, 4> kDevices{'N', 'E', 'S', 'W'};

/// Counting-device passage.
struct CounterEvent {
    char device = 'N';
    double t = 0.0;
    int vehicle = -1;
    int lane = 0;
};

/// Time-indexed per-vehicle record of a run. Matrices are ticks x vehicles;
/// `gap` is the bumper gap to the predecessor (NaN when there is none) and
/// `mode` is 1 for a GSBL vehicle in override, 0 otherwise.
struct Trace {
    std::vector<double> time;
    Eigen::MatrixXd position;
    Eigen::MatrixXd speed;
    Eigen::MatrixXd accel;
    Eigen::MatrixXd ctrl;
    Eigen::MatrixXd gap;
    Eigen::MatrixXi lane;
    Eigen::MatrixXi mode;
    std::vector<char> labels;  ///< controller label per vehicle
    std::vector<TraceEvent> events;
    bool terminated_by_collision = false;

    Eigen::Index ticks() const { return static_cast<Eigen::Index>(time.size()); }
    Eigen::Index vehicles() const { return static_cast<Eigen::Index>(labels.size()); }

    /// Preallocate `ticks` rows for `labels.size()` vehicles.
    void reserve(Eigen::Index ticks);
    /// Append row `time.size()` at time `t`; caller fills the matrix rows.
    Eigen::Index push_tick(double t);
    /// Trim matrices to the recorded ticks.
    void finalize();
};

/// `t,veh,lane,x,v,a,u,gap,ctrl,mode`, fixed 6 decimals.
void write_trace_csv(std::ostream& os, const Trace& trace, const std::string& spec_hash = {});
/// `t,kind,veh_a,veh_b,detail`.
void write_events_csv(std::ostream& os, const std::vector<TraceEvent>& events, const std::string& spec_hash = {});
/// `t,device,veh,lane`.
void write_counters_csv(std::ostream& os, const std::vector<CounterEvent>& events, const std::string& spec_hash = {});

std::string serialize_trace(const Trace& trace);

}  // namespace mixplat
