#include "mixplat/trace.hpp"

#include <cmath>
#include <ostream>
#include <sstream>

#include <fmt/format.h>
#include <fmt/ostream.h>

namespace mixplat {

void Trace::reserve(Eigen::Index ticks)
{
    const Eigen::Index n = vehicles();
    time.reserve(static_cast<std::size_t>(ticks));
    position.resize(ticks, n);
    speed.resize(ticks, n);
    accel.resize(ticks, n);
    ctrl.resize(ticks, n);
    gap.resize(ticks, n);
    lane.resize(ticks, n);
    mode.resize(ticks, n);
}

Eigen::Index Trace::push_tick(double t)
{
    const auto row = static_cast<Eigen::Index>(time.size());
    if (row >= position.rows()) {
        const Eigen::Index grow = std::max<Eigen::Index>(16, row);
        position.conservativeResize(row + grow, Eigen::NoChange);
        speed.conservativeResize(row + grow, Eigen::NoChange);
        accel.conservativeResize(row + grow, Eigen::NoChange);
        ctrl.conservativeResize(row + grow, Eigen::NoChange);
        gap.conservativeResize(row + grow, Eigen::NoChange);
        lane.conservativeResize(row + grow, Eigen::NoChange);
        mode.conservativeResize(row + grow, Eigen::NoChange);
    }
    time.push_back(t);
    return row;
}

void Trace::finalize()
{
    const Eigen::Index rows = ticks();
    position.conservativeResize(rows, Eigen::NoChange);
    speed.conservativeResize(rows, Eigen::NoChange);
    accel.conservativeResize(rows, Eigen::NoChange);
    ctrl.conservativeResize(rows, Eigen::NoChange);
    gap.conservativeResize(rows, Eigen::NoChange);
    lane.conservativeResize(rows, Eigen::NoChange);
    mode.conservativeResize(rows, Eigen::NoChange);
}

namespace {

void hash_line(std::ostream& os, const std::string& spec_hash)
{
    if (!spec_hash.empty()) {
        os << "# spec_hash=" << spec_hash << '\n';
    }
}

std::string fixed6(double v)
{
    if (std::isnan(v)) {
        return "nan";
    }
    // avoid "-0.000000"
    const std::string s = fmt::format("{:.6f}", v);
    return s == "-0.000000" ? "0.000000" : s;
}

}  // namespace

void write_trace_csv(std::ostream& os, const Trace& trace, const std::string& spec_hash)
{
    hash_line(os, spec_hash);
    os << "t,veh,lane,x,v,a,u,gap,ctrl,mode\n";
    for (Eigen::Index k = 0; k < trace.ticks(); ++k) {
        const std::string t = fixed6(trace.time[static_cast<std::size_t>(k)]);
        for (Eigen::Index i = 0; i < trace.vehicles(); ++i) {
            fmt::print(os, "{},{},{},{},{},{},{},{},{},{}\n", t, i, trace.lane(k, i), fixed6(trace.position(k, i)),
                       fixed6(trace.speed(k, i)), fixed6(trace.accel(k, i)), fixed6(trace.ctrl(k, i)),
                       fixed6(trace.gap(k, i)), trace.labels[static_cast<std::size_t>(i)], trace.mode(k, i));
        }
    }
}

void write_events_csv(std::ostream& os, const std::vector<TraceEvent>& events, const std::string& spec_hash)
{
    hash_line(os, spec_hash);
    os << "t,kind,veh_a,veh_b,detail\n";
    for (const auto& e : events) {
        fmt::print(os, "{},{},{},{},{}\n", fixed6(e.t), e.kind, e.veh_a, e.veh_b, e.detail);
    }
}

void write_counters_csv(std::ostream& os, const std::vector<CounterEvent>& events, const std::string& spec_hash)
{
    hash_line(os, spec_hash);
    os << "t,device,veh,lane\n";
    for (const auto& e : events) {
        fmt::print(os, "{},{},{},{}\n", fixed6(e.t), e.device, e.vehicle, e.lane);
    }
}

std::string serialize_trace(const Trace& trace)
{
    std::ostringstream os;
    write_trace_csv(os, trace);
    write_events_csv(os, trace.events);
    return os.str();
}

}  // namespace mixplat
