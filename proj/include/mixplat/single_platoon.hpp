#pragma once

#include <string_view>

#include "mixplat/controllers.hpp"
#include "mixplat/dynamics.hpp"
#include "mixplat/topology.hpp"
#include "mixplat/trace.hpp"

namespace mixplat {

/// Parameter sets of every control law plus the control-loop timing.
struct ControllerSet {
    AccParams acc;
    PloegParams ploeg;
    PathParams path;
    GsblParams gsbl;
    IdmParams idm;
    double cruise_kp = 1.0;
    double control_period = 0.01;  ///< controller evaluation tick [s]
    double beacon_period = 0.1;   ///< V2X broadcast tick [s]
    double radar_range = 250.0;
    double follower_set_speed = 40.0;  ///< cruise cap for ACC followers in a single platoon
};

/// Gap a vehicle running `label` holds in equilibrium at `speed`.
double equilibrium_gap(char label, double speed, const ControllerSet& ctrl);

enum class ScenarioKind { Sinusoidal, Braking };

std::string_view scenario_name(ScenarioKind kind);
ScenarioKind parse_scenario(std::string_view name);

struct SingleScenario {
    ScenarioKind kind = ScenarioKind::Sinusoidal;
    PlatoonConfig cfg;
    double duration = 70.0;
    double warmup = 20.0;
    double base_speed = 100.0 / 3.6;
    double amplitude = 10.0 / 3.6;
    double frequency = 0.1;
    double brake_decel = 8.0;
    double brake_onset = 30.0;
    /// false: every follower references vehicle 0 instead of its egoLeader.
    bool elect_leaders = true;

    void validate() const;
};

SingleScenario default_scenario(ScenarioKind kind, PlatoonConfig cfg);

/// Target speed of the independent head at time t.
double leader_profile(const SingleScenario& s, double t);
/// Time derivative of leader_profile, used as feed-forward.
double leader_profile_accel(const SingleScenario& s, double t);

/// Runs one platoon from a warm start at equilibrium gaps. A collision
/// truncates the trace at the offending tick.
Trace run_single_platoon(const SingleScenario& s, const DynamicsParams& dyn, const ControllerSet& ctrl);

}  // namespace mixplat
