#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string_view>
#include <vector>

#include "mixplat/controllers.hpp"
#include "mixplat/dynamics.hpp"
#include "mixplat/single_platoon.hpp"
#include "mixplat/trace.hpp"

namespace mixplat {

enum class PlatoonPolicy { AllP, AllL, AllG, RandomMix };
enum class BaselinePolicy { Acc, Idm };

std::string_view policy_name(PlatoonPolicy p);
PlatoonPolicy parse_policy(std::string_view name);
std::string_view baseline_name(BaselinePolicy b);
BaselinePolicy parse_baseline(std::string_view name);

/// Thresholds of the single-vehicle lane-change rule.
struct LaneChangeParams {
    double overtake_ratio = 0.9;  ///< overtake when held below this fraction of the desired speed
    double cooldown = 5.0;        ///< [s] between two changes of the same vehicle
    double lookahead = 150.0;     ///< [m] range in which a vehicle ahead counts as blocking
    double incentive = 1.0;       ///< [m/s] target lane must be at least this much faster
    double s_min = 2.5;           ///< safety gap terms: s_min + T v + dv^2 / (2 b)
    double T = 1.0;
    double b = 4.5;
    double period = 0.5;          ///< [s] between decision rounds
};

struct RingSpec {
    double circumference = 10000.0;
    int lanes = 3;
    double density = 10.0;  ///< vehicles per km over the whole road
    int platoon_size = 4;
    double penetration = 0.0;
    PlatoonPolicy policy = PlatoonPolicy::AllP;
    BaselinePolicy baseline = BaselinePolicy::Acc;
    std::vector<double> speed_classes_kmh{100.0, 115.0, 130.0};
    double jitter_kmh = 5.0;
    std::array<double, 4> counter_positions{0.0, 2500.0, 5000.0, 7500.0};
    double duration = 600.0;  ///< measured part, after the warm-up
    double warmup = 120.0;
    std::uint64_t seed = 1;
    double vehicle_length = 4.0;
    double sample_period = 0.5;  ///< speed sampling for volatility
    bool record_trace = false;   ///< keep a Trace at the sample period
    LaneChangeParams lane_change;

    /// Throws InvalidInput on out-of-range fields.
    void validate() const;
    long vehicle_count() const;
    long platoon_count() const;
};

/// Raised when the requested density does not fit the road.
class SpawnError : public std::runtime_error {
public:
    SpawnError(const std::string& what, double max_density)
        : std::runtime_error(what), max_feasible_density(max_density)
    {
    }
    double max_feasible_density;
};

struct RingVehicle {
    int id = 0;
    VehicleState state;   ///< position wrapped to [0, circumference)
    double odometer = 0.0;
    char label = 'A';     ///< '-' platoon head, P/L/G member, A or I single
    int platoon = -1;     ///< -1 for singles
    int member = 0;       ///< index inside the platoon
    double desired_speed = 0.0;
    int speed_class = 0;
    double last_lane_change = -1e9;
};

struct RingWorld {
    std::vector<RingVehicle> vehicles;
    std::vector<std::vector<int>> platoons;  ///< member ids, head first
    double circumference = 10000.0;
    int lanes = 3;
};

RingWorld spawn_ring_traffic(const RingSpec& spec, const ControllerSet& ctrl);

enum class LaneDecision { Stay, Left, Right };

/// A vehicle seen from the ego in some lane; gaps are bumper to bumper.
struct Neighbor {
    bool present = false;
    double gap = 0.0;
    double speed = 0.0;
    int platoon = -1;
    int member = 0;
};

struct LaneView {
    bool exists = false;
    Neighbor front;
    Neighbor rear;
};

/// What a single vehicle needs to decide on a lane change. Lane index 0 is
/// the rightmost lane.
struct Neighborhood {
    double speed = 0.0;
    double desired_speed = 0.0;
    double since_last_change = 1e9;
    Neighbor front;  ///< current lane
    LaneView left;
    LaneView right;
};

/// Keep-right first, then overtake left when held back; both need safe gaps
/// and must not split a platoon.
LaneDecision lane_change_decision(const Neighborhood& n, const LaneChangeParams& p);

/// Gap the rule demands towards `front` (ego behind) and `rear` (ego ahead).
bool lane_slot_safe(const LaneView& target, double ego_speed, const LaneChangeParams& p);

struct RingResult {
    Trace trace;  ///< per-sample rows when requested; events always
    std::vector<CounterEvent> counters;
    std::vector<std::vector<double>> speed_samples;  ///< per vehicle, post warm-up
    std::vector<char> labels;
    std::vector<int> platoon_of;
    bool terminated_by_collision = false;
    double end_time = 0.0;
    long lane_changes = 0;
    long vehicle_count = 0;
};

RingResult run_ring(const RingSpec& spec, const DynamicsParams& dyn, const ControllerSet& ctrl);

/// Same-lane overlaps (gap <= 0) between neighbours in ring order.
std::vector<TraceEvent> detect_collisions(const RingWorld& world, double t);

}  // namespace mixplat
