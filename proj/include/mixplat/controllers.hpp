#pragma once

#include <array>
#include <optional>

#include "mixplat/dynamics.hpp"

namespace mixplat {

/// Information a vehicle broadcasts every beacon period.
struct Beacon {
    int vehicle_id = -1;
    double position = 0.0;
    double speed = 0.0;
    double accel = 0.0;
    double ctrl_input = 0.0;
    double length = 4.0;
    double timestamp = 0.0;
};

Beacon make_beacon(int vehicle_id, const VehicleState& state, double timestamp);

/// Beacons older than this are treated as lost.
inline constexpr double kBeaconStaleness = 0.25;

bool is_fresh(const Beacon& beacon, double now, double max_age = kBeaconStaleness);

/// Result of one control evaluation. `degraded` marks a fallback path
/// (stale beacon, missing neighbour) so the trace can flag it.
struct ControlOutput {
    double u = 0.0;
    bool degraded = false;
};

/// Bumper-to-bumper distance from `ego` to the vehicle ahead of it.
double bumper_gap(const VehicleState& ego, double pred_position, double pred_length);
double bumper_gap(const VehicleState& ego, const VehicleState& pred);
double bumper_gap(const VehicleState& ego, const Beacon& pred);

// ---------------------------------------------------------------------------
// ACC (constant time headway, radar only)

struct AccParams {
    double H = 1.2;
    double lambda = 0.1;
    double standstill = 2.0;  ///< gap held at zero speed [m]
};

double acc_control(const VehicleState& ego, const VehicleState& pred, const AccParams& p);

/// Proportional speed tracking used when nothing is ahead.
double cruise_control(const VehicleState& ego, double set_speed, double kp = 1.0);

/// ACC with cruise fallback: min(cruise, acc) when a predecessor is within
/// radar range, pure cruise otherwise (flagged as degraded only when the
/// predecessor is missing altogether).
ControlOutput acc_with_cruise(const VehicleState& ego, const std::optional<VehicleState>& pred,
                              const AccParams& p, double set_speed, double radar_range = 250.0);

// ---------------------------------------------------------------------------
// Ploeg

struct PloegParams {
    double H = 0.5;
    double kp = 0.2;
    double kd = 0.7;
    double standstill = 2.0;  ///< gap held at zero speed [m]
};

/// Integrated controller state; `engaged` is false until the first tick.
struct PloegState {
    double u = 0.0;
    bool engaged = false;
};

/// Integrates the Ploeg input derivative over `dt` using the ego's measured
/// acceleration and the predecessor's broadcast control input. A stale
/// beacon holds the previous output.
ControlOutput ploeg_control(const VehicleState& ego, const Beacon& pred, const PloegParams& p,
                            PloegState& state, double dt, double now);

/// Input derivative of the Ploeg law, exposed for testing.
double ploeg_input_rate(const VehicleState& ego, const Beacon& pred, const PloegParams& p, double u_self);

// ---------------------------------------------------------------------------
// PATH

struct PathGains {
    double alpha1 = 0.0;
    double alpha2 = 0.0;
    double alpha3 = 0.0;
    double alpha4 = 0.0;
    double alpha5 = 0.0;
};

/// Closed-form PATH gains. Throws InvalidInput for xi < 1.
PathGains path_gains(double C1, double xi, double omega_n);

struct PathParams {
    double C1 = 0.5;
    double xi = 1.0;
    double omega_n = 0.2;
    double dd = 5.0;

    PathGains gains() const { return path_gains(C1, xi, omega_n); }
};

/// PATH law. `leader` is the egoLeader beacon (or a virtual one for the
/// external reference). Stale beacons hold `previous_u`.
ControlOutput path_control(const VehicleState& ego, const Beacon& pred, const Beacon& leader,
                           const PathParams& p, double now, double previous_u = 0.0);

// ---------------------------------------------------------------------------
// GSBL

enum class GsblMode { Cruise, Override };

struct GsblParams {
    double k = 0.7;
    double h = 0.71;
    double r_default = 0.70710678118654752;
    double r_min = 0.70710678118654752;
    double r_max = 8.0;
    double d = 5.0;
    double delta_a = -2.0;
    double delta_t = 1.0;
    double close_gap = 4.0;       ///< gap that arms the closing-in trigger [m]
    double close_speed = 0.1;     ///< closing speed for the same trigger [m/s]
    double singular_band = 0.01;  ///< |v_i - v_des| below which r = r_max
};

/// Mutable per-vehicle part: mode, reference speed and current gain r.
struct GsblState {
    GsblMode mode = GsblMode::Cruise;
    double v_r = 0.0;
    double r = 0.70710678118654752;
};

GsblState gsbl_initial_state(const GsblParams& p, double v_ref);

/// Override/cruise logic run on every egoLeader beacon. Pure.
GsblState gsbl_mode_update(const GsblParams& p, const GsblState& current, double leader_speed,
                           double leader_input, const VehicleState& ego, const VehicleState& pred);

GsblState gsbl_mode_update(const GsblParams& p, const GsblState& current, const Beacon& ego_leader,
                           const VehicleState& ego, const VehicleState& pred);

/// Spring-damper follower law: two-sided when `succ` is present, one-sided
/// otherwise. Falls back to radar-only ACC when the predecessor beacon is
/// stale.
ControlOutput gsbl_control(const VehicleState& ego, const Beacon& pred, const Beacon* succ,
                           const GsblParams& p, const GsblState& state, double now,
                           const AccParams& fallback = {});

/// Front-vehicle law tracking an external reference speed, coupled to its
/// successor when one exists.
double gsbl_head_control(const VehicleState& ego, const Beacon* succ, const GsblParams& p,
                         const GsblState& state);

// ---------------------------------------------------------------------------
// IDM (human driver stand-in)

struct IdmParams {
    double v0 = 33.33;
    double T = 1.0;
    double a_max = 2.6;
    double b_comf = 4.5;
    double s0 = 2.5;
    double delta = 4.0;
};

double idm_control(const VehicleState& ego, const std::optional<VehicleState>& pred, const IdmParams& p);

}  // namespace mixplat
