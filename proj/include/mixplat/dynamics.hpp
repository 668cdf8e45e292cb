#pragma once

#include <stdexcept>
#include <string>

namespace mixplat {

/// Raised when a simulation input violates its contract (non-finite values,
/// inconsistent parameters).
class InvalidInput : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Kinematic and actuation state of one vehicle at one instant.
///
/// `position` is the front bumper along the road (on a ring it is kept in
/// [0, circumference)). `accel` is the actual, post-lag acceleration and
/// `ctrl_input` the last commanded (clamped) input.
struct VehicleState {
    double position = 0.0;
    double speed = 0.0;
    double accel = 0.0;
    double ctrl_input = 0.0;
    double length = 4.0;
    int lane = 0;
};

struct DynamicsParams {
    double tau = 0.5;   ///< actuation lag time constant [s]
    double dt = 0.01;   ///< integration step [s]
    double u_min = -8.0;
    double u_max = 2.5;
    double emergency_u_min = -8.0;

    /// Throws InvalidInput unless tau > 0, dt > 0, u_min < 0 < u_max and
    /// emergency_u_min <= u_min.
    void validate() const;
};

/// Clamp a commanded acceleration to [u_min, u_max]; `emergency` widens the
/// lower bound to emergency_u_min.
double clamp_input(double u_cmd, const DynamicsParams& params, bool emergency = false);

/// One semi-implicit Euler step of the first-order lag model.
///
/// accel' = accel + dt/tau * (clamp(u) - accel); speed' = max(0, speed + accel' dt);
/// position' = position + speed' dt. A vehicle brought to rest reports zero
/// acceleration.
VehicleState step_vehicle(const VehicleState& state, double u_cmd, const DynamicsParams& params,
                          bool emergency = false);

}  // namespace mixplat
