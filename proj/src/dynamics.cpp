#include "mixplat/dynamics.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

namespace mixplat {

void DynamicsParams::validate() const
{
    if (!(tau > 0.0) || !(dt > 0.0)) {
        throw InvalidInput(fmt::format("dynamics: tau ({}) and dt ({}) must be positive", tau, dt));
    }
    if (!(u_min < 0.0 && u_max > 0.0)) {
        throw InvalidInput(fmt::format("dynamics: need u_min < 0 < u_max, got [{}, {}]", u_min, u_max));
    }
    if (!(emergency_u_min <= u_min)) {
        throw InvalidInput(fmt::format("dynamics: emergency_u_min ({}) must not exceed u_min ({})",
                                       emergency_u_min, u_min));
    }
}

double clamp_input(double u_cmd, const DynamicsParams& params, bool emergency)
{
    const double lo = emergency ? params.emergency_u_min : params.u_min;
    return std::clamp(u_cmd, lo, params.u_max);
}

VehicleState step_vehicle(const VehicleState& state, double u_cmd, const DynamicsParams& params,
                          bool emergency)
{
    if (!std::isfinite(u_cmd)) {
        throw InvalidInput(fmt::format("step_vehicle: non-finite control input {}", u_cmd));
    }
    if (!std::isfinite(state.position) || !std::isfinite(state.speed) || !std::isfinite(state.accel)) {
        throw InvalidInput("step_vehicle: non-finite vehicle state");
    }

    VehicleState next = state;
    const double u = clamp_input(u_cmd, params, emergency);
    next.ctrl_input = u;
    next.accel = state.accel + (params.dt / params.tau) * (u - state.accel);
    next.speed = state.speed + next.accel * params.dt;
    if (next.speed <= 0.0) {
        next.speed = 0.0;
        // at rest: no phantom deceleration, and the lag state restarts from zero
        if (next.accel < 0.0) {
            next.accel = 0.0;
        }
    }
    next.position = state.position + next.speed * params.dt;
    return next;
}

}  // namespace mixplat
