#include "mixplat/controllers.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

namespace mixplat {

Beacon make_beacon(int vehicle_id, const VehicleState& state, double timestamp)
{
    return Beacon{vehicle_id, state.position, state.speed, state.accel, state.ctrl_input, state.length, timestamp};
}

bool is_fresh(const Beacon& beacon, double now, double max_age)
{
    return beacon.vehicle_id >= 0 && now - beacon.timestamp <= max_age + 1e-9;
}

double bumper_gap(const VehicleState& ego, double pred_position, double pred_length)
{
    return pred_position - pred_length - ego.position;
}

double bumper_gap(const VehicleState& ego, const VehicleState& pred)
{
    return bumper_gap(ego, pred.position, pred.length);
}

double bumper_gap(const VehicleState& ego, const Beacon& pred)
{
    return bumper_gap(ego, pred.position, pred.length);
}

namespace {

VehicleState extrapolate(const Beacon& b, double now)
{
    VehicleState s;
    s.position = b.position + b.speed * std::max(0.0, now - b.timestamp);
    s.speed = b.speed;
    s.accel = b.accel;
    s.ctrl_input = b.ctrl_input;
    s.length = b.length;
    return s;
}

}  // namespace

// ---------------------------------------------------------------------------

double acc_control(const VehicleState& ego, const VehicleState& pred, const AccParams& p)
{
    // x_i - x_{i-1} + l_{i-1} is minus the bumper gap
    const double spacing_error = -bumper_gap(ego, pred) + p.standstill + p.H * ego.speed;
    const double speed_error = ego.speed - pred.speed;
    return -(speed_error + p.lambda * spacing_error) / p.H;
}

double cruise_control(const VehicleState& ego, double set_speed, double kp)
{
    return -kp * (ego.speed - set_speed);
}

ControlOutput acc_with_cruise(const VehicleState& ego, const std::optional<VehicleState>& pred,
                              const AccParams& p, double set_speed, double radar_range)
{
    const double cc = cruise_control(ego, set_speed);
    if (!pred) {
        return {cc, true};
    }
    if (bumper_gap(ego, *pred) > radar_range) {
        return {cc, false};
    }
    return {std::min(cc, acc_control(ego, *pred, p)), false};
}

// ---------------------------------------------------------------------------

double ploeg_input_rate(const VehicleState& ego, const Beacon& pred, const PloegParams& p, double u_self)
{
    const double spacing = bumper_gap(ego, pred) - p.standstill - p.H * ego.speed;
    const double speed = pred.speed - ego.speed - p.H * ego.accel;
    return (-u_self + p.kp * spacing + p.kd * speed + pred.ctrl_input) / p.H;
}

ControlOutput ploeg_control(const VehicleState& ego, const Beacon& pred, const PloegParams& p,
                            PloegState& state, double dt, double now)
{
    if (!state.engaged) {
        state.u = ego.accel;
        state.engaged = true;
    }
    if (!is_fresh(pred, now)) {
        return {state.u, true};
    }
    state.u += dt * ploeg_input_rate(ego, pred, p, state.u);
    return {state.u, false};
}

// ---------------------------------------------------------------------------

PathGains path_gains(double C1, double xi, double omega_n)
{
    if (!(xi >= 1.0)) {
        throw InvalidInput(fmt::format("path_gains: damping xi = {} < 1 gives complex gains", xi));
    }
    const double root = xi + std::sqrt(xi * xi - 1.0);
    PathGains g;
    g.alpha1 = 1.0 - C1;
    g.alpha2 = C1;
    g.alpha3 = -(2.0 * xi - C1 * root) * omega_n;
    g.alpha4 = -C1 * root * omega_n;
    g.alpha5 = -omega_n * omega_n;
    return g;
}

ControlOutput path_control(const VehicleState& ego, const Beacon& pred, const Beacon& leader,
                           const PathParams& p, double now, double previous_u)
{
    if (!is_fresh(pred, now) || !is_fresh(leader, now)) {
        return {previous_u, true};
    }
    const PathGains g = p.gains();
    const double spacing = -bumper_gap(ego, pred) + p.dd;
    const double u = g.alpha1 * pred.ctrl_input + g.alpha2 * leader.ctrl_input
                   + g.alpha3 * (ego.speed - pred.speed) + g.alpha4 * (ego.speed - leader.speed)
                   + g.alpha5 * spacing;
    return {u, false};
}

// ---------------------------------------------------------------------------

GsblState gsbl_initial_state(const GsblParams& p, double v_ref)
{
    return GsblState{GsblMode::Cruise, v_ref, p.r_default};
}

GsblState gsbl_mode_update(const GsblParams& p, const GsblState& current, double leader_speed,
                           double leader_input, const VehicleState& ego, const VehicleState& pred)
{
    GsblState next = current;
    if (leader_input >= 0.0) {
        next.mode = GsblMode::Cruise;
    } else {
        const bool strong_braking = leader_input <= p.delta_a;
        const bool closing_in = bumper_gap(ego, pred) <= p.close_gap && ego.speed - pred.speed > p.close_speed;
        if (strong_braking || closing_in) {
            next.mode = GsblMode::Override;
        }
    }

    if (next.mode == GsblMode::Override) {
        const double a_des = leader_input;
        const double v_des = leader_speed + leader_input * p.delta_t;
        next.v_r = v_des;
        const double diff = ego.speed - v_des;
        next.r = std::abs(diff) < p.singular_band ? p.r_max
                                                  : std::clamp(std::abs(a_des / diff), p.r_min, p.r_max);
    } else {
        next.v_r = leader_speed;
        next.r = p.r_default;
    }
    return next;
}

GsblState gsbl_mode_update(const GsblParams& p, const GsblState& current, const Beacon& ego_leader,
                           const VehicleState& ego, const VehicleState& pred)
{
    return gsbl_mode_update(p, current, ego_leader.speed, ego_leader.ctrl_input, ego, pred);
}

ControlOutput gsbl_control(const VehicleState& ego, const Beacon& pred, const Beacon* succ,
                           const GsblParams& p, const GsblState& state, double now,
                           const AccParams& fallback)
{
    if (!is_fresh(pred, now)) {
        if (pred.vehicle_id < 0) {
            return {-state.r * (ego.speed - state.v_r), true};
        }
        return {acc_control(ego, extrapolate(pred, now), fallback), true};
    }

    double u = p.k * (bumper_gap(ego, pred) - p.d) - p.h * (ego.speed - pred.speed)
             - state.r * (ego.speed - state.v_r);
    bool degraded = false;
    if (succ != nullptr) {
        if (is_fresh(*succ, now)) {
            VehicleState behind = extrapolate(*succ, succ->timestamp);
            u += -p.k * (bumper_gap(behind, ego) - p.d) - p.h * (ego.speed - succ->speed);
        } else {
            degraded = true;
        }
    }
    return {u, degraded};
}

double gsbl_head_control(const VehicleState& ego, const Beacon* succ, const GsblParams& p,
                         const GsblState& state)
{
    double u = -state.r * (ego.speed - state.v_r);
    if (succ != nullptr) {
        VehicleState behind = extrapolate(*succ, succ->timestamp);
        u += -p.k * (bumper_gap(behind, ego) - p.d) - p.h * (ego.speed - succ->speed);
    }
    return u;
}

// ---------------------------------------------------------------------------

double idm_control(const VehicleState& ego, const std::optional<VehicleState>& pred, const IdmParams& p)
{
    const double free_term = 1.0 - std::pow(ego.speed / p.v0, p.delta);
    if (!pred) {
        return p.a_max * free_term;
    }
    const double gap = std::max(bumper_gap(ego, *pred), 0.01);
    const double dv = ego.speed - pred->speed;
    const double s_star = p.s0 + std::max(0.0, ego.speed * p.T + ego.speed * dv / (2.0 * std::sqrt(p.a_max * p.b_comf)));
    return p.a_max * (free_term - (s_star / gap) * (s_star / gap));
}

}  // namespace mixplat
