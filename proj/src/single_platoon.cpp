#include "mixplat/single_platoon.hpp"

#include <climits>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>

#include <fmt/format.h>

namespace mixplat {

double equilibrium_gap(char label, double speed, const ControllerSet& ctrl)
{
    switch (label) {
    case '-':
    case 'A': return ctrl.acc.standstill + ctrl.acc.H * speed;
    case 'L': return ctrl.ploeg.standstill + ctrl.ploeg.H * speed;
    case 'P': return ctrl.path.dd;
    case 'G': return ctrl.gsbl.d;
    case 'I': return ctrl.idm.s0 + ctrl.idm.T * speed;
    default: throw InvalidInput(fmt::format("equilibrium_gap: unknown controller label '{}'", label));
    }
}

std::string_view scenario_name(ScenarioKind kind)
{
    return kind == ScenarioKind::Sinusoidal ? "sinusoidal" : "braking";
}

ScenarioKind parse_scenario(std::string_view name)
{
    if (name == "sinusoidal" || name == "S") {
        return ScenarioKind::Sinusoidal;
    }
    if (name == "braking" || name == "B") {
        return ScenarioKind::Braking;
    }
    throw InvalidInput(fmt::format("unknown scenario '{}' (expected sinusoidal or braking)", name));
}

void SingleScenario::validate() const
{
    if (cfg.size() < 2) {
        throw InvalidInput("single scenario: platoon needs at least 2 vehicles");
    }
    if (!(duration > warmup) || warmup < 0.0) {
        throw InvalidInput(fmt::format("single scenario: need 0 <= warmup ({}) < duration ({})", warmup, duration));
    }
    if (kind == ScenarioKind::Sinusoidal && !(frequency > 0.0)) {
        throw InvalidInput("single scenario: sinusoidal frequency must be positive");
    }
    if (kind == ScenarioKind::Braking && !(brake_decel > 0.0)) {
        throw InvalidInput("single scenario: brake deceleration must be positive");
    }
}

SingleScenario default_scenario(ScenarioKind kind, PlatoonConfig cfg)
{
    SingleScenario s;
    s.kind = kind;
    s.cfg = std::move(cfg);
    if (kind == ScenarioKind::Sinusoidal) {
        // 5 leader periods after a 20 s settle
        s.warmup = 20.0;
        s.duration = 70.0;
    } else {
        s.warmup = 30.0;
        s.brake_onset = 30.0;
        s.duration = 50.0;
    }
    return s;
}

double leader_profile(const SingleScenario& s, double t)
{
    if (s.kind == ScenarioKind::Sinusoidal) {
        return s.base_speed + s.amplitude * std::sin(2.0 * std::numbers::pi * s.frequency * t);
    }
    if (t < s.brake_onset) {
        return s.base_speed;
    }
    return std::max(0.0, s.base_speed - s.brake_decel * (t - s.brake_onset));
}

double leader_profile_accel(const SingleScenario& s, double t)
{
    if (s.kind == ScenarioKind::Sinusoidal) {
        const double w = 2.0 * std::numbers::pi * s.frequency;
        return s.amplitude * w * std::cos(w * t);
    }
    if (t < s.brake_onset || leader_profile(s, t) <= 0.0) {
        return 0.0;
    }
    return -s.brake_decel;
}

namespace {

constexpr int kExternalId = INT_MAX;

Beacon virtual_leader(const SingleScenario& s, double t)
{
    Beacon b;
    b.vehicle_id = kExternalId;
    b.speed = leader_profile(s, t);
    b.ctrl_input = leader_profile_accel(s, t);
    b.timestamp = t;
    return b;
}

long steps_per_period(double period, double dt, const char* what)
{
    const long k = std::lround(period / dt);
    if (k < 1 || std::abs(static_cast<double>(k) * dt - period) > 1e-9) {
        throw InvalidInput(fmt::format("{} period {} is not a multiple of dt {}", what, period, dt));
    }
    return k;
}

// Range and range rate come from the radar every tick; accel and input only via V2X.
Beacon with_radar(Beacon b, const VehicleState& sensed)
{
    b.position = sensed.position;
    b.speed = sensed.speed;
    b.length = sensed.length;
    return b;
}

VehicleState far_ahead_of(const VehicleState& ego)
{
    VehicleState p = ego;
    p.position = ego.position + 1e6;
    return p;
}

}  // namespace

Trace run_single_platoon(const SingleScenario& s, const DynamicsParams& dyn, const ControllerSet& ctrl)
{
    s.validate();
    dyn.validate();

    const std::size_t n = s.cfg.size();
    const EgoLeaderMap leaders = s.elect_leaders ? elect_ego_leaders(s.cfg) : head_only_leaders(s.cfg);
    const std::string labels = format_config(s.cfg);
    const bool gsbl_head = s.cfg[0] == Controller::Gsbl;

    const long steps_per_tick = steps_per_period(ctrl.control_period, dyn.dt, "control");
    const long steps_per_beacon = steps_per_period(ctrl.beacon_period, dyn.dt, "beacon");
    const long n_steps = std::lround(s.duration / dyn.dt);

    // warm start: everyone at base speed, each follower at its own equilibrium gap
    std::vector<VehicleState> states(n);
    double cursor = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        states[i].speed = s.base_speed;
        if (i > 0) {
            cursor -= states[i - 1].length + equilibrium_gap(labels[i], s.base_speed, ctrl);
        }
        states[i].position = cursor;
    }
    const double shift = -cursor + 100.0;
    for (auto& st : states) {
        st.position += shift;
    }

    std::vector<PloegState> ploeg(n);
    std::vector<GsblState> gsbl(n, gsbl_initial_state(ctrl.gsbl, s.base_speed));
    std::vector<double> command(n, 0.0);
    std::vector<bool> emergency(n, false);

    Trace trace;
    trace.labels.assign(labels.begin(), labels.end());
    trace.reserve(n_steps + 1);

    std::vector<Beacon> beacons(n);

    auto broadcast = [&](double t) {
        for (std::size_t i = 0; i < n; ++i) {
            beacons[i] = make_beacon(static_cast<int>(i), states[i], t);
        }
    };

    auto sensed_successor = [&](std::size_t i) -> std::optional<Beacon> {
        if (i + 1 >= n) {
            return std::nullopt;
        }
        return with_radar(beacons[i + 1], states[i + 1]);
    };

    auto control_tick = [&](double t) {
        for (std::size_t i = 0; i < n; ++i) {
            const VehicleState& ego = states[i];
            const bool braking = s.kind == ScenarioKind::Braking && t >= s.brake_onset;
            emergency[i] = braking;

            if (i == 0) {
                if (gsbl_head) {
                    const Beacon ref = virtual_leader(s, t);
                    gsbl[0] = gsbl_mode_update(ctrl.gsbl, gsbl[0], ref, ego, far_ahead_of(ego));
                    const std::optional<Beacon> succ = sensed_successor(0);
                    command[0] = gsbl_head_control(ego, succ ? &*succ : nullptr, ctrl.gsbl, gsbl[0]);
                } else if (braking) {
                    command[0] = ego.speed > 0.0 ? -s.brake_decel : 0.0;
                } else {
                    command[0] = cruise_control(ego, leader_profile(s, t), ctrl.cruise_kp);
                }
                continue;
            }

            const VehicleState& pred = states[i - 1];
            const Beacon pred_info = with_radar(beacons[i - 1], pred);
            const Beacon leader = leaders[i].is_external() ? virtual_leader(s, t) : beacons[leaders[i].index()];
            ControlOutput out;
            switch (s.cfg[i]) {
            case Controller::Independent:
                throw std::logic_error("independent vehicle behind the head");
            case Controller::Acc:
                out = acc_with_cruise(ego, pred, ctrl.acc, ctrl.follower_set_speed, ctrl.radar_range);
                break;
            case Controller::Ploeg:
                out = ploeg_control(ego, pred_info, ctrl.ploeg, ploeg[i], ctrl.control_period, t);
                break;
            case Controller::Path:
                out = path_control(ego, pred_info, leader, ctrl.path, t, command[i]);
                break;
            case Controller::Gsbl: {
                const GsblState next = gsbl_mode_update(ctrl.gsbl, gsbl[i], leader, ego, pred);
                if (next.mode != gsbl[i].mode) {
                    trace.events.push_back({t, "mode_switch", static_cast<int>(i), -1,
                                            next.mode == GsblMode::Override ? "cruise->override" : "override->cruise"});
                }
                gsbl[i] = next;
                const std::optional<Beacon> succ = sensed_successor(i);
                out = gsbl_control(ego, pred_info, succ ? &*succ : nullptr, ctrl.gsbl, gsbl[i], t, ctrl.acc);
                break;
            }
            }
            if (out.degraded) {
                trace.events.push_back({t, "degraded", static_cast<int>(i), -1, "fallback control"});
            }
            command[i] = out.u;
        }
        for (std::size_t i = 0; i < n; ++i) {
            states[i].ctrl_input = clamp_input(command[i], dyn, emergency[i]);
        }
    };

    for (long step = 0; step <= n_steps; ++step) {
        const double t = static_cast<double>(step) * dyn.dt;
        if (step % steps_per_beacon == 0) {
            broadcast(t);
        }
        if (step % steps_per_tick == 0) {
            control_tick(t);
        }

        const Eigen::Index row = trace.push_tick(t);
        bool collided = false;
        for (std::size_t i = 0; i < n; ++i) {
            const auto c = static_cast<Eigen::Index>(i);
            trace.position(row, c) = states[i].position;
            trace.speed(row, c) = states[i].speed;
            trace.accel(row, c) = states[i].accel;
            trace.ctrl(row, c) = states[i].ctrl_input;
            trace.lane(row, c) = states[i].lane;
            trace.mode(row, c) = s.cfg[i] == Controller::Gsbl && gsbl[i].mode == GsblMode::Override ? 1 : 0;
            if (i == 0) {
                trace.gap(row, c) = std::numeric_limits<double>::quiet_NaN();
            } else {
                const double g = bumper_gap(states[i], states[i - 1]);
                trace.gap(row, c) = g;
                if (g <= 0.0 && !collided) {
                    collided = true;
                    trace.events.push_back({t, "collision", static_cast<int>(i - 1), static_cast<int>(i),
                                            fmt::format("gap={:.6f} at x={:.6f}", g, states[i].position)});
                }
            }
        }
        if (collided) {
            trace.terminated_by_collision = true;
            break;
        }
        if (step == n_steps) {
            break;
        }
        for (std::size_t i = 0; i < n; ++i) {
            states[i] = step_vehicle(states[i], states[i].ctrl_input, dyn, emergency[i]);
        }
    }
    trace.finalize();
    return trace;
}

}  // namespace mixplat
