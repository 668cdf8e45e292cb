#include "mixplat/ring.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <random>

#include <fmt/format.h>

#include "mixplat/topology.hpp"

namespace mixplat {

std::string_view policy_name(PlatoonPolicy p)
{
    switch (p) {
    case PlatoonPolicy::AllP: return "AllP";
    case PlatoonPolicy::AllL: return "AllL";
    case PlatoonPolicy::AllG: return "AllG";
    case PlatoonPolicy::RandomMix: return "RandomMix";
    }
    return "?";
}

PlatoonPolicy parse_policy(std::string_view name)
{
    for (auto p : {PlatoonPolicy::AllP, PlatoonPolicy::AllL, PlatoonPolicy::AllG, PlatoonPolicy::RandomMix}) {
        if (name == policy_name(p)) {
            return p;
        }
    }
    if (name == "P") return PlatoonPolicy::AllP;
    if (name == "L") return PlatoonPolicy::AllL;
    if (name == "G") return PlatoonPolicy::AllG;
    if (name == "M" || name == "mix") return PlatoonPolicy::RandomMix;
    throw InvalidInput(fmt::format("unknown platoon policy '{}' (AllP, AllL, AllG, RandomMix)", name));
}

std::string_view baseline_name(BaselinePolicy b)
{
    return b == BaselinePolicy::Acc ? "ACC" : "IDM";
}

BaselinePolicy parse_baseline(std::string_view name)
{
    if (name == "ACC" || name == "acc" || name == "A") return BaselinePolicy::Acc;
    if (name == "IDM" || name == "idm" || name == "I" || name == "EIDM") return BaselinePolicy::Idm;
    throw InvalidInput(fmt::format("unknown baseline '{}' (ACC or IDM)", name));
}

void RingSpec::validate() const
{
    if (!(circumference > 0.0) || lanes < 1) {
        throw InvalidInput("ring: circumference and lane count must be positive");
    }
    if (!(density >= 0.0) || !std::isfinite(density)) {
        throw InvalidInput(fmt::format("ring: density {} must be a finite non-negative value", density));
    }
    if (!(penetration >= 0.0 && penetration <= 1.0)) {
        throw InvalidInput(fmt::format("ring: penetration rate {} outside [0, 1]", penetration));
    }
    if (platoon_size < 2) {
        throw InvalidInput("ring: platoon size must be at least 2");
    }
    if (speed_classes_kmh.empty() || jitter_kmh < 0.0) {
        throw InvalidInput("ring: need at least one speed class and a non-negative jitter");
    }
    for (double v : speed_classes_kmh) {
        if (!(v - jitter_kmh > 0.0)) {
            throw InvalidInput("ring: every desired speed must stay positive after jitter");
        }
    }
    if (!(duration > 0.0) || warmup < 0.0 || !(sample_period > 0.0) || !(vehicle_length > 0.0)) {
        throw InvalidInput("ring: duration, sample period and vehicle length must be positive, warm-up non-negative");
    }
    for (double p : counter_positions) {
        if (p < 0.0 || p >= circumference) {
            throw InvalidInput(fmt::format("ring: counter position {} off the road", p));
        }
    }
}

long RingSpec::vehicle_count() const
{
    return static_cast<long>(std::floor(density * circumference / 1000.0 + 1e-9));
}

long RingSpec::platoon_count() const
{
    return static_cast<long>(std::floor(static_cast<double>(vehicle_count()) * penetration / platoon_size + 1e-9));
}

namespace {

double wrap(double x, double c)
{
    double r = std::fmod(x, c);
    if (r < 0.0) {
        r += c;
    }
    return r >= c ? 0.0 : r;
}

// Front-bumper distance from a to b going forward.
double ahead(const RingVehicle& a, const RingVehicle& b, double c)
{
    return wrap(b.state.position - a.state.position, c);
}

char member_label(PlatoonPolicy policy, std::mt19937_64& rng)
{
    switch (policy) {
    case PlatoonPolicy::AllP: return 'P';
    case PlatoonPolicy::AllL: return 'L';
    case PlatoonPolicy::AllG: return 'G';
    case PlatoonPolicy::RandomMix: {
        static constexpr char kMix[3] = {'P', 'L', 'G'};
        return kMix[std::uniform_int_distribution<int>(0, 2)(rng)];
    }
    }
    return 'P';
}

}  // namespace

RingWorld spawn_ring_traffic(const RingSpec& spec, const ControllerSet& ctrl)
{
    spec.validate();
    // Separate streams for speeds, controller labels and placement, so runs
    // that differ only in the platoon policy share the same traffic.
    std::seed_seq speed_seq{spec.seed, std::uint64_t{1}};
    std::seed_seq label_seq{spec.seed, std::uint64_t{2}};
    std::seed_seq place_seq{spec.seed, std::uint64_t{3}};
    std::mt19937_64 rng(speed_seq);
    std::mt19937_64 label_rng(label_seq);
    std::mt19937_64 place_rng(place_seq);
    std::uniform_int_distribution<int> class_dist(0, static_cast<int>(spec.speed_classes_kmh.size()) - 1);
    std::uniform_real_distribution<double> jitter(-spec.jitter_kmh, spec.jitter_kmh);

    const long n = spec.vehicle_count();
    const long n_platoons = spec.platoon_count();
    const long n_singles = n - n_platoons * spec.platoon_size;
    const char single_label = spec.baseline == BaselinePolicy::Acc ? 'A' : 'I';

    RingWorld world;
    world.circumference = spec.circumference;
    world.lanes = spec.lanes;
    world.vehicles.reserve(static_cast<std::size_t>(n));

    auto new_vehicle = [&](char label, int cls, double desired) -> RingVehicle& {
        RingVehicle v;
        v.id = static_cast<int>(world.vehicles.size());
        v.label = label;
        v.speed_class = cls;
        v.desired_speed = desired;
        v.state.length = spec.vehicle_length;
        v.state.lane = std::min(cls, spec.lanes - 1);
        world.vehicles.push_back(v);
        return world.vehicles.back();
    };

    for (long p = 0; p < n_platoons; ++p) {
        const int cls = class_dist(rng);
        const double desired = (spec.speed_classes_kmh[static_cast<std::size_t>(cls)] + jitter(rng)) / 3.6;
        std::vector<int> members;
        for (int k = 0; k < spec.platoon_size; ++k) {
            const char label = k == 0 ? '-' : member_label(spec.policy, label_rng);
            RingVehicle& v = new_vehicle(label, cls, desired);
            v.platoon = static_cast<int>(p);
            v.member = k;
            members.push_back(v.id);
        }
        world.platoons.push_back(std::move(members));
    }
    std::vector<int> singles;
    for (long s = 0; s < n_singles; ++s) {
        const int cls = class_dist(rng);
        const double desired = (spec.speed_classes_kmh[static_cast<std::size_t>(cls)] + jitter(rng)) / 3.6;
        singles.push_back(new_vehicle(single_label, cls, desired).id);
    }

    // Singles fill lanes from the right, each lane up to an even share of
    // the total standstill footprint.
    auto footprint = [&](const RingVehicle& v, double speed) {
        return v.state.length + equilibrium_gap(v.label, speed, ctrl);
    };
    std::vector<double> lane_fp(static_cast<std::size_t>(spec.lanes), 0.0);
    double total_fp = 0.0;
    for (const auto& v : world.vehicles) {
        total_fp += footprint(v, 0.0);
        if (v.platoon >= 0) {
            lane_fp[static_cast<std::size_t>(v.state.lane)] += footprint(v, 0.0);
        }
    }
    const double share = total_fp / spec.lanes;
    std::shuffle(singles.begin(), singles.end(), place_rng);
    for (int id : singles) {
        RingVehicle& v = world.vehicles[static_cast<std::size_t>(id)];
        const double fp = footprint(v, 0.0);
        int lane = -1;
        for (int l = 0; l < spec.lanes; ++l) {
            if (lane_fp[static_cast<std::size_t>(l)] + fp <= share + 1e-9) {
                lane = l;
                break;
            }
        }
        if (lane < 0) {
            lane = static_cast<int>(std::min_element(lane_fp.begin(), lane_fp.end()) - lane_fp.begin());
        }
        v.state.lane = lane;
        lane_fp[static_cast<std::size_t>(lane)] += fp;
    }

    // A unit is a platoon or a single; units keep their internal order.
    std::vector<std::vector<std::vector<int>>> lane_units(static_cast<std::size_t>(spec.lanes));
    for (const auto& members : world.platoons) {
        lane_units[static_cast<std::size_t>(world.vehicles[static_cast<std::size_t>(members.front())].state.lane)]
            .push_back(members);
    }
    for (int id : singles) {
        lane_units[static_cast<std::size_t>(world.vehicles[static_cast<std::size_t>(id)].state.lane)].push_back({id});
    }

    const double c = spec.circumference;
    double worst_fill = 0.0;
    for (auto& units : lane_units) {
        double fill0 = 0.0;
        for (const auto& u : units) {
            for (int id : u) {
                fill0 += footprint(world.vehicles[static_cast<std::size_t>(id)], 0.0);
            }
        }
        worst_fill = std::max(worst_fill, fill0 / c);
    }
    if (worst_fill > 1.0) {
        const double max_density = std::floor(spec.density / worst_fill);
        throw SpawnError(fmt::format("ring: density {} veh/km does not fit {} lanes of {} m "
                                     "(maximum feasible with this mix is about {} veh/km)",
                                     spec.density, spec.lanes, c, max_density),
                         max_density);
    }

    for (auto& units : lane_units) {
        if (units.empty()) {
            continue;
        }
        std::shuffle(units.begin(), units.end(), place_rng);
        double cap = std::numeric_limits<double>::infinity();
        for (const auto& u : units) {
            cap = std::min(cap, world.vehicles[static_cast<std::size_t>(u.front())].desired_speed);
        }
        auto lane_fill = [&](double v) {
            double f = 0.0;
            for (const auto& u : units) {
                for (int id : u) {
                    f += footprint(world.vehicles[static_cast<std::size_t>(id)], v);
                }
            }
            return f;
        };
        double lo = 0.0;
        double hi = cap;
        if (lane_fill(hi) <= c) {
            lo = hi;
        } else {
            for (int it = 0; it < 100; ++it) {
                const double mid = 0.5 * (lo + hi);
                (lane_fill(mid) <= c ? lo : hi) = mid;
            }
        }
        const double v0 = lo;
        const double extra = (c - lane_fill(v0)) / static_cast<double>(units.size());

        double cursor = c;
        for (const auto& u : units) {
            double front_space = extra;
            for (std::size_t k = 0; k < u.size(); ++k) {
                RingVehicle& v = world.vehicles[static_cast<std::size_t>(u[k])];
                const double gap = equilibrium_gap(v.label, v0, ctrl) + (k == 0 ? front_space : 0.0);
                const double pos = cursor - gap;
                v.state.position = wrap(pos, c);
                v.state.speed = v0;
                v.odometer = v.state.position;
                cursor = pos - v.state.length;
            }
        }
    }
    return world;
}

// ---------------------------------------------------------------------------

bool lane_slot_safe(const LaneView& target, double ego_speed, const LaneChangeParams& p)
{
    if (!target.exists) {
        return false;
    }
    if (target.front.present && target.rear.present && target.front.platoon >= 0
        && target.front.platoon == target.rear.platoon) {
        return false;
    }
    if (target.front.present) {
        const double dv = std::max(0.0, ego_speed - target.front.speed);
        if (target.front.gap < p.s_min + p.T * ego_speed + dv * dv / (2.0 * p.b)) {
            return false;
        }
    }
    if (target.rear.present) {
        const double dv = std::max(0.0, target.rear.speed - ego_speed);
        if (target.rear.gap < p.s_min + p.T * target.rear.speed + dv * dv / (2.0 * p.b)) {
            return false;
        }
    }
    return true;
}

LaneDecision lane_change_decision(const Neighborhood& n, const LaneChangeParams& p)
{
    if (n.since_last_change < p.cooldown) {
        return LaneDecision::Stay;
    }
    const double wanted = p.overtake_ratio * n.desired_speed;
    auto blocking = [&](const Neighbor& f) { return f.present && f.gap < p.lookahead && f.speed < wanted; };

    if (n.right.exists && !blocking(n.right.front) && lane_slot_safe(n.right, n.speed, p)) {
        return LaneDecision::Right;
    }
    if (blocking(n.front) && n.left.exists) {
        const bool left_busy = n.left.front.present && n.left.front.gap < p.lookahead;
        const double left_speed = left_busy ? n.left.front.speed : n.desired_speed;
        if (left_speed >= n.front.speed + p.incentive && lane_slot_safe(n.left, n.speed, p)) {
            return LaneDecision::Left;
        }
    }
    return LaneDecision::Stay;
}

// ---------------------------------------------------------------------------

namespace {

using LaneOrder = std::vector<std::vector<int>>;

LaneOrder build_order(const RingWorld& w)
{
    LaneOrder order(static_cast<std::size_t>(w.lanes));
    for (const auto& v : w.vehicles) {
        order[static_cast<std::size_t>(v.state.lane)].push_back(v.id);
    }
    for (auto& lane : order) {
        std::stable_sort(lane.begin(), lane.end(), [&](int a, int b) {
            return w.vehicles[static_cast<std::size_t>(a)].state.position
                 < w.vehicles[static_cast<std::size_t>(b)].state.position;
        });
    }
    return order;
}

std::vector<TraceEvent> collisions_in(const RingWorld& w, const LaneOrder& order, double t)
{
    std::vector<TraceEvent> out;
    for (const auto& lane : order) {
        const std::size_t m = lane.size();
        if (m < 2) {
            continue;
        }
        for (std::size_t k = 0; k < m; ++k) {
            const RingVehicle& rear = w.vehicles[static_cast<std::size_t>(lane[k])];
            const RingVehicle& front = w.vehicles[static_cast<std::size_t>(lane[(k + 1) % m])];
            const double gap = ahead(rear, front, w.circumference) - front.state.length;
            if (gap <= 0.0) {
                out.push_back({t, "collision", front.id, rear.id,
                               fmt::format("lane={} x={:.6f} gap={:.6f}", rear.state.lane, rear.state.position, gap)});
            }
        }
    }
    return out;
}

}  // namespace

std::vector<TraceEvent> detect_collisions(const RingWorld& world, double t)
{
    return collisions_in(world, build_order(world), t);
}

// ---------------------------------------------------------------------------

RingResult run_ring(const RingSpec& spec, const DynamicsParams& dyn, const ControllerSet& ctrl)
{
    dyn.validate();
    RingWorld w = spawn_ring_traffic(spec, ctrl);
    const double c = w.circumference;
    const std::size_t n = w.vehicles.size();

    auto steps_of = [&](double period, const char* what) {
        const long k = std::lround(period / dyn.dt);
        if (k < 1 || std::abs(static_cast<double>(k) * dyn.dt - period) > 1e-9) {
            throw InvalidInput(fmt::format("{} period {} is not a multiple of dt {}", what, period, dyn.dt));
        }
        return k;
    };
    const long control_steps = steps_of(ctrl.control_period, "control");
    const long beacon_steps = steps_of(ctrl.beacon_period, "beacon");
    const long sample_steps = steps_of(spec.sample_period, "sample");
    const long lane_steps = steps_of(spec.lane_change.period, "lane-change");
    const long warmup_steps = std::lround(spec.warmup / dyn.dt);
    const long n_steps = warmup_steps + std::lround(spec.duration / dyn.dt);

    RingResult res;
    res.vehicle_count = static_cast<long>(n);
    res.speed_samples.resize(n);
    for (const auto& v : w.vehicles) {
        res.labels.push_back(v.label);
        res.platoon_of.push_back(v.platoon);
    }
    res.trace.labels = res.labels;
    if (spec.record_trace) {
        res.trace.reserve((n_steps - warmup_steps) / sample_steps + 1);
    }

    // egoLeader of every platoon member, as a vehicle id
    std::vector<int> ego_leader(n, -1);
    for (const auto& members : w.platoons) {
        std::string text;
        for (int id : members) {
            text.push_back(w.vehicles[static_cast<std::size_t>(id)].label);
        }
        const EgoLeaderMap map = elect_ego_leaders(parse_config(text));
        for (std::size_t k = 1; k < members.size(); ++k) {
            ego_leader[static_cast<std::size_t>(members[k])] = members[map[k].index()];
        }
    }

    LaneOrder order = build_order(w);
    std::vector<std::size_t> rank(n, 0);
    auto rerank = [&](int lane) {
        const auto& ids = order[static_cast<std::size_t>(lane)];
        for (std::size_t k = 0; k < ids.size(); ++k) {
            rank[static_cast<std::size_t>(ids[k])] = k;
        }
    };
    for (int l = 0; l < w.lanes; ++l) {
        rerank(l);
    }
    auto veh = [&](int id) -> RingVehicle& { return w.vehicles[static_cast<std::size_t>(id)]; };
    auto predecessor = [&](int id) -> int {
        const auto& ids = order[static_cast<std::size_t>(veh(id).state.lane)];
        if (ids.size() < 2) {
            return -1;
        }
        return ids[(rank[static_cast<std::size_t>(id)] + 1) % ids.size()];
    };
    auto successor = [&](int id) -> int {
        const auto& ids = order[static_cast<std::size_t>(veh(id).state.lane)];
        if (ids.size() < 2) {
            return -1;
        }
        return ids[(rank[static_cast<std::size_t>(id)] + ids.size() - 1) % ids.size()];
    };

    std::vector<Beacon> beacons(n);
    std::vector<PloegState> ploeg(n);
    std::vector<GsblState> gsbl(n);
    for (const auto& v : w.vehicles) {
        gsbl[static_cast<std::size_t>(v.id)] = gsbl_initial_state(ctrl.gsbl, v.state.speed);
    }
    std::vector<double> command(n, 0.0);

    // Ego sits at the origin of its own frame; others are placed by ring distance.
    auto local_ego = [](const RingVehicle& v) {
        VehicleState s = v.state;
        s.position = 0.0;
        return s;
    };
    auto local_other = [&](const RingVehicle& ego, const RingVehicle& other, bool in_front) {
        VehicleState s = other.state;
        s.position = in_front ? ahead(ego, other, c) : -ahead(other, ego, c);
        return s;
    };
    auto sensed_beacon = [&](int id, const VehicleState& local) {
        Beacon b = beacons[static_cast<std::size_t>(id)];
        b.position = local.position;
        b.speed = local.speed;
        b.length = local.length;
        return b;
    };

    auto control = [&](double t) {
        for (std::size_t i = 0; i < n; ++i) {
            const RingVehicle& v = w.vehicles[i];
            const VehicleState ego = local_ego(v);
            const int p = predecessor(v.id);
            std::optional<VehicleState> pred;
            if (p >= 0) {
                pred = local_other(v, veh(p), true);
            }
            double u = 0.0;
            const bool cooperative = v.platoon >= 0 && v.member > 0;
            const int expected = cooperative ? w.platoons[static_cast<std::size_t>(v.platoon)]
                                                          [static_cast<std::size_t>(v.member - 1)]
                                             : -1;
            if (v.label == 'I') {
                IdmParams ip = ctrl.idm;
                ip.v0 = v.desired_speed;
                u = idm_control(ego, pred, ip);
            } else if (!cooperative || p != expected) {
                u = acc_with_cruise(ego, pred, ctrl.acc, v.desired_speed, ctrl.radar_range).u;
            } else {
                const Beacon pred_b = sensed_beacon(p, *pred);
                const Beacon& leader_b = beacons[static_cast<std::size_t>(ego_leader[i])];
                if (v.label == 'L') {
                    u = ploeg_control(ego, pred_b, ctrl.ploeg, ploeg[i], ctrl.control_period, t).u;
                } else if (v.label == 'P') {
                    u = path_control(ego, pred_b, leader_b, ctrl.path, t, command[i]).u;
                } else {
                    const GsblState next = gsbl_mode_update(ctrl.gsbl, gsbl[i], leader_b, ego, *pred);
                    if (next.mode != gsbl[i].mode) {
                        res.trace.events.push_back({t, "mode_switch", v.id, -1,
                                                    next.mode == GsblMode::Override ? "cruise->override"
                                                                                    : "override->cruise"});
                    }
                    gsbl[i] = next;
                    const auto& members = w.platoons[static_cast<std::size_t>(v.platoon)];
                    std::optional<Beacon> succ_b;
                    if (static_cast<std::size_t>(v.member) + 1 < members.size()) {
                        const int s = members[static_cast<std::size_t>(v.member) + 1];
                        if (successor(v.id) == s) {
                            succ_b = sensed_beacon(s, local_other(v, veh(s), false));
                        }
                    }
                    u = gsbl_control(ego, pred_b, succ_b ? &*succ_b : nullptr, ctrl.gsbl, gsbl[i], t, ctrl.acc).u;
                }
            }
            command[i] = u;
        }
        for (std::size_t i = 0; i < n; ++i) {
            w.vehicles[i].state.ctrl_input = clamp_input(command[i], dyn);
        }
    };

    auto neighbor_info = [&](const RingVehicle& ego, int other, bool in_front) {
        Neighbor nb;
        if (other < 0 || other == ego.id) {
            return nb;
        }
        const RingVehicle& o = veh(other);
        nb.present = true;
        nb.speed = o.state.speed;
        nb.platoon = o.platoon;
        nb.member = o.member;
        nb.gap = in_front ? ahead(ego, o, c) - o.state.length : ahead(o, ego, c) - ego.state.length;
        return nb;
    };
    auto view_of = [&](const RingVehicle& ego, int lane) {
        LaneView view;
        if (lane < 0 || lane >= w.lanes) {
            return view;
        }
        view.exists = true;
        const auto& ids = order[static_cast<std::size_t>(lane)];
        if (ids.empty()) {
            return view;
        }
        const auto it = std::lower_bound(ids.begin(), ids.end(), ego.state.position,
                                         [&](int id, double x) { return veh(id).state.position < x; });
        const std::size_t k = static_cast<std::size_t>(it - ids.begin()) % ids.size();
        view.front = neighbor_info(ego, ids[k], true);
        view.rear = neighbor_info(ego, ids[(k + ids.size() - 1) % ids.size()], false);
        return view;
    };
    auto insert_sorted = [&](int lane, int id) {
        auto& ids = order[static_cast<std::size_t>(lane)];
        const auto it = std::lower_bound(ids.begin(), ids.end(), veh(id).state.position,
                                         [&](int a, double x) { return veh(a).state.position < x; });
        ids.insert(it, id);
        rerank(lane);
    };

    auto lane_changes = [&](double t) {
        for (std::size_t i = 0; i < n; ++i) {
            RingVehicle& v = w.vehicles[i];
            if (v.platoon >= 0) {
                continue;
            }
            Neighborhood nb;
            nb.speed = v.state.speed;
            nb.desired_speed = v.desired_speed;
            nb.since_last_change = t - v.last_lane_change;
            nb.front = neighbor_info(v, predecessor(v.id), true);
            nb.left = view_of(v, v.state.lane + 1);
            nb.right = view_of(v, v.state.lane - 1);
            const LaneDecision d = lane_change_decision(nb, spec.lane_change);
            if (d == LaneDecision::Stay) {
                continue;
            }
            const int from = v.state.lane;
            const int to = d == LaneDecision::Left ? from + 1 : from - 1;
            auto& ids = order[static_cast<std::size_t>(from)];
            ids.erase(ids.begin() + static_cast<std::ptrdiff_t>(rank[i]));
            rerank(from);
            v.state.lane = to;
            v.last_lane_change = t;
            insert_sorted(to, v.id);
            ++res.lane_changes;
            res.trace.events.push_back({t, "lane_change", v.id, -1, fmt::format("{}->{}", from, to)});
        }
    };

    auto record_row = [&](double t) {
        const Eigen::Index row = res.trace.push_tick(t);
        for (std::size_t i = 0; i < n; ++i) {
            const RingVehicle& v = w.vehicles[i];
            const auto col = static_cast<Eigen::Index>(i);
            res.trace.position(row, col) = v.state.position;
            res.trace.speed(row, col) = v.state.speed;
            res.trace.accel(row, col) = v.state.accel;
            res.trace.ctrl(row, col) = v.state.ctrl_input;
            res.trace.lane(row, col) = v.state.lane;
            res.trace.mode(row, col) = v.label == 'G' && gsbl[i].mode == GsblMode::Override ? 1 : 0;
            const int p = predecessor(v.id);
            res.trace.gap(row, col) =
                p < 0 ? std::numeric_limits<double>::quiet_NaN() : ahead(v, veh(p), c) - veh(p).state.length;
        }
    };

    const double t_end = spec.warmup + spec.duration;
    for (long step = 0; step <= n_steps; ++step) {
        const double t = static_cast<double>(step) * dyn.dt;
        res.end_time = t;
        if (step % beacon_steps == 0) {
            for (std::size_t i = 0; i < n; ++i) {
                beacons[i] = make_beacon(static_cast<int>(i), w.vehicles[i].state, t);
            }
        }
        if (step > 0 && step % lane_steps == 0) {
            lane_changes(t);
        }
        if (step % control_steps == 0) {
            control(t);
        }
        if (step >= warmup_steps && (step - warmup_steps) % sample_steps == 0) {
            for (std::size_t i = 0; i < n; ++i) {
                res.speed_samples[i].push_back(w.vehicles[i].state.speed);
            }
            if (spec.record_trace) {
                record_row(t);
            }
        }
        if (step == n_steps) {
            break;
        }

        const double t_next = static_cast<double>(step + 1) * dyn.dt;
        const bool counting = step + 1 > warmup_steps && t_next <= t_end + 1e-9;
        for (std::size_t i = 0; i < n; ++i) {
            RingVehicle& v = w.vehicles[i];
            const double x0 = v.state.position;
            v.state = step_vehicle(v.state, v.state.ctrl_input, dyn);
            const double ds = v.state.position - x0;
            v.odometer += ds;
            v.state.position = wrap(v.state.position, c);
            if (!counting || ds <= 0.0) {
                continue;
            }
            for (std::size_t d = 0; d < spec.counter_positions.size(); ++d) {
                double to_device = spec.counter_positions[d] - x0;
                if (to_device <= 0.0) {
                    to_device += c;
                }
                if (to_device <= ds) {
                    res.counters.push_back({kDevices[d], t_next, v.id, v.state.lane});
                }
            }
        }
        // vehicles move little per step, so the lanes stay nearly sorted
        for (int l = 0; l < w.lanes; ++l) {
            auto& ids = order[static_cast<std::size_t>(l)];
            bool moved = false;
            for (std::size_t k = 1; k < ids.size(); ++k) {
                const int id = ids[k];
                const double x = veh(id).state.position;
                std::size_t j = k;
                while (j > 0 && veh(ids[j - 1]).state.position > x) {
                    ids[j] = ids[j - 1];
                    --j;
                }
                if (j != k) {
                    ids[j] = id;
                    moved = true;
                }
            }
            if (moved) {
                rerank(l);
            }
        }
        auto hits = collisions_in(w, order, t_next);
        if (!hits.empty()) {
            res.trace.events.insert(res.trace.events.end(), hits.begin(), hits.end());
            res.trace.terminated_by_collision = true;
            res.terminated_by_collision = true;
            res.end_time = t_next;
            break;
        }
    }
    res.trace.finalize();
    return res;
}

}  // namespace mixplat
