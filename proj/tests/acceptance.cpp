// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <future>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <fmt/format.h>

#include "mixplat/controllers.hpp"
#include "mixplat/dynamics.hpp"
#include "mixplat/experiment.hpp"
#include "mixplat/metrics.hpp"
#include "mixplat/ring.hpp"
#include "mixplat/single_platoon.hpp"
#include "mixplat/sweep.hpp"
#include "mixplat/topology.hpp"
#include "mixplat/trace.hpp"

using namespace mixplat;

namespace {

// Pinned tolerances.
constexpr double kMatrixRuntimeS = 1.0;
constexpr double kSteadyGapRelTol = 0.01;
constexpr double kStepLow = 0.62;
constexpr double kStepHigh = 0.645;
constexpr double kEtaLllLow = 1.8;
constexpr double kEtaLllHigh = 2.5;
constexpr double kEtaPppLow = 6.5;
constexpr double kEtaPppHigh = 8.0;
constexpr double kMinGapFloor = 0.0;
constexpr double kDeltaASignTol = 0.0;
constexpr double kNonIdmMedianCap = 0.12;
constexpr double kRingDensity = 60.0;
constexpr int kRingPlatoonSize = 8;
constexpr double kRingPenetration = 0.5;
constexpr int kRingSeeds = 3;
constexpr double kVolatilityDensity = 120.0;
constexpr int kGainUlps = 2;  // 0.3 and 0.04 have no exact binary form

struct Outcome {
    bool pass = false;
    std::string detail;
};

Eigen::MatrixXi grid(int rows, int cols, std::vector<int> cells)
{
    Eigen::MatrixXi m(rows, cols);
    for (int i = 0; i < rows; ++i) {
        for (int j = 0; j < cols; ++j) {
            m(i, j) = cells[static_cast<std::size_t>(i * cols + j)];
        }
    }
    return m;
}

Outcome criterion1()
{
    const auto start = std::chrono::steady_clock::now();
    const Eigen::MatrixXi c2 = grid(5, 5, {1, 0, 0, 0, 0, 1, 1, 0, 0, 0, 1, 1, 1, 0, 0, 1, 0, 1, 1, 0, 1, 0, 0, 1, 1});
    const Eigen::MatrixXi g5 = grid(5, 6, {1, 1, 1, 0, 0, 0, 1, 1, 1, 1, 0, 0, 1, 0, 1, 1, 1, 0,
                                           1, 0, 0, 1, 1, 1, 1, 0, 0, 0, 1, 1});
    const Eigen::MatrixXi gp = grid(6, 7, {1, 1, 1, 0, 0, 0, 0, 1, 1, 1, 1, 0, 0, 0, 0, 0, 1, 1, 0, 0, 0,
                                           0, 0, 1, 1, 1, 0, 0, 0, 0, 1, 0, 1, 1, 0, 0, 0, 0, 0, 0, 1, 1});
    const bool ok = connectivity_matrix(parse_config("-PPPP")).cells == c2
                    && extended_connectivity_matrix(parse_config("GGGGG")).cells == g5
                    && extended_connectivity_matrix(parse_config("GGPPPL")).cells == gp;
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return {ok && secs < kMatrixRuntimeS, fmt::format("cell-exact={} runtime={:.4f}s", ok, secs)};
}

Outcome criterion2()
{
    const EgoLeaderMap m = elect_ego_leaders(parse_config("-PLPP"));
    bool ok = m.size() == 5 && m[1].index() == 0 && m[2].index() == 1 && m[3].index() == 2 && m[4].index() == 2;
    int checked = 0;
    for (const auto& cfg : enumerate_mixes(4)) {
        const std::string s = format_config(cfg);
        const EgoLeaderMap e = elect_ego_leaders(cfg);
        for (std::size_t i = 1; i < s.size(); ++i) {
            std::size_t j = i;
            while (j > 0 && s[j - 1] == s[i]) {
                --j;
            }
            // j == 0 cannot happen here: the head is '-'
            ok = ok && !e[i].is_external() && e[i].index() == j - 1;
        }
        ++checked;
    }
    return {ok && checked == 27, fmt::format("-PLPP worked example and {} mixes", checked)};
}

Outcome criterion3()
{
    const ExperimentSpec spec;
    int pairs = 0;
    double worst = 0.0;
    for (auto kind : {ScenarioKind::Sinusoidal, ScenarioKind::Braking}) {
        const SingleBaselines base = run_baselines(spec, 4, kind);
        for (auto c : {Controller::Path, Controller::Ploeg, Controller::Gsbl}) {
            const SingleRecord r = evaluate_single(spec, homogeneous_config(c, 4), kind, base);
            worst = std::max(worst, std::abs(r.report.safety.value));
            for (std::size_t i = 1; i < r.report.safety.per_vehicle.size(); ++i) {
                worst = std::max(worst, std::abs(r.report.safety.per_vehicle[i]));
            }
            ++pairs;
        }
    }
    return {pairs == 6 && worst == 0.0, fmt::format("{} pairs, max |delta_d| = {}", pairs, worst)};
}

// Two vehicles at 100 km/h, follower starting 10 m off its equilibrium gap.
double steady_gap(char label, const ControllerSet& ctrl, double target)
{
    const DynamicsParams dyn;
    const double v = 100.0 / 3.6;
    VehicleState head;
    head.speed = v;
    head.position = 1000.0;
    VehicleState ego;
    ego.speed = v;
    ego.position = head.position - head.length - target - 10.0;
    PloegState ploeg;
    ploeg.u = 0.0;
    ploeg.engaged = true;
    GsblState gsbl = gsbl_initial_state(ctrl.gsbl, v);
    double prev_u = 0.0;
    const int steps = static_cast<int>(std::lround(60.0 / dyn.dt));
    for (int k = 0; k < steps; ++k) {
        const double now = k * dyn.dt;
        const Beacon pred = make_beacon(0, head, now);
        double u = 0.0;
        switch (label) {
        case 'A':
            u = acc_control(ego, head, ctrl.acc);
            break;
        case 'L':
            u = ploeg_control(ego, pred, ctrl.ploeg, ploeg, dyn.dt, now).u;
            break;
        case 'P':
            u = path_control(ego, pred, pred, ctrl.path, now, prev_u).u;
            break;
        case 'G':
            u = gsbl_control(ego, pred, nullptr, ctrl.gsbl, gsbl, now, ctrl.acc).u;
            break;
        default:
            break;
        }
        prev_u = u;
        head = step_vehicle(head, 0.0, dyn);
        ego = step_vehicle(ego, clamp_input(u, dyn), dyn);
    }
    return bumper_gap(ego, head);
}

Outcome criterion4()
{
    const double v = 100.0 / 3.6;
    ControllerSet literal;
    literal.acc.standstill = 0.0;
    literal.ploeg.standstill = 0.0;
    const ControllerSet defaults;
    struct Case {
        const char* name;
        char label;
        const ControllerSet* ctrl;
        double target;
    };
    const std::vector<Case> cases{
        {"ACC H*v", 'A', &literal, literal.acc.H * v},
        {"Ploeg H*v", 'L', &literal, literal.ploeg.H * v},
        {"ACC s0+H*v", 'A', &defaults, defaults.acc.standstill + defaults.acc.H * v},
        {"Ploeg s0+H*v", 'L', &defaults, defaults.ploeg.standstill + defaults.ploeg.H * v},
        {"PATH dd", 'P', &defaults, defaults.path.dd},
        {"GSBL d", 'G', &defaults, defaults.gsbl.d},
    };
    bool ok = true;
    std::string detail;
    for (const auto& c : cases) {
        const double gap = steady_gap(c.label, *c.ctrl, c.target);
        const double rel = std::abs(gap - c.target) / c.target;
        ok = ok && rel <= kSteadyGapRelTol;
        detail += fmt::format("{} {:.3f}/{:.3f} ", c.name, gap, c.target);
    }
    return {ok, detail};
}

Outcome criterion5()
{
    const DynamicsParams p;
    VehicleState s;
    s.speed = 20.0;
    const int steps = static_cast<int>(std::lround(p.tau / p.dt));
    for (int k = 0; k < steps; ++k) {
        s = step_vehicle(s, 1.0, p);
    }
    return {s.accel >= kStepLow && s.accel <= kStepHigh, fmt::format("a(tau) = {:.5f}", s.accel)};
}

bool within_ulps(double got, double want, int ulps)
{
    double lo = want;
    double hi = want;
    for (int i = 0; i < ulps; ++i) {
        lo = std::nextafter(lo, -INFINITY);
        hi = std::nextafter(hi, INFINITY);
    }
    return got >= lo && got <= hi;
}

Outcome criterion6()
{
    const PathGains g = path_gains(0.5, 1.0, 0.2);
    const bool ok = g.alpha1 == 0.5 && g.alpha2 == 0.5 && within_ulps(g.alpha3, -0.3, kGainUlps)
                    && within_ulps(g.alpha4, -0.1, kGainUlps) && within_ulps(g.alpha5, -0.04, kGainUlps);
    return {ok, fmt::format("({}, {}, {}, {}, {})", g.alpha1, g.alpha2, g.alpha3, g.alpha4, g.alpha5)};
}

Outcome criterion7()
{
    // Beacon log: leader speed and input, ego and predecessor state; the
    // expected mode follows the branch table of the mode logic.
    const GsblParams p;
    struct Row {
        const char* branch;
        double u_leader;
        double gap;
        double closing;
        GsblMode from;
        GsblMode expected;
    };
    const std::vector<Row> log{
        {"u>=0 from cruise", 0.5, 20.0, 0.0, GsblMode::Cruise, GsblMode::Cruise},
        {"u>=0 from override", 0.0, 20.0, 0.0, GsblMode::Override, GsblMode::Cruise},
        {"u<=da from cruise", -3.0, 20.0, 0.0, GsblMode::Cruise, GsblMode::Override},
        {"u<=da from override", -2.0, 20.0, 0.0, GsblMode::Override, GsblMode::Override},
        {"closing from cruise", -0.5, 3.0, 1.0, GsblMode::Cruise, GsblMode::Override},
        {"closing from override", -0.5, 3.0, 1.0, GsblMode::Override, GsblMode::Override},
        {"mild braking keeps cruise", -0.5, 20.0, 0.0, GsblMode::Cruise, GsblMode::Cruise},
        {"mild braking keeps override", -0.5, 20.0, 0.0, GsblMode::Override, GsblMode::Override},
        {"near but opening keeps cruise", -0.5, 3.0, -1.0, GsblMode::Cruise, GsblMode::Cruise},
    };
    bool ok = true;
    int rows = 0;
    std::string failed;
    for (const auto& r : log) {
        VehicleState pred;
        pred.position = 500.0;
        pred.speed = 25.0;
        VehicleState ego;
        ego.speed = 25.0 + r.closing;
        ego.position = pred.position - pred.length - r.gap;
        GsblState cur = gsbl_initial_state(p, 25.0);
        cur.mode = r.from;
        const GsblState next = gsbl_mode_update(p, cur, 25.0, r.u_leader, ego, pred);
        bool row_ok = next.mode == r.expected;
        if (next.mode == GsblMode::Override) {
            const double v_des = 25.0 + r.u_leader * p.delta_t;
            const double diff = ego.speed - v_des;
            const double r_exp = std::abs(diff) < p.singular_band
                                     ? p.r_max
                                     : std::clamp(std::abs(r.u_leader / diff), p.r_min, p.r_max);
            row_ok = row_ok && next.v_r == v_des && std::abs(next.r - r_exp) < 1e-12;
        } else {
            row_ok = row_ok && next.v_r == 25.0 && next.r == p.r_default;
        }
        if (!row_ok) {
            failed += std::string(" ") + r.branch;
        }
        ok = ok && row_ok;
        ++rows;
    }
    return {ok, fmt::format("{} log rows{}", rows, failed.empty() ? "" : ", failed:" + failed)};
}

Outcome criterion8()
{
    std::string a;
    std::string b;
    for (std::string* out : {&a, &b}) {
        std::ostringstream os;
        const Trace t = run_single_platoon(default_scenario(ScenarioKind::Braking, parse_config("-PGLPG")),
                                           DynamicsParams{}, ControllerSet{});
        write_trace_csv(os, t, "h");
        write_events_csv(os, t.events, "h");
        *out = os.str();
    }
    RingSpec rs;
    rs.circumference = 3000.0;
    rs.counter_positions = {0.0, 750.0, 1500.0, 2250.0};
    rs.density = 30.0;
    rs.penetration = 0.5;
    rs.policy = PlatoonPolicy::RandomMix;
    rs.warmup = 10.0;
    rs.duration = 60.0;
    rs.seed = 42;
    rs.record_trace = true;
    std::string ra;
    std::string rb;
    for (std::string* out : {&ra, &rb}) {
        std::ostringstream os;
        const RingResult r = run_ring(rs, DynamicsParams{}, ControllerSet{});
        write_trace_csv(os, r.trace, "h");
        write_counters_csv(os, r.counters, "h");
        *out = os.str();
    }
    const bool ok = a == b && ra == rb && !a.empty() && !ra.empty();
    return {ok, fmt::format("single {} bytes, ring {} bytes", a.size(), ra.size())};
}

Outcome criterion9()
{
    const Trace acc = run_single_platoon(default_scenario(ScenarioKind::Sinusoidal, parse_config("-AAA")),
                                         DynamicsParams{}, ControllerSet{});
    const AnalysisRule rule = analysis_rule(default_scenario(ScenarioKind::Sinusoidal, parse_config("-AAA")));
    const auto eta_of = [&](const char* cfg) {
        const Trace t = run_single_platoon(default_scenario(ScenarioKind::Sinusoidal, parse_config(cfg)),
                                           DynamicsParams{}, ControllerSet{});
        return eta(t, acc, rule);
    };
    const double lll = eta_of("-LLL");
    const double ppp = eta_of("-PPP");
    const bool ok = lll >= kEtaLllLow && lll <= kEtaLllHigh && ppp >= kEtaPppLow && ppp <= kEtaPppHigh;
    return {ok, fmt::format("eta(-LLL) = {:.3f}, eta(-PPP) = {:.3f}", lll, ppp)};
}

bool has_g_next_to_other(const std::string& cfg)
{
    for (std::size_t i = 1; i + 1 < cfg.size(); ++i) {
        const char a = cfg[i];
        const char b = cfg[i + 1];
        if ((a == 'G' && (b == 'L' || b == 'P')) || (b == 'G' && (a == 'L' || a == 'P'))) {
            return true;
        }
    }
    return false;
}

Outcome criterion10(const SingleSweep& braking)
{
    int runs = 0;
    int collided = 0;
    double min_gap = 1e9;
    for (const auto* set : {&braking.mixed, &braking.baselines}) {
        for (const auto& r : *set) {
            ++runs;
            collided += r.collided || !r.error.empty() ? 1 : 0;
            min_gap = std::min(min_gap, r.min_gap);
        }
    }
    const bool ok = runs == 31 && collided == 0 && min_gap > kMinGapFloor;
    return {ok, fmt::format("{} runs, {} collided, min gap {:.3f} m", runs, collided, min_gap)};
}

Outcome criterion11(const SingleSweep& sinus)
{
    int positive = 0;
    double max_da = -1e9;
    for (const auto& r : sinus.mixed) {
        max_da = std::max(max_da, r.report.comfort.value);
        positive += r.report.comfort.value > kDeltaASignTol ? 1 : 0;
    }
    const WorstCase w = worst_case(sinus.mixed);
    const bool have = w.worst_comfort != nullptr && w.worst_safety != nullptr;
    const std::string wa = have ? w.worst_comfort->report.config : "?";
    const std::string wd = have ? w.worst_safety->report.config : "?";
    const bool ok = have && positive == 0 && has_g_next_to_other(wa) && has_g_next_to_other(wd);
    return {ok, fmt::format("max delta_a = {:.4f}, worst delta_a {} , worst delta_d {}", max_da, wa, wd)};
}

std::vector<RingRecord> run_cells(const ExperimentSpec& spec, const std::vector<RingCell>& cells,
                                  const std::vector<std::uint64_t>& seeds)
{
    std::vector<std::future<RingRecord>> jobs;
    for (const auto& c : cells) {
        for (auto s : seeds) {
            jobs.push_back(std::async(std::launch::async, [&spec, c, s] { return evaluate_ring(spec, c, s); }));
        }
    }
    std::vector<RingRecord> out;
    for (auto& j : jobs) {
        out.push_back(j.get());
    }
    return out;
}

RingCell platoon_cell(double density, PlatoonPolicy policy)
{
    RingCell c;
    c.density = density;
    c.platoons = true;
    c.policy = policy;
    c.platoon_size = kRingPlatoonSize;
    c.penetration = kRingPenetration;
    return c;
}

RingCell baseline_cell(double density, BaselinePolicy b)
{
    RingCell c;
    c.density = density;
    c.baseline = b;
    return c;
}

Outcome criterion12()
{
    const ExperimentSpec spec;
    const std::vector<RingCell> cells{platoon_cell(kRingDensity, PlatoonPolicy::AllP),
                                      platoon_cell(kRingDensity, PlatoonPolicy::RandomMix),
                                      platoon_cell(kRingDensity, PlatoonPolicy::AllL),
                                      baseline_cell(kRingDensity, BaselinePolicy::Acc)};
    std::vector<std::uint64_t> seeds;
    for (int s = 1; s <= kRingSeeds; ++s) {
        seeds.push_back(static_cast<std::uint64_t>(s));
    }
    const auto recs = run_cells(spec, cells, seeds);
    std::vector<MeanCi> ci;
    int collided = 0;
    for (std::size_t c = 0; c < cells.size(); ++c) {
        std::vector<double> v;
        for (std::size_t s = 0; s < seeds.size(); ++s) {
            const auto& r = recs[c * seeds.size() + s];
            if (r.collided || !r.error.empty()) {
                ++collided;
            } else {
                v.push_back(r.mean_throughput);
            }
        }
        ci.push_back(mean_confidence(v, spec.confidence));
    }
    // ordered, or indistinguishable at the stated confidence
    bool ok = collided == 0;
    std::string detail;
    const char* names[] = {"AllP", "RandomMix", "AllL", "ACC"};
    for (std::size_t i = 0; i < ci.size(); ++i) {
        detail += fmt::format("{} {:.0f} [{:.0f}, {:.0f}] ", names[i], ci[i].mean, ci[i].low, ci[i].high);
        if (i + 1 < ci.size()) {
            const bool ordered = ci[i].mean >= ci[i + 1].mean;
            const bool overlap = ci[i].high >= ci[i + 1].low && ci[i + 1].high >= ci[i].low;
            ok = ok && (ordered || overlap);
        }
    }
    return {ok, detail + fmt::format("collided {}", collided)};
}

Outcome criterion13()
{
    const ExperimentSpec spec;
    const std::vector<RingCell> cells{baseline_cell(kVolatilityDensity, BaselinePolicy::Idm),
                                      baseline_cell(kVolatilityDensity, BaselinePolicy::Acc),
                                      platoon_cell(kVolatilityDensity, PlatoonPolicy::AllP),
                                      platoon_cell(kVolatilityDensity, PlatoonPolicy::AllL),
                                      platoon_cell(kVolatilityDensity, PlatoonPolicy::AllG),
                                      platoon_cell(kVolatilityDensity, PlatoonPolicy::RandomMix)};
    const auto recs = run_cells(spec, cells, {1});
    std::vector<double> medians;
    bool clean = true;
    for (const auto& r : recs) {
        clean = clean && !r.collided && r.error.empty();
        medians.push_back(box_stats(r.volatility).median);
    }
    bool ok = clean && medians[0] > medians[1];
    std::string detail = fmt::format("IDM {:.4f} ACC {:.4f}", medians[0], medians[1]);
    for (std::size_t i = 1; i < medians.size(); ++i) {
        ok = ok && medians[i] <= kNonIdmMedianCap;
        if (i >= 2) {
            detail += fmt::format(" {} {:.4f}", cells[i].policy_label(), medians[i]);
        }
    }
    return {ok, detail + (clean ? "" : " (collision or spawn error)")};
}

Outcome criterion14(const SingleSweep& sinus, const SingleSweep& braking)
{
    const ExperimentSpec spec;
    const RingSweep dry = sweep_ring(spec, SweepOptions{}, true);
    const bool ok = sinus.mixed.size() == 27 && sinus.baselines.size() == 4 && braking.mixed.size() == 27
                    && braking.baselines.size() == 4 && dry.cells.size() == 380 && dry.planned == 3800;
    return {ok, fmt::format("sinusoidal {}+{}, braking {}+{}, ring cells {}, runs {}", sinus.mixed.size(),
                            sinus.baselines.size(), braking.mixed.size(), braking.baselines.size(), dry.cells.size(),
                            dry.planned)};
}

}  // namespace

int main()
{
    const ExperimentSpec spec;
    SweepOptions opt;
    opt.jobs = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    const SingleSweep sinus = sweep_single(spec, 4, ScenarioKind::Sinusoidal, opt);
    const SingleSweep braking = sweep_single(spec, 4, ScenarioKind::Braking, opt);

    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"connectivity matrices", criterion1},
        {"egoLeader election", criterion2},
        {"homogeneous delta_d is zero", criterion3},
        {"steady-state gaps", criterion4},
        {"actuation-lag step response", criterion5},
        {"PATH gains", criterion6},
        {"GSBL mode transitions", criterion7},
        {"determinism", criterion8},
        {"sinusoidal efficiency", criterion9},
        {"braking without collision", [&] { return criterion10(braking); }},
        {"sign structure of the worst cases", [&] { return criterion11(sinus); }},
        {"ring throughput ordering", criterion12},
        {"speed volatility", criterion13},
        {"sweep accounting", [&] { return criterion14(sinus, braking); }},
    };
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        failed += o.pass ? 0 : 1;
        std::cout << fmt::format("criterion {:2d} {:<36} {}  {}", i + 1, criteria[i].first, o.pass ? "PASS" : "FAIL",
                                 o.detail)
                  << std::endl;
    }
    std::cout << fmt::format("{} of {} criteria passed", criteria.size() - static_cast<std::size_t>(failed),
                             criteria.size())
              << std::endl;
    return failed == 0 ? 0 : 1;
}
