#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>

#include "mixplat/experiment.hpp"
#include "mixplat/metrics.hpp"
#include "mixplat/report.hpp"
#include "mixplat/sweep.hpp"

namespace fs = std::filesystem;
using namespace mixplat;

namespace {

constexpr int kOk = 0;
constexpr int kConfigError = 2;
constexpr int kCollision = 3;
constexpr int kPartial = 4;

struct Common {
    std::string config_file;
    std::vector<std::string> sets;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    std::optional<int> jobs;
    std::optional<double> dt;
    std::optional<double> duration;
};

// "section.key=value"; the key itself may not contain '.'.
void apply_set(ExperimentSpec& spec, const std::string& assignment)
{
    const auto eq = assignment.find('=');
    const auto dot = assignment.rfind('.', eq);
    if (eq == std::string::npos || dot == std::string::npos || dot == 0) {
        throw ConfigError(fmt::format("--set expects section.key=value, got '{}'", assignment));
    }
    set_spec_value(spec, assignment.substr(0, dot), assignment.substr(dot + 1, eq - dot - 1), assignment.substr(eq + 1));
}

ExperimentSpec resolve(const Common& c, ExperimentKind kind)
{
    ExperimentSpec spec = c.config_file.empty() ? default_spec() : load_spec(c.config_file);
    for (const auto& s : c.sets) {
        apply_set(spec, s);
    }
    spec.kind = kind;
    if (c.seed) spec.seed = *c.seed;
    if (c.out) spec.output = *c.out;
    if (c.jobs) spec.jobs = *c.jobs;
    if (c.dt) {
        // per-step control follows the integration step
        if (spec.ctrl.control_period == spec.dyn.dt) {
            spec.ctrl.control_period = *c.dt;
        }
        spec.dyn.dt = *c.dt;
    }
    if (c.duration) {
        if (kind == ExperimentKind::Ring || kind == ExperimentKind::SweepRing) {
            spec.ring.duration = *c.duration;
        } else {
            spec.duration = *c.duration;
        }
    }
    spec.ring.seed = spec.seed;
    spec.validate();
    try {
        spec.dyn.validate();
    } catch (const InvalidInput& e) {
        throw ConfigError(e.what());
    }
    return spec;
}

std::string persist_spec(const ExperimentSpec& spec)
{
    const std::string hash = spec_hash(spec);
    write_file_atomic(fs::path(spec.output) / "spec.ini", fmt::format("; spec_hash={}\n{}", hash, write_spec(spec)));
    return hash;
}

template <typename Writer, typename... Args>
void write_csv(const fs::path& path, Writer&& w, Args&&... args)
{
    std::ostringstream os;
    w(os, std::forward<Args>(args)...);
    write_file_atomic(path, os.str());
}

int run_single(const ExperimentSpec& spec)
{
    const std::string hash = persist_spec(spec);
    const fs::path out(spec.output);
    const PlatoonConfig cfg = parse_config(spec.config);
    const SingleScenario scn = single_scenario(spec, cfg, spec.scenario);
    scn.validate();

    const Trace trace = run_single_platoon(scn, spec.dyn, spec.ctrl);
    write_csv(out / "trace.csv", write_trace_csv, trace, hash);
    write_csv(out / "events.csv", write_events_csv, trace.events, hash);

    const int n = static_cast<int>(cfg.size());
    const SingleBaselines base = run_baselines(spec, n, spec.scenario);
    const SingleRecord rec = evaluate_single(spec, cfg, spec.scenario, base);
    write_file_atomic(out / "report.json", single_record_json(rec, hash));

    if (trace.terminated_by_collision) {
        std::cout << fmt::format("{} {}: collision at t={:.2f}\n", spec.config, scenario_name(spec.scenario),
                                 trace.time.back());
        return kCollision;
    }
    if (rec.error.empty()) {
        std::cout << fmt::format("{} {}: delta_a={:.3f} (V{}) delta_d={:.3f} (V{}) eta={:.3f} min_gap={:.3f}\n",
                                 spec.config, scenario_name(spec.scenario), rec.report.comfort.value,
                                 rec.report.comfort.vehicle, rec.report.safety.value, rec.report.safety.vehicle,
                                 rec.report.eta, rec.min_gap);
    } else {
        std::cout << fmt::format("{} {}: metrics unavailable: {}\n", spec.config, scenario_name(spec.scenario),
                                 rec.error);
    }
    return kOk;
}

int run_ring_once(const ExperimentSpec& spec)
{
    const std::string hash = persist_spec(spec);
    const fs::path out(spec.output);
    const RingSpec& rs = spec.ring;
    const RingResult res = run_ring(rs, spec.dyn, spec.ctrl);

    write_csv(out / "counters.csv", write_counters_csv, res.counters, hash);
    write_csv(out / "events.csv", write_events_csv, res.trace.events, hash);
    if (rs.record_trace) {
        write_csv(out / "trace.csv", write_trace_csv, res.trace, hash);
    }

    nlohmann::json j;
    j["spec_hash"] = hash;
    j["vehicles"] = res.vehicle_count;
    j["collided"] = res.terminated_by_collision;
    j["end_time"] = res.end_time;
    j["lane_changes"] = res.lane_changes;
    double mean_thr = 0.0;
    if (!res.terminated_by_collision) {
        const ThroughputSeries th = throughput_series(res.counters, spec.throughput_window, rs.warmup,
                                                      rs.warmup + rs.duration);
        mean_thr = th.mean;
        j["mean_throughput"] = th.mean;
        j["throughput"] = th.overall;
        std::size_t skipped = 0;
        const auto vol = volatility_all(res.speed_samples, &skipped);
        j["volatility_skipped"] = skipped;
        if (!vol.empty()) {
            const BoxStats b = box_stats(vol);
            j["volatility"] = {{"count", b.count},       {"q1", b.q1},
                               {"median", b.median},     {"q3", b.q3},
                               {"whisker_low", b.whisker_low}, {"whisker_high", b.whisker_high},
                               {"outliers", b.outliers.size()}};
        }
    }
    write_file_atomic(out / "summary.json", j.dump(2) + "\n");

    if (res.terminated_by_collision) {
        std::cout << fmt::format("ring: collision at t={:.2f} with {} vehicles\n", res.end_time, res.vehicle_count);
        return kCollision;
    }
    std::cout << fmt::format("ring: {} vehicles, mean throughput {:.1f} veh/h, {} lane changes\n", res.vehicle_count,
                             mean_thr, res.lane_changes);
    return kOk;
}

int run_sweep_single(const ExperimentSpec& spec, long limit)
{
    const std::string hash = persist_spec(spec);
    const fs::path out(spec.output);
    std::vector<SingleSweep> sweeps;
    bool partial = false;
    long budget = limit;
    for (int n : spec.sweep_sizes) {
        for (auto kind : spec.sweep_scenarios) {
            SweepOptions opt;
            opt.store = single_store(out, n, kind);
            opt.jobs = spec.jobs;
            opt.max_new_runs = budget;
            SingleSweep s = sweep_single(spec, n, kind, opt);
            if (budget >= 0) {
                budget = std::max(0L, budget - s.fresh_runs);
            }
            std::cout << fmt::format("N={} {}: {} mixes ({} run, {} resumed), {} baselines{}\n", n,
                                     scenario_name(kind), s.mixed.size(), s.fresh_runs, s.resumed, s.baselines.size(),
                                     s.partial ? ", incomplete" : "");
            partial = partial || s.partial;
            sweeps.push_back(std::move(s));
        }
    }
    emit_single_reports(out, sweeps, hash);
    return partial ? kPartial : kOk;
}

int run_sweep_ring(const ExperimentSpec& spec, bool dry_run, long limit)
{
    const std::string hash = persist_spec(spec);
    const fs::path out(spec.output);
    SweepOptions opt;
    opt.store = out / "runs" / "ring";
    opt.jobs = spec.jobs;
    opt.max_new_runs = limit;
    const RingSweep sweep = sweep_ring(spec, opt, dry_run);
    if (dry_run) {
        write_file_atomic(out / "ring_plan.txt", ring_dry_run_text(sweep, hash));
        std::cout << fmt::format("{} cells, {} runs planned\n", sweep.cells.size(), sweep.planned);
        return kOk;
    }
    emit_ring_reports(out, sweep, hash);
    long collided = 0;
    for (const auto& r : sweep.records) {
        collided += r.collided ? 1 : 0;
    }
    std::cout << fmt::format("{} cells: {} of {} runs present ({} run, {} resumed), {} collided\n", sweep.cells.size(),
                             sweep.records.size(), sweep.planned, sweep.fresh_runs, sweep.resumed, collided);
    return sweep.partial ? kPartial : kOk;
}

int run_matrix(const ExperimentSpec& spec)
{
    const std::string hash = persist_spec(spec);
    emit_matrix_reports(spec.output, spec.matrix_configs, hash);
    for (const auto& cfg : spec.matrix_configs) {
        std::cout << matrix_text(parse_config(cfg), hash) << "\n";
    }
    return kOk;
}

// Rebuilds reports from whatever the stores under the output directory hold.
int run_report(const ExperimentSpec& spec)
{
    const std::string hash = spec_hash(spec);
    const fs::path out(spec.output);
    bool partial = false;
    bool any = false;
    if (fs::exists(out / "runs")) {
        bool have_single = false;
        for (int n : spec.sweep_sizes) {
            for (auto kind : spec.sweep_scenarios) {
                have_single = have_single || fs::exists(single_store(out, n, kind));
            }
        }
        if (have_single) {
            const auto sweeps = load_single_sweeps(out, spec);
            for (const auto& s : sweeps) {
                partial = partial || s.partial;
            }
            emit_single_reports(out, sweeps, hash);
            any = true;
        }
        if (fs::exists(out / "runs" / "ring")) {
            const RingSweep sweep = load_ring_sweep(out / "runs" / "ring", spec);
            partial = partial || sweep.partial;
            emit_ring_reports(out, sweep, hash);
            any = true;
        }
    }
    emit_matrix_reports(out, spec.matrix_configs, hash);
    if (!any) {
        std::cout << "no sweep results found; wrote connectivity matrices only\n";
    }
    return partial ? kPartial : kOk;
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Mixed-controller platoon simulator"};
    app.require_subcommand(1);
    app.fallthrough();

    Common c;
    app.add_option("--config", c.config_file, "experiment config file")->check(CLI::ExistingFile);
    app.add_option("--set", c.sets, "override one value, section.key=value (repeatable)");
    app.add_option("--seed", c.seed, "master seed");
    app.add_option("--out", c.out, "output directory");
    app.add_option("--jobs", c.jobs, "worker threads")->check(CLI::PositiveNumber);
    app.add_option("--dt", c.dt, "integration step [s]");
    app.add_option("--duration", c.duration, "simulated time [s]");

    auto* single = app.add_subcommand("single", "one platoon run");
    std::optional<std::string> platoon;
    std::optional<std::string> scenario;
    bool head_only = false;
    single->add_option("--platoon", platoon, "configuration string, e.g. -PLPP");
    single->add_option("--scenario", scenario, "sinusoidal or braking");
    single->add_flag("--head-only", head_only, "followers reference the head instead of their elected leader");

    auto* ring = app.add_subcommand("ring", "one ring-road run");
    std::optional<double> density;
    std::optional<int> size;
    std::optional<double> penetration;
    std::optional<std::string> policy;
    std::optional<std::string> model;
    bool trace = false;
    ring->add_option("--density", density, "vehicles per km");
    ring->add_option("--size", size, "platoon size N");
    ring->add_option("--penetration", penetration, "platooned share R");
    ring->add_option("--policy", policy, "AllP, AllL, AllG or RandomMix");
    ring->add_option("--model", model, "non-platooned vehicles: ACC or IDM");
    ring->add_flag("--trace", trace, "write the sampled per-vehicle trace");

    auto* sweep_s = app.add_subcommand("sweep-single", "all or sampled mixes per size and scenario");
    std::optional<std::string> sizes;
    std::optional<std::string> scenarios;
    long limit = -1;
    sweep_s->add_option("--sizes", sizes, "platoon sizes, comma separated");
    sweep_s->add_option("--scenarios", scenarios, "scenarios, comma separated");
    sweep_s->add_option("--limit", limit, "stop after this many new runs");

    auto* sweep_r = app.add_subcommand("sweep-ring", "density x policy x N x R grid");
    std::optional<std::string> densities;
    std::optional<int> repetitions;
    bool dry_run = false;
    sweep_r->add_option("--densities", densities, "densities, comma separated");
    sweep_r->add_option("--repetitions", repetitions, "seeds per cell");
    sweep_r->add_option("--limit", limit, "stop after this many new runs");
    sweep_r->add_flag("--dry-run", dry_run, "list cells without running");

    auto* matrix = app.add_subcommand("matrix", "connectivity matrices");
    std::optional<std::string> configs;
    matrix->add_option("--configs", configs, "configuration strings, comma separated");

    auto* report = app.add_subcommand("report", "rebuild reports from stored runs");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kOk : kConfigError;
    }

    try {
        if (single->parsed()) {
            if (platoon) c.sets.push_back("single.config=" + *platoon);
            if (scenario) c.sets.push_back("single.scenario=" + *scenario);
            if (head_only) c.sets.push_back("single.elect_leaders=false");
            return run_single(resolve(c, ExperimentKind::Single));
        }
        if (ring->parsed()) {
            if (density) c.sets.push_back(fmt::format("ring.D_v={}", *density));
            if (size) c.sets.push_back(fmt::format("ring.N={}", *size));
            if (penetration) c.sets.push_back(fmt::format("ring.R={}", *penetration));
            if (policy) c.sets.push_back("ring.controller=" + *policy);
            if (model) c.sets.push_back("ring.model=" + *model);
            if (trace) c.sets.push_back("ring.record_trace=true");
            return run_ring_once(resolve(c, ExperimentKind::Ring));
        }
        if (sweep_s->parsed()) {
            if (sizes) c.sets.push_back("sweep-single.sizes=" + *sizes);
            if (scenarios) c.sets.push_back("sweep-single.scenarios=" + *scenarios);
            return run_sweep_single(resolve(c, ExperimentKind::SweepSingle), limit);
        }
        if (sweep_r->parsed()) {
            if (densities) c.sets.push_back("mobility.D_v=" + *densities);
            if (repetitions) c.sets.push_back(fmt::format("mobility.repetitions={}", *repetitions));
            return run_sweep_ring(resolve(c, ExperimentKind::SweepRing), dry_run, limit);
        }
        if (matrix->parsed()) {
            if (configs) c.sets.push_back("matrix.configs=" + *configs);
            return run_matrix(resolve(c, ExperimentKind::Matrix));
        }
        if (report->parsed()) {
            // the stored spec decides which hash the runs must carry
            if (c.config_file.empty()) {
                const fs::path stored = fs::path(c.out.value_or(default_spec().output)) / "spec.ini";
                if (fs::exists(stored)) {
                    c.config_file = stored.string();
                }
            }
            ExperimentSpec spec = c.config_file.empty() ? default_spec() : load_spec(c.config_file);
            for (const auto& s : c.sets) {
                apply_set(spec, s);
            }
            if (c.out) spec.output = *c.out;
            spec.validate();
            return run_report(spec);
        }
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kConfigError;
    } catch (const ConfigParseError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kConfigError;
    } catch (const InvalidInput& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kConfigError;
    } catch (const SpawnError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kConfigError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return kOk;
}
