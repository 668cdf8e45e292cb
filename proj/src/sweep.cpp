#include "mixplat/sweep.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <mutex>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <thread>

#include <boost/math/distributions/students_t.hpp>
#include <fmt/format.h>

#include "mixplat/report.hpp"

namespace mixplat {

namespace {

constexpr char kFollowerAlphabet[3] = {'G', 'L', 'P'};

PlatoonConfig from_followers(const std::string& followers)
{
    return parse_config("-" + followers);
}

/// Runs `task(i)` for i in [0, count) on `jobs` threads; each index once.
template <typename F>
void parallel_for(std::size_t count, int jobs, F&& task)
{
    const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(std::max(1, jobs)), count);
    if (workers <= 1) {
        for (std::size_t i = 0; i < count; ++i) {
            task(i);
        }
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    std::exception_ptr failure;
    std::mutex failure_mutex;
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < count; i = next++) {
                try {
                    task(i);
                } catch (...) {
                    std::lock_guard lock(failure_mutex);
                    if (!failure) {
                        failure = std::current_exception();
                    }
                }
            }
        });
    }
    for (auto& t : pool) {
        t.join();
    }
    if (failure) {
        std::rethrow_exception(failure);
    }
}

std::optional<std::string> read_text(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        return std::nullopt;
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

// ---------------------------------------------------------------------------

std::vector<PlatoonConfig> enumerate_mixes(int n)
{
    if (n < 2) {
        throw InvalidInput(fmt::format("enumerate_mixes: platoon size {} below 2", n));
    }
    if (n > 16) {
        throw InvalidInput(fmt::format("enumerate_mixes: 3^{} mixes is too many to enumerate", n - 1));
    }
    const int followers = n - 1;
    long total = 1;
    for (int i = 0; i < followers; ++i) {
        total *= 3;
    }
    std::vector<PlatoonConfig> out;
    out.reserve(static_cast<std::size_t>(total));
    std::string s(static_cast<std::size_t>(followers), 'G');
    for (long m = 0; m < total; ++m) {
        long x = m;
        for (int pos = followers - 1; pos >= 0; --pos) {
            s[static_cast<std::size_t>(pos)] = kFollowerAlphabet[x % 3];
            x /= 3;
        }
        out.push_back(from_followers(s));
    }
    return out;
}

std::vector<PlatoonConfig> sample_mixes(int n, int count, std::uint64_t seed)
{
    if (n < 2 || count < 0) {
        throw InvalidInput("sample_mixes: need n >= 2 and a non-negative count");
    }
    const double space = std::pow(3.0, n - 1);
    if (static_cast<double>(count) > space) {
        throw InvalidInput(fmt::format("sample_mixes: {} distinct mixes requested but only {} exist", count, space));
    }
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> pick(0, 2);
    std::set<std::string> seen;
    std::vector<PlatoonConfig> out;
    while (static_cast<int>(out.size()) < count) {
        std::string s;
        for (int i = 1; i < n; ++i) {
            s.push_back(kFollowerAlphabet[pick(rng)]);
        }
        if (seen.insert(s).second) {
            out.push_back(from_followers(s));
        }
    }
    return out;
}

std::vector<PlatoonConfig> sweep_configs(const ExperimentSpec& spec, int n)
{
    if (n <= spec.exhaustive_limit) {
        return enumerate_mixes(n);
    }
    return sample_mixes(n, spec.sample_count, spec.seed);
}

std::vector<PlatoonConfig> baseline_configs(int n)
{
    std::vector<PlatoonConfig> out;
    for (auto c : {Controller::Acc, Controller::Path, Controller::Ploeg, Controller::Gsbl}) {
        out.push_back(homogeneous_config(c, static_cast<std::size_t>(n)));
    }
    return out;
}

AnalysisRule analysis_rule(const SingleScenario& s)
{
    if (s.kind == ScenarioKind::Braking) {
        return AnalysisRule::braking();
    }
    return AnalysisRule::fixed(s.warmup, s.duration);
}

SingleBaselines run_baselines(const ExperimentSpec& spec, int n, ScenarioKind kind)
{
    SingleBaselines b;
    const auto configs = baseline_configs(n);
    b.acc = run_single_platoon(single_scenario(spec, configs[0], kind), spec.dyn, spec.ctrl);
    for (std::size_t k = 1; k < configs.size(); ++k) {
        const char label = to_char(configs[k][1]);
        b.homogeneous[label] = run_single_platoon(single_scenario(spec, configs[k], kind), spec.dyn, spec.ctrl);
    }
    return b;
}

SingleRecord evaluate_single(const ExperimentSpec& spec, const PlatoonConfig& config, ScenarioKind kind,
                             const SingleBaselines& baselines)
{
    SingleRecord rec;
    rec.report.config = format_config(config);
    rec.report.scenario = std::string(scenario_name(kind));
    const SingleScenario s = single_scenario(spec, config, kind);
    const AnalysisRule rule = analysis_rule(s);

    const Trace trace = run_single_platoon(s, spec.dyn, spec.ctrl);
    rec.collided = trace.terminated_by_collision;
    if (trace.vehicles() > 1 && trace.ticks() > 0) {
        rec.min_gap = trace.gap.rightCols(trace.vehicles() - 1).minCoeff();
    }
    if (rec.collided) {
        rec.error = "collision";
        return rec;
    }
    if (baselines.acc.terminated_by_collision) {
        rec.error = "all-ACC baseline collided";
        return rec;
    }
    std::map<char, const Trace*> homogeneous;
    for (const auto& [label, t] : baselines.homogeneous) {
        if (!t.terminated_by_collision) {
            homogeneous[label] = &t;
        }
    }
    homogeneous['A'] = &baselines.acc;
    try {
        rec.report.comfort = delta_a(trace, baselines.acc, rule);
        rec.report.safety = delta_d(trace, homogeneous, rule);
        rec.report.eta = eta(trace, baselines.acc, rule);
        rec.report.window = resolve_window(trace, rule);
    } catch (const MetricError& e) {
        rec.error = e.what();
    }
    return rec;
}

SingleSweep sweep_single(const ExperimentSpec& spec, int n, ScenarioKind kind, const SweepOptions& opt)
{
    SingleSweep sweep;
    sweep.n = n;
    sweep.scenario = kind;
    const auto mixes = sweep_configs(spec, n);
    const auto bases = baseline_configs(n);
    const std::string hash = spec_hash(spec);

    const SingleBaselines baselines = run_baselines(spec, n, kind);
    for (const auto& cfg : bases) {
        sweep.baselines.push_back(evaluate_single(spec, cfg, kind, baselines));
        if (opt.store) {
            write_file_atomic(*opt.store / fmt::format("b{}.json", format_config(cfg)),
                              single_record_json(sweep.baselines.back(), hash));
        }
    }

    auto run_path = [&](const PlatoonConfig& cfg) {
        return *opt.store / fmt::format("c{}.json", format_config(cfg));
    };

    sweep.mixed.resize(mixes.size());
    std::vector<char> have(mixes.size(), 0);
    if (opt.store) {
        for (std::size_t i = 0; i < mixes.size(); ++i) {
            if (auto text = read_text(run_path(mixes[i]))) {
                std::string stored_hash;
                try {
                    SingleRecord rec = single_record_from_json(*text, &stored_hash);
                    if (stored_hash == hash && rec.report.config == format_config(mixes[i])) {
                        sweep.mixed[i] = std::move(rec);
                        have[i] = 1;
                        ++sweep.resumed;
                    }
                } catch (const std::exception&) {
                    // unreadable partial result: run it again
                }
            }
        }
    }

    std::vector<std::size_t> todo;
    for (std::size_t i = 0; i < mixes.size(); ++i) {
        if (!have[i]) {
            todo.push_back(i);
        }
    }
    if (opt.max_new_runs >= 0 && static_cast<long>(todo.size()) > opt.max_new_runs) {
        todo.resize(static_cast<std::size_t>(opt.max_new_runs));
        sweep.partial = true;
    }

    parallel_for(todo.size(), opt.jobs, [&](std::size_t k) {
        const std::size_t i = todo[k];
        SingleRecord rec;
        try {
            rec = evaluate_single(spec, mixes[i], kind, baselines);
        } catch (const std::exception& e) {
            rec.report.config = format_config(mixes[i]);
            rec.report.scenario = std::string(scenario_name(kind));
            rec.error = e.what();
        }
        if (opt.store) {
            write_file_atomic(run_path(mixes[i]), single_record_json(rec, hash));
        }
        sweep.mixed[i] = std::move(rec);
        have[i] = 1;
    });
    sweep.fresh_runs = static_cast<long>(todo.size());

    // keep only evaluated entries, in sweep order
    std::vector<SingleRecord> done;
    for (std::size_t i = 0; i < mixes.size(); ++i) {
        if (have[i]) {
            done.push_back(std::move(sweep.mixed[i]));
        } else {
            sweep.partial = true;
        }
    }
    sweep.mixed = std::move(done);
    return sweep;
}

WorstCase worst_case(const std::vector<SingleRecord>& records, bool exclude_gsbl)
{
    WorstCase w;
    for (const auto& r : records) {
        if (r.collided || !r.error.empty()) {
            continue;
        }
        if (exclude_gsbl && r.report.config.find('G') != std::string::npos) {
            continue;
        }
        if (!w.worst_comfort || r.report.comfort.value < w.worst_comfort->report.comfort.value) {
            w.worst_comfort = &r;
        }
        if (!w.worst_safety || r.report.safety.value < w.worst_safety->report.safety.value) {
            w.worst_safety = &r;
        }
        if (!w.best_efficiency || r.report.eta > w.best_efficiency->report.eta) {
            w.best_efficiency = &r;
        }
    }
    return w;
}

// ---------------------------------------------------------------------------

std::string RingCell::policy_label() const
{
    return platoons ? std::string(policy_name(policy)) : std::string(baseline_name(baseline));
}

std::string RingCell::id() const
{
    if (!platoons) {
        return fmt::format("D{}_{}", density, baseline_name(baseline));
    }
    return fmt::format("D{}_{}_N{}_R{}", density, policy_name(policy), platoon_size, penetration);
}

std::vector<RingCell> ring_grid(const ExperimentSpec& spec)
{
    std::vector<RingCell> cells;
    for (double d : spec.densities) {
        for (auto b : spec.baselines) {
            RingCell c;
            c.density = d;
            c.baseline = b;
            cells.push_back(c);
        }
        for (auto p : spec.policies) {
            for (int n : spec.platoon_sizes) {
                for (double r : spec.penetrations) {
                    RingCell c;
                    c.density = d;
                    c.baseline = BaselinePolicy::Acc;
                    c.platoons = true;
                    c.policy = p;
                    c.platoon_size = n;
                    c.penetration = r;
                    cells.push_back(c);
                }
            }
        }
    }
    return cells;
}

RingSpec ring_spec_for(const ExperimentSpec& spec, const RingCell& cell, std::uint64_t seed)
{
    RingSpec r = spec.ring;
    r.density = cell.density;
    r.baseline = cell.baseline;
    r.seed = seed;
    r.record_trace = false;
    if (cell.platoons) {
        r.policy = cell.policy;
        r.platoon_size = cell.platoon_size;
        r.penetration = cell.penetration;
    } else {
        r.penetration = 0.0;
    }
    return r;
}

std::vector<std::uint64_t> repetition_seeds(const ExperimentSpec& spec)
{
    std::vector<std::uint64_t> seeds;
    for (int k = 0; k < spec.repetitions; ++k) {
        seeds.push_back(spec.seed + static_cast<std::uint64_t>(k));
    }
    return seeds;
}

RingRecord evaluate_ring(const ExperimentSpec& spec, const RingCell& cell, std::uint64_t seed)
{
    RingRecord rec;
    rec.cell = cell;
    rec.seed = seed;
    const RingSpec rs = ring_spec_for(spec, cell, seed);
    try {
        const RingResult res = run_ring(rs, spec.dyn, spec.ctrl);
        rec.collided = res.terminated_by_collision;
        rec.end_time = res.end_time;
        rec.lane_changes = res.lane_changes;
        if (!rec.collided) {
            const ThroughputSeries th =
                throughput_series(res.counters, spec.throughput_window, rs.warmup, rs.warmup + rs.duration);
            rec.throughput = th.overall;
            rec.mean_throughput = th.mean;
            rec.volatility = volatility_all(res.speed_samples);
        }
    } catch (const SpawnError& e) {
        rec.error = e.what();
    }
    return rec;
}

MeanCi mean_confidence(const std::vector<double>& values, double confidence)
{
    MeanCi ci;
    if (values.empty()) {
        ci.mean = ci.low = ci.high = std::numeric_limits<double>::quiet_NaN();
        return ci;
    }
    const double n = static_cast<double>(values.size());
    ci.mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
    if (values.size() < 2) {
        ci.low = ci.high = ci.mean;
        return ci;
    }
    double ss = 0.0;
    for (double v : values) {
        ss += (v - ci.mean) * (v - ci.mean);
    }
    const double sd = std::sqrt(ss / (n - 1.0));
    const boost::math::students_t dist(n - 1.0);
    const double t = boost::math::quantile(boost::math::complement(dist, (1.0 - confidence) / 2.0));
    const double half = t * sd / std::sqrt(n);
    ci.low = ci.mean - half;
    ci.high = ci.mean + half;
    return ci;
}

RingCellSummary summarize_cell(const RingCell& cell, const std::vector<const RingRecord*>& runs, int expected,
                               double confidence)
{
    RingCellSummary s;
    s.cell = cell;
    s.runs = static_cast<int>(runs.size());
    s.missing = std::max(0, expected - s.runs);
    std::vector<double> means;
    std::vector<double> vol;
    for (const RingRecord* r : runs) {
        if (r->collided || !r->error.empty()) {
            s.collided += r->collided ? 1 : 0;
            continue;
        }
        means.push_back(r->mean_throughput);
        vol.insert(vol.end(), r->volatility.begin(), r->volatility.end());
    }
    const MeanCi ci = mean_confidence(means, confidence);
    s.mean_throughput = ci.mean;
    s.ci_low = ci.low;
    s.ci_high = ci.high;
    if (!vol.empty()) {
        s.volatility = box_stats(std::move(vol));
    }
    return s;
}

RingSweep sweep_ring(const ExperimentSpec& spec, const SweepOptions& opt, bool dry_run)
{
    RingSweep sweep;
    sweep.cells = ring_grid(spec);
    const auto seeds = repetition_seeds(spec);
    sweep.planned = static_cast<long>(sweep.cells.size() * seeds.size());
    if (dry_run) {
        return sweep;
    }
    const std::string hash = spec_hash(spec);

    struct Job {
        std::size_t cell;
        std::uint64_t seed;
    };
    std::vector<Job> jobs;
    for (std::size_t c = 0; c < sweep.cells.size(); ++c) {
        for (auto s : seeds) {
            jobs.push_back({c, s});
        }
    }
    auto run_path = [&](const Job& j) {
        return *opt.store / fmt::format("{}_s{}.json", sweep.cells[j.cell].id(), j.seed);
    };

    std::vector<std::optional<RingRecord>> results(jobs.size());
    if (opt.store) {
        for (std::size_t i = 0; i < jobs.size(); ++i) {
            if (auto text = read_text(run_path(jobs[i]))) {
                std::string stored_hash;
                try {
                    RingRecord rec = ring_record_from_json(*text, &stored_hash);
                    if (stored_hash == hash) {
                        results[i] = std::move(rec);
                        ++sweep.resumed;
                    }
                } catch (const std::exception&) {
                }
            }
        }
    }
    std::vector<std::size_t> todo;
    for (std::size_t i = 0; i < jobs.size(); ++i) {
        if (!results[i]) {
            todo.push_back(i);
        }
    }
    if (opt.max_new_runs >= 0 && static_cast<long>(todo.size()) > opt.max_new_runs) {
        todo.resize(static_cast<std::size_t>(opt.max_new_runs));
    }
    parallel_for(todo.size(), opt.jobs, [&](std::size_t k) {
        const Job& j = jobs[todo[k]];
        RingRecord rec = evaluate_ring(spec, sweep.cells[j.cell], j.seed);
        if (opt.store) {
            write_file_atomic(run_path(j), ring_record_json(rec, hash));
        }
        results[todo[k]] = std::move(rec);
    });
    sweep.fresh_runs = static_cast<long>(todo.size());

    for (auto& r : results) {
        if (r) {
            sweep.records.push_back(std::move(*r));
        } else {
            sweep.partial = true;
        }
    }
    for (const auto& cell : sweep.cells) {
        std::vector<const RingRecord*> runs;
        for (const auto& r : sweep.records) {
            if (r.cell.id() == cell.id()) {
                runs.push_back(&r);
            }
        }
        sweep.summaries.push_back(summarize_cell(cell, runs, static_cast<int>(seeds.size()), spec.confidence));
    }
    return sweep;
}

}  // namespace mixplat
