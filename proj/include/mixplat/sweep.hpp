#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mixplat/experiment.hpp"
#include "mixplat/metrics.hpp"
#include "mixplat/ring.hpp"

namespace mixplat {

// ---------------------------------------------------------------------------
// Single-platoon sweeps

/// Every "-" + follower string over {G, L, P}, in lexicographic order.
std::vector<PlatoonConfig> enumerate_mixes(int n);

/// `count` distinct mixes drawn uniformly with one master seed, in draw order.
std::vector<PlatoonConfig> sample_mixes(int n, int count, std::uint64_t seed);

/// Exhaustive up to spec.exhaustive_limit vehicles, sampled above it.
std::vector<PlatoonConfig> sweep_configs(const ExperimentSpec& spec, int n);

/// The four reference strings: all-ACC, then homogeneous PATH, Ploeg, GSBL.
std::vector<PlatoonConfig> baseline_configs(int n);

AnalysisRule analysis_rule(const SingleScenario& s);

/// One evaluated configuration. Collided runs carry no metric values.
struct SingleRecord {
    MetricReport report;
    bool collided = false;
    double min_gap = 0.0;
    std::string error;  ///< set when the run could not be evaluated
};

/// Homogeneous reference traces of one (N, scenario) pair.
struct SingleBaselines {
    Trace acc;
    std::map<char, Trace> homogeneous;  ///< keyed by P, L, G
};

SingleBaselines run_baselines(const ExperimentSpec& spec, int n, ScenarioKind kind);

SingleRecord evaluate_single(const ExperimentSpec& spec, const PlatoonConfig& config, ScenarioKind kind,
                             const SingleBaselines& baselines);

struct SweepOptions {
    std::optional<std::filesystem::path> store;  ///< per-run results, enables resume
    int jobs = 1;
    long max_new_runs = -1;  ///< stop after this many fresh runs (-1: no limit)
};

struct SingleSweep {
    int n = 4;
    ScenarioKind scenario = ScenarioKind::Sinusoidal;
    std::vector<SingleRecord> mixed;      ///< sweep_configs order
    std::vector<SingleRecord> baselines;  ///< baseline_configs order
    long fresh_runs = 0;
    long resumed = 0;
    bool partial = false;  ///< some configurations are missing
};

SingleSweep sweep_single(const ExperimentSpec& spec, int n, ScenarioKind kind, const SweepOptions& opt);

/// Worst-case table rows: worst delta_a, worst delta_d, best eta.
struct WorstCase {
    const SingleRecord* worst_comfort = nullptr;
    const SingleRecord* worst_safety = nullptr;
    const SingleRecord* best_efficiency = nullptr;
};

/// Over the mixed records; `exclude_gsbl` restricts to PATH/Ploeg mixes.
WorstCase worst_case(const std::vector<SingleRecord>& records, bool exclude_gsbl = false);

// ---------------------------------------------------------------------------
// Ring sweeps

struct RingCell {
    double density = 10.0;
    BaselinePolicy baseline = BaselinePolicy::Acc;
    bool platoons = false;
    PlatoonPolicy policy = PlatoonPolicy::AllP;
    int platoon_size = 0;
    double penetration = 0.0;

    /// "IDM" / "ACC" for the baselines, the platoon policy otherwise.
    std::string policy_label() const;
    std::string id() const;
};

/// Per density: the baselines, then policy x N x R platoon cells.
std::vector<RingCell> ring_grid(const ExperimentSpec& spec);

RingSpec ring_spec_for(const ExperimentSpec& spec, const RingCell& cell, std::uint64_t seed);

struct RingRecord {
    RingCell cell;
    std::uint64_t seed = 0;
    bool collided = false;
    double end_time = 0.0;
    double mean_throughput = 0.0;
    std::vector<double> throughput;  ///< overall series, veh/h per window
    std::vector<double> volatility;  ///< one value per vehicle with a defined series
    long lane_changes = 0;
    std::string error;
};

RingRecord evaluate_ring(const ExperimentSpec& spec, const RingCell& cell, std::uint64_t seed);

struct RingCellSummary {
    RingCell cell;
    int runs = 0;
    int collided = 0;
    int missing = 0;
    double mean_throughput = 0.0;
    double ci_low = 0.0;
    double ci_high = 0.0;
    BoxStats volatility;
};

/// Student-t interval of the mean; a single value gives a zero-width interval.
struct MeanCi {
    double mean = 0.0;
    double low = 0.0;
    double high = 0.0;
};
MeanCi mean_confidence(const std::vector<double>& values, double confidence);

/// Collided runs are excluded from means and box statistics but counted.
RingCellSummary summarize_cell(const RingCell& cell, const std::vector<const RingRecord*>& runs, int expected,
                               double confidence);

struct RingSweep {
    std::vector<RingCell> cells;
    std::vector<RingRecord> records;  ///< cell-major, seed-minor
    std::vector<RingCellSummary> summaries;
    long planned = 0;
    long fresh_runs = 0;
    long resumed = 0;
    bool partial = false;
};

/// With `dry_run` only the cell list and run count are produced.
RingSweep sweep_ring(const ExperimentSpec& spec, const SweepOptions& opt, bool dry_run = false);

std::vector<std::uint64_t> repetition_seeds(const ExperimentSpec& spec);

}  // namespace mixplat
