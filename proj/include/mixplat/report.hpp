#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "mixplat/sweep.hpp"
#include "mixplat/topology.hpp"

namespace mixplat {

// Persisted run records. Every document carries the spec hash it was
// produced under; the readers hand it back through `spec_hash_out`.

std::string single_record_json(const SingleRecord& rec, const std::string& spec_hash);
SingleRecord single_record_from_json(const std::string& text, std::string* spec_hash_out = nullptr);

std::string ring_record_json(const RingRecord& rec, const std::string& spec_hash);
RingRecord ring_record_from_json(const std::string& text, std::string* spec_hash_out = nullptr);

// Report documents.

/// Worst delta_a, worst delta_d and best eta per sweep, one block per sweep.
std::string single_table_text(const std::vector<SingleSweep>& sweeps, bool exclude_gsbl,
                              const std::string& spec_hash);
/// Every record of every sweep plus the worst-case rows.
std::string single_summary_json(const std::vector<SingleSweep>& sweeps, const std::string& spec_hash);

/// density,policy,N,R,mean_thr,ci_low,ci_high,collided
std::string throughput_csv(const RingSweep& sweep, const std::string& spec_hash);
/// Box statistics of per-vehicle volatility per cell.
std::string volatility_csv(const RingSweep& sweep, const std::string& spec_hash);
/// Collision-terminated runs, one line each.
std::string collision_csv(const RingSweep& sweep, const std::string& spec_hash);
std::string ring_table_text(const RingSweep& sweep, const std::string& spec_hash);
std::string ring_dry_run_text(const RingSweep& sweep, const std::string& spec_hash);

/// Plain grid of C (and C' below it) with header line.
std::string matrix_text(const PlatoonConfig& config, const std::string& spec_hash);
std::string matrix_json(const PlatoonConfig& config, const std::string& spec_hash);

/// Files written by the emitters, relative to the output directory.
struct Emitted {
    std::vector<std::filesystem::path> files;
};

Emitted emit_single_reports(const std::filesystem::path& dir, const std::vector<SingleSweep>& sweeps,
                            const std::string& spec_hash);
Emitted emit_ring_reports(const std::filesystem::path& dir, const RingSweep& sweep, const std::string& spec_hash);
Emitted emit_matrix_reports(const std::filesystem::path& dir, const std::vector<std::string>& configs,
                            const std::string& spec_hash);

/// Rebuild sweeps from a store written by sweep_single / sweep_ring; runs
/// produced under another spec hash are ignored.
std::vector<SingleSweep> load_single_sweeps(const std::filesystem::path& store_root, const ExperimentSpec& spec);
RingSweep load_ring_sweep(const std::filesystem::path& store, const ExperimentSpec& spec);

/// Store directory of one single-platoon sweep below the output root.
std::filesystem::path single_store(const std::filesystem::path& root, int n, ScenarioKind kind);

}  // namespace mixplat
