#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "mixplat/dynamics.hpp"
#include "mixplat/ring.hpp"
#include "mixplat/single_platoon.hpp"

namespace mixplat {

/// Malformed or inconsistent experiment configuration (CLI exit code 2).
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class ExperimentKind { Single, Ring, SweepSingle, SweepRing, Matrix };

std::string_view kind_name(ExperimentKind k);
ExperimentKind parse_kind(std::string_view name);

/// Everything needed to reproduce a run. Defaults are the reference
/// parameter values; `write_spec` gives the canonical text that is hashed.
struct ExperimentSpec {
    ExperimentKind kind = ExperimentKind::Single;
    DynamicsParams dyn;
    ControllerSet ctrl;

    // single platoon
    std::string config = "-PLPP";
    ScenarioKind scenario = ScenarioKind::Sinusoidal;
    double duration = 0.0;  ///< 0 keeps the scenario default
    bool elect_leaders = true;

    // single-platoon sweep
    std::vector<int> sweep_sizes{4};
    std::vector<ScenarioKind> sweep_scenarios{ScenarioKind::Sinusoidal, ScenarioKind::Braking};
    int sample_count = 1000;  ///< mixes drawn for sizes above the exhaustive limit
    int exhaustive_limit = 8;

    // ring; `ring` holds the single-run values, the lists below the grid
    RingSpec ring;
    std::vector<double> densities{10, 20, 40, 60, 80, 100, 120, 140, 160, 180};
    std::vector<BaselinePolicy> baselines{BaselinePolicy::Idm, BaselinePolicy::Acc};
    std::vector<PlatoonPolicy> policies{PlatoonPolicy::AllP, PlatoonPolicy::AllL, PlatoonPolicy::AllG,
                                        PlatoonPolicy::RandomMix};
    std::vector<int> platoon_sizes{4, 8, 16};
    std::vector<double> penetrations{0.25, 0.5, 0.75};
    int repetitions = 10;
    double throughput_window = 15.0;
    double confidence = 0.95;

    // matrix
    std::vector<std::string> matrix_configs{"-PPPP", "-PGGP", "GGGGG", "GGPPPL"};

    std::uint64_t seed = 1;
    std::string output = "out";
    int jobs = 1;

    /// Throws ConfigError when a value is out of range.
    void validate() const;
};

ExperimentSpec default_spec();

/// Parse the sectioned key = value format; keys absent from the text keep
/// their defaults, unknown sections or keys are errors.
ExperimentSpec parse_spec(const std::string& text);
/// Assign one `[section] key` from its text form; throws ConfigError.
void set_spec_value(ExperimentSpec& spec, const std::string& section, const std::string& key, const std::string& value);
ExperimentSpec load_spec(const std::filesystem::path& path);

/// Canonical text: every key, fixed order, shortest round-trip numbers.
std::string write_spec(const ExperimentSpec& spec);

/// SHA-256 (hex) of write_spec(spec) with kind, output and jobs reset to
/// their defaults, so stores stay valid across subcommands and directories.
std::string spec_hash(const ExperimentSpec& spec);
std::string sha256_hex(const std::string& data);

/// Resolved single-platoon scenario for `config` and `kind`.
SingleScenario single_scenario(const ExperimentSpec& spec, const PlatoonConfig& config, ScenarioKind kind);

/// Write `content` to `path` through a temporary file and rename.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);

}  // namespace mixplat
