#include "mixplat/experiment.hpp"

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <fmt/format.h>
#include <fmt/ranges.h>
#include <openssl/evp.h>

namespace mixplat {

std::string_view kind_name(ExperimentKind k)
{
    switch (k) {
    case ExperimentKind::Single: return "single";
    case ExperimentKind::Ring: return "ring";
    case ExperimentKind::SweepSingle: return "sweep-single";
    case ExperimentKind::SweepRing: return "sweep-ring";
    case ExperimentKind::Matrix: return "matrix";
    }
    return "?";
}

ExperimentKind parse_kind(std::string_view name)
{
    for (auto k : {ExperimentKind::Single, ExperimentKind::Ring, ExperimentKind::SweepSingle,
                   ExperimentKind::SweepRing, ExperimentKind::Matrix}) {
        if (kind_name(k) == name) {
            return k;
        }
    }
    throw ConfigError(fmt::format("unknown experiment kind '{}'", name));
}

namespace {

std::string trim(std::string s)
{
    const auto not_space = [](unsigned char ch) { return !std::isspace(ch); };
    s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
    s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
    return s;
}

std::vector<std::string> split_list(const std::string& text)
{
    std::vector<std::string> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) {
            out.push_back(item);
        }
    }
    return out;
}

double to_double(const std::string& text)
{
    const std::string t = trim(text);
    char* end = nullptr;
    errno = 0;
    const double v = std::strtod(t.c_str(), &end);
    if (t.empty() || end != t.c_str() + t.size() || errno == ERANGE || !std::isfinite(v)) {
        throw ConfigError(fmt::format("'{}' is not a finite number", text));
    }
    return v;
}

long long to_int(const std::string& text)
{
    const std::string t = trim(text);
    char* end = nullptr;
    errno = 0;
    const long long v = std::strtoll(t.c_str(), &end, 10);
    if (t.empty() || end != t.c_str() + t.size() || errno == ERANGE) {
        throw ConfigError(fmt::format("'{}' is not an integer", text));
    }
    return v;
}

bool to_bool(const std::string& text)
{
    const std::string t = trim(text);
    if (t == "true" || t == "1" || t == "yes") return true;
    if (t == "false" || t == "0" || t == "no") return false;
    throw ConfigError(fmt::format("'{}' is not a boolean", text));
}

std::string num(double v)
{
    return fmt::format("{}", v);
}

template <typename T, typename F>
std::string join(const std::vector<T>& items, F&& fmt_one)
{
    std::string out;
    for (std::size_t i = 0; i < items.size(); ++i) {
        if (i) {
            out += ",";
        }
        out += fmt_one(items[i]);
    }
    return out;
}

struct Field {
    std::string section;
    std::string key;
    std::function<std::string(const ExperimentSpec&)> get;
    std::function<void(ExperimentSpec&, const std::string&)> set;
};

template <typename M>
Field real(std::string sec, std::string key, M member)
{
    return {std::move(sec), std::move(key), [member](const ExperimentSpec& s) { return num(member(const_cast<ExperimentSpec&>(s))); },
            [member](ExperimentSpec& s, const std::string& v) { member(s) = to_double(v); }};
}

template <typename M>
Field integer(std::string sec, std::string key, M member)
{
    return {std::move(sec), std::move(key),
            [member](const ExperimentSpec& s) { return fmt::format("{}", member(const_cast<ExperimentSpec&>(s))); },
            [member](ExperimentSpec& s, const std::string& v) {
                using T = std::remove_reference_t<decltype(member(s))>;
                const long long x = to_int(v);
                if constexpr (std::is_unsigned_v<T>) {
                    if (x < 0) {
                        throw ConfigError(fmt::format("'{}' must be non-negative", v));
                    }
                }
                member(s) = static_cast<T>(x);
            }};
}

const std::vector<Field>& fields()
{
    static const std::vector<Field> table = [] {
        std::vector<Field> f;
        f.push_back({"experiment", "kind", [](const ExperimentSpec& s) { return std::string(kind_name(s.kind)); },
                     [](ExperimentSpec& s, const std::string& v) { s.kind = parse_kind(trim(v)); }});
        f.push_back(integer("experiment", "seed", [](ExperimentSpec& s) -> auto& { return s.seed; }));
        f.push_back({"experiment", "output", [](const ExperimentSpec& s) { return s.output; },
                     [](ExperimentSpec& s, const std::string& v) { s.output = trim(v); }});
        f.push_back(integer("experiment", "jobs", [](ExperimentSpec& s) -> auto& { return s.jobs; }));

        f.push_back(real("simulation", "dt", [](ExperimentSpec& s) -> auto& { return s.dyn.dt; }));
        f.push_back(real("simulation", "control_period", [](ExperimentSpec& s) -> auto& { return s.ctrl.control_period; }));
        f.push_back(real("simulation", "beacon_period", [](ExperimentSpec& s) -> auto& { return s.ctrl.beacon_period; }));
        f.push_back(real("simulation", "u_min", [](ExperimentSpec& s) -> auto& { return s.dyn.u_min; }));
        f.push_back(real("simulation", "u_max", [](ExperimentSpec& s) -> auto& { return s.dyn.u_max; }));
        f.push_back(real("simulation", "emergency_u_min", [](ExperimentSpec& s) -> auto& { return s.dyn.emergency_u_min; }));
        f.push_back(real("simulation", "cruise_kp", [](ExperimentSpec& s) -> auto& { return s.ctrl.cruise_kp; }));
        f.push_back(real("simulation", "radar_range", [](ExperimentSpec& s) -> auto& { return s.ctrl.radar_range; }));

        f.push_back(real("powertrain", "lag", [](ExperimentSpec& s) -> auto& { return s.dyn.tau; }));

        f.push_back(real("ACC", "lambda", [](ExperimentSpec& s) -> auto& { return s.ctrl.acc.lambda; }));
        f.push_back(real("ACC", "H", [](ExperimentSpec& s) -> auto& { return s.ctrl.acc.H; }));
        f.push_back(real("ACC", "standstill", [](ExperimentSpec& s) -> auto& { return s.ctrl.acc.standstill; }));

        f.push_back(real("PATH", "C1", [](ExperimentSpec& s) -> auto& { return s.ctrl.path.C1; }));
        f.push_back(real("PATH", "omega_n", [](ExperimentSpec& s) -> auto& { return s.ctrl.path.omega_n; }));
        f.push_back(real("PATH", "xi", [](ExperimentSpec& s) -> auto& { return s.ctrl.path.xi; }));
        f.push_back(real("PATH", "dd", [](ExperimentSpec& s) -> auto& { return s.ctrl.path.dd; }));

        f.push_back(real("PLOEG", "H", [](ExperimentSpec& s) -> auto& { return s.ctrl.ploeg.H; }));
        f.push_back(real("PLOEG", "kp", [](ExperimentSpec& s) -> auto& { return s.ctrl.ploeg.kp; }));
        f.push_back(real("PLOEG", "kd", [](ExperimentSpec& s) -> auto& { return s.ctrl.ploeg.kd; }));
        f.push_back(real("PLOEG", "standstill", [](ExperimentSpec& s) -> auto& { return s.ctrl.ploeg.standstill; }));

        f.push_back(real("GSBL", "k", [](ExperimentSpec& s) -> auto& { return s.ctrl.gsbl.k; }));
        f.push_back(real("GSBL", "h", [](ExperimentSpec& s) -> auto& { return s.ctrl.gsbl.h; }));
        f.push_back(real("GSBL", "r", [](ExperimentSpec& s) -> auto& { return s.ctrl.gsbl.r_default; }));
        f.push_back(real("GSBL", "r_min", [](ExperimentSpec& s) -> auto& { return s.ctrl.gsbl.r_min; }));
        f.push_back(real("GSBL", "r_max", [](ExperimentSpec& s) -> auto& { return s.ctrl.gsbl.r_max; }));
        f.push_back(real("GSBL", "d", [](ExperimentSpec& s) -> auto& { return s.ctrl.gsbl.d; }));
        f.push_back(real("GSBL", "delta_a", [](ExperimentSpec& s) -> auto& { return s.ctrl.gsbl.delta_a; }));
        f.push_back(real("GSBL", "delta_t", [](ExperimentSpec& s) -> auto& { return s.ctrl.gsbl.delta_t; }));
        f.push_back(real("GSBL", "close_gap", [](ExperimentSpec& s) -> auto& { return s.ctrl.gsbl.close_gap; }));
        f.push_back(real("GSBL", "close_speed", [](ExperimentSpec& s) -> auto& { return s.ctrl.gsbl.close_speed; }));

        f.push_back(real("EIDM", "accel", [](ExperimentSpec& s) -> auto& { return s.ctrl.idm.a_max; }));
        f.push_back(real("EIDM", "decel", [](ExperimentSpec& s) -> auto& { return s.ctrl.idm.b_comf; }));
        f.push_back(real("EIDM", "tau", [](ExperimentSpec& s) -> auto& { return s.ctrl.idm.T; }));
        f.push_back(real("EIDM", "minGap", [](ExperimentSpec& s) -> auto& { return s.ctrl.idm.s0; }));
        f.push_back(real("EIDM", "delta", [](ExperimentSpec& s) -> auto& { return s.ctrl.idm.delta; }));

        f.push_back({"single", "config", [](const ExperimentSpec& s) { return s.config; },
                     [](ExperimentSpec& s, const std::string& v) { s.config = trim(v); }});
        f.push_back({"single", "scenario", [](const ExperimentSpec& s) { return std::string(scenario_name(s.scenario)); },
                     [](ExperimentSpec& s, const std::string& v) { s.scenario = parse_scenario(trim(v)); }});
        f.push_back(real("single", "duration", [](ExperimentSpec& s) -> auto& { return s.duration; }));
        f.push_back({"single", "elect_leaders", [](const ExperimentSpec& s) { return std::string(s.elect_leaders ? "true" : "false"); },
                     [](ExperimentSpec& s, const std::string& v) { s.elect_leaders = to_bool(v); }});
        f.push_back(real("single", "follower_set_speed", [](ExperimentSpec& s) -> auto& { return s.ctrl.follower_set_speed; }));

        f.push_back({"sweep-single", "sizes",
                     [](const ExperimentSpec& s) { return join(s.sweep_sizes, [](int v) { return fmt::format("{}", v); }); },
                     [](ExperimentSpec& s, const std::string& v) {
                         s.sweep_sizes.clear();
                         for (const auto& x : split_list(v)) s.sweep_sizes.push_back(static_cast<int>(to_int(x)));
                     }});
        f.push_back({"sweep-single", "scenarios",
                     [](const ExperimentSpec& s) {
                         return join(s.sweep_scenarios, [](ScenarioKind k) { return std::string(scenario_name(k)); });
                     },
                     [](ExperimentSpec& s, const std::string& v) {
                         s.sweep_scenarios.clear();
                         for (const auto& x : split_list(v)) s.sweep_scenarios.push_back(parse_scenario(x));
                     }});
        f.push_back(integer("sweep-single", "samples", [](ExperimentSpec& s) -> auto& { return s.sample_count; }));
        f.push_back(integer("sweep-single", "exhaustive_limit", [](ExperimentSpec& s) -> auto& { return s.exhaustive_limit; }));

        f.push_back(integer("mobility", "M_L", [](ExperimentSpec& s) -> auto& { return s.ring.lanes; }));
        f.push_back({"mobility", "speeds",
                     [](const ExperimentSpec& s) { return join(s.ring.speed_classes_kmh, num); },
                     [](ExperimentSpec& s, const std::string& v) {
                         s.ring.speed_classes_kmh.clear();
                         for (const auto& x : split_list(v)) s.ring.speed_classes_kmh.push_back(to_double(x));
                     }});
        f.push_back(real("mobility", "speed_jitter", [](ExperimentSpec& s) -> auto& { return s.ring.jitter_kmh; }));
        f.push_back({"mobility", "D_v",
                     [](const ExperimentSpec& s) { return join(s.densities, num); },
                     [](ExperimentSpec& s, const std::string& v) {
                         s.densities.clear();
                         for (const auto& x : split_list(v)) s.densities.push_back(to_double(x));
                     }});
        f.push_back({"mobility", "models",
                     [](const ExperimentSpec& s) {
                         return join(s.baselines, [](BaselinePolicy b) { return std::string(baseline_name(b)); });
                     },
                     [](ExperimentSpec& s, const std::string& v) {
                         s.baselines.clear();
                         for (const auto& x : split_list(v)) s.baselines.push_back(parse_baseline(x));
                     }});
        f.push_back({"mobility", "controllers",
                     [](const ExperimentSpec& s) {
                         return join(s.policies, [](PlatoonPolicy p) { return std::string(policy_name(p)); });
                     },
                     [](ExperimentSpec& s, const std::string& v) {
                         s.policies.clear();
                         for (const auto& x : split_list(v)) s.policies.push_back(parse_policy(x));
                     }});
        f.push_back({"mobility", "N",
                     [](const ExperimentSpec& s) { return join(s.platoon_sizes, [](int v) { return fmt::format("{}", v); }); },
                     [](ExperimentSpec& s, const std::string& v) {
                         s.platoon_sizes.clear();
                         for (const auto& x : split_list(v)) s.platoon_sizes.push_back(static_cast<int>(to_int(x)));
                     }});
        f.push_back({"mobility", "R",
                     [](const ExperimentSpec& s) { return join(s.penetrations, num); },
                     [](ExperimentSpec& s, const std::string& v) {
                         s.penetrations.clear();
                         for (const auto& x : split_list(v)) s.penetrations.push_back(to_double(x));
                     }});
        f.push_back(real("mobility", "circumference", [](ExperimentSpec& s) -> auto& { return s.ring.circumference; }));
        f.push_back(real("mobility", "vehicle_length", [](ExperimentSpec& s) -> auto& { return s.ring.vehicle_length; }));
        f.push_back(real("mobility", "duration", [](ExperimentSpec& s) -> auto& { return s.ring.duration; }));
        f.push_back(real("mobility", "warmup", [](ExperimentSpec& s) -> auto& { return s.ring.warmup; }));
        f.push_back(real("mobility", "sample_period", [](ExperimentSpec& s) -> auto& { return s.ring.sample_period; }));
        f.push_back(real("mobility", "throughput_window", [](ExperimentSpec& s) -> auto& { return s.throughput_window; }));
        f.push_back(real("mobility", "confidence", [](ExperimentSpec& s) -> auto& { return s.confidence; }));
        f.push_back(integer("mobility", "repetitions", [](ExperimentSpec& s) -> auto& { return s.repetitions; }));

        f.push_back(real("ring", "D_v", [](ExperimentSpec& s) -> auto& { return s.ring.density; }));
        f.push_back(integer("ring", "N", [](ExperimentSpec& s) -> auto& { return s.ring.platoon_size; }));
        f.push_back(real("ring", "R", [](ExperimentSpec& s) -> auto& { return s.ring.penetration; }));
        f.push_back({"ring", "controller", [](const ExperimentSpec& s) { return std::string(policy_name(s.ring.policy)); },
                     [](ExperimentSpec& s, const std::string& v) { s.ring.policy = parse_policy(trim(v)); }});
        f.push_back({"ring", "model", [](const ExperimentSpec& s) { return std::string(baseline_name(s.ring.baseline)); },
                     [](ExperimentSpec& s, const std::string& v) { s.ring.baseline = parse_baseline(trim(v)); }});
        f.push_back({"ring", "record_trace", [](const ExperimentSpec& s) { return std::string(s.ring.record_trace ? "true" : "false"); },
                     [](ExperimentSpec& s, const std::string& v) { s.ring.record_trace = to_bool(v); }});

        f.push_back(real("lane_change", "overtake_ratio", [](ExperimentSpec& s) -> auto& { return s.ring.lane_change.overtake_ratio; }));
        f.push_back(real("lane_change", "cooldown", [](ExperimentSpec& s) -> auto& { return s.ring.lane_change.cooldown; }));
        f.push_back(real("lane_change", "lookahead", [](ExperimentSpec& s) -> auto& { return s.ring.lane_change.lookahead; }));
        f.push_back(real("lane_change", "incentive", [](ExperimentSpec& s) -> auto& { return s.ring.lane_change.incentive; }));
        f.push_back(real("lane_change", "s_min", [](ExperimentSpec& s) -> auto& { return s.ring.lane_change.s_min; }));
        f.push_back(real("lane_change", "T", [](ExperimentSpec& s) -> auto& { return s.ring.lane_change.T; }));
        f.push_back(real("lane_change", "b", [](ExperimentSpec& s) -> auto& { return s.ring.lane_change.b; }));
        f.push_back(real("lane_change", "period", [](ExperimentSpec& s) -> auto& { return s.ring.lane_change.period; }));

        f.push_back({"matrix", "configs", [](const ExperimentSpec& s) { return join(s.matrix_configs, [](const std::string& c) { return c; }); },
                     [](ExperimentSpec& s, const std::string& v) { s.matrix_configs = split_list(v); }});
        return f;
    }();
    return table;
}

}  // namespace

void ExperimentSpec::validate() const
{
    try {
        dyn.validate();
        ring.validate();
        parse_config(config);
        for (const auto& c : matrix_configs) {
            parse_config(c);
        }
        path_gains(ctrl.path.C1, ctrl.path.xi, ctrl.path.omega_n);
    } catch (const InvalidInput& e) {
        throw ConfigError(e.what());
    } catch (const ConfigParseError& e) {
        throw ConfigError(e.what());
    }
    if (!(ctrl.control_period > 0.0) || !(ctrl.beacon_period > 0.0)) {
        throw ConfigError("control and beacon periods must be positive");
    }
    if (jobs < 1) {
        throw ConfigError("jobs must be at least 1");
    }
    if (duration < 0.0) {
        throw ConfigError("duration must be non-negative (0 keeps the scenario default)");
    }
    for (int n : sweep_sizes) {
        if (n < 2) {
            throw ConfigError(fmt::format("sweep platoon size {} below 2", n));
        }
    }
    if (sample_count < 1 || exhaustive_limit < 2) {
        throw ConfigError("sample count must be positive and the exhaustive limit at least 2");
    }
    for (int n : platoon_sizes) {
        if (n < 2) {
            throw ConfigError(fmt::format("ring platoon size {} below 2", n));
        }
    }
    for (double r : penetrations) {
        if (!(r >= 0.0 && r <= 1.0)) {
            throw ConfigError(fmt::format("penetration rate {} outside [0, 1]", r));
        }
    }
    for (double d : densities) {
        if (!(d >= 0.0)) {
            throw ConfigError(fmt::format("density {} is negative", d));
        }
    }
    if (repetitions < 1 || !(throughput_window > 0.0) || !(confidence > 0.0 && confidence < 1.0)) {
        throw ConfigError("repetitions >= 1, throughput window > 0 and confidence in (0, 1) required");
    }
}

ExperimentSpec default_spec()
{
    return ExperimentSpec{};
}

void set_spec_value(ExperimentSpec& spec, const std::string& section, const std::string& key, const std::string& value)
{
    const auto& table = fields();
    const auto it =
        std::find_if(table.begin(), table.end(), [&](const Field& f) { return f.section == section && f.key == key; });
    if (it == table.end()) {
        throw ConfigError(fmt::format("unknown config key [{}] {}", section, key));
    }
    try {
        it->set(spec, value);
    } catch (const ConfigError& e) {
        throw ConfigError(fmt::format("[{}] {}: {}", section, key, e.what()));
    } catch (const InvalidInput& e) {
        throw ConfigError(fmt::format("[{}] {}: {}", section, key, e.what()));
    }
}

ExperimentSpec parse_spec(const std::string& text)
{
    namespace pt = boost::property_tree;
    pt::ptree tree;
    std::istringstream is(text);
    try {
        pt::ini_parser::read_ini(is, tree);
    } catch (const pt::ini_parser_error& e) {
        throw ConfigError(fmt::format("config line {}: {}", e.line(), e.message()));
    }
    ExperimentSpec spec;
    for (const auto& [section, body] : tree) {
        if (body.empty() && !body.data().empty()) {
            throw ConfigError(fmt::format("key '{}' outside any section", section));
        }
        for (const auto& [key, value] : body) {
            set_spec_value(spec, section, key, value.data());
        }
    }
    spec.validate();
    return spec;
}

ExperimentSpec load_spec(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) {
        throw ConfigError(fmt::format("cannot read config file {}", path.string()));
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_spec(ss.str());
}

std::string write_spec(const ExperimentSpec& spec)
{
    std::string out;
    std::string current;
    for (const auto& f : fields()) {
        if (f.section != current) {
            if (!current.empty()) {
                out += "\n";
            }
            out += fmt::format("[{}]\n", f.section);
            current = f.section;
        }
        out += fmt::format("{} = {}\n", f.key, f.get(spec));
    }
    return out;
}

std::string sha256_hex(const std::string& data)
{
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
        throw std::runtime_error("SHA-256 digest failed");
    }
    std::string hex;
    hex.reserve(2 * len);
    for (unsigned int i = 0; i < len; ++i) {
        hex += fmt::format("{:02x}", digest[i]);
    }
    return hex;
}

std::string spec_hash(const ExperimentSpec& spec)
{
    // where and how fast a run executes does not change its results
    ExperimentSpec canonical = spec;
    canonical.kind = ExperimentKind::Single;
    canonical.output.clear();
    canonical.jobs = 1;
    return sha256_hex(write_spec(canonical));
}

SingleScenario single_scenario(const ExperimentSpec& spec, const PlatoonConfig& config, ScenarioKind kind)
{
    SingleScenario s = default_scenario(kind, config);
    if (spec.duration > 0.0) {
        s.duration = spec.duration;
    }
    s.elect_leaders = spec.elect_leaders;
    return s;
}

void write_file_atomic(const std::filesystem::path& path, const std::string& content)
{
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path());
    }
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw std::runtime_error(fmt::format("cannot write {}", tmp.string()));
        }
        out << content;
        if (!out.flush()) {
            throw std::runtime_error(fmt::format("write to {} failed", tmp.string()));
        }
    }
    std::filesystem::rename(tmp, path);
}

}  // namespace mixplat
