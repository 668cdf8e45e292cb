#include "mixplat/report.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>

namespace mixplat {

using nlohmann::json;

namespace {

std::string fixed6(double v)
{
    if (std::isnan(v)) {
        return "nan";
    }
    std::string s = fmt::format("{:.6f}", v);
    if (s == "-0.000000") {
        s = "0.000000";
    }
    return s;
}

// NaN and infinities become null so the documents stay valid JSON.
json number_or_null(double v)
{
    return std::isfinite(v) ? json(v) : json(nullptr);
}

double number_from(const json& j)
{
    return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>();
}

json vector_json(const std::vector<double>& v)
{
    json a = json::array();
    for (double x : v) {
        a.push_back(number_or_null(x));
    }
    return a;
}

std::vector<double> vector_from(const json& j)
{
    std::vector<double> v;
    for (const auto& x : j) {
        v.push_back(number_from(x));
    }
    return v;
}

std::string hash_line(const std::string& spec_hash)
{
    return fmt::format("# spec_hash={}\n", spec_hash);
}

std::string scenario_letter(const std::string& scenario)
{
    return scenario == "braking" ? "B" : "S";
}

std::string metric_cell(const VehicleMetric& m)
{
    return fmt::format("{:.2f} (V{})", m.value, m.vehicle);
}

json matrix_cells_json(const Eigen::MatrixXi& m)
{
    json rows = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            row.push_back(m(i, j));
        }
        rows.push_back(row);
    }
    return rows;
}

struct Reference {
    Eigen::MatrixXi cells;
    bool extended = false;
    std::string name;
};

std::optional<Reference> reference_for(const std::string& config)
{
    if (config == "-PPPP") return Reference{reference_c2(), false, "C2"};
    if (config == "-PGGP") return Reference{reference_c4(), false, "C4"};
    if (config == "GGGGG") return Reference{reference_extended_gsbl5(), true, "C' (GGGGG)"};
    if (config == "GGPPPL") return Reference{reference_extended_ggpppl(), true, "C' (GGPPPL)"};
    return std::nullopt;
}

std::string write_to(const std::filesystem::path& dir, const std::string& name, const std::string& content,
                     Emitted& out)
{
    write_file_atomic(dir / name, content);
    out.files.push_back(name);
    return name;
}

}  // namespace

// ---------------------------------------------------------------------------

std::string single_record_json(const SingleRecord& rec, const std::string& spec_hash)
{
    const MetricReport& r = rec.report;
    json j;
    j["config"] = r.config;
    j["scenario"] = r.scenario;
    j["spec_hash"] = spec_hash;
    j["collided"] = rec.collided;
    j["min_gap"] = number_or_null(rec.min_gap);
    j["error"] = rec.error;
    const bool ok = !rec.collided && rec.error.empty();
    j["delta_a"] = ok ? number_or_null(r.comfort.value) : json(nullptr);
    j["delta_a_vehicle"] = ok ? json(r.comfort.vehicle) : json(nullptr);
    j["delta_d"] = ok ? number_or_null(r.safety.value) : json(nullptr);
    j["delta_d_vehicle"] = ok ? json(r.safety.vehicle) : json(nullptr);
    j["eta"] = ok ? number_or_null(r.eta) : json(nullptr);
    j["delta_a_per_vehicle"] = vector_json(r.comfort.per_vehicle);
    j["delta_d_per_vehicle"] = vector_json(r.safety.per_vehicle);
    j["window"] = {number_or_null(r.window.t0), number_or_null(r.window.t1)};
    j["window_truncated"] = r.window.truncated;
    return j.dump(2) + "\n";
}

SingleRecord single_record_from_json(const std::string& text, std::string* spec_hash_out)
{
    const json j = json::parse(text);
    SingleRecord rec;
    MetricReport& r = rec.report;
    r.config = j.at("config").get<std::string>();
    r.scenario = j.at("scenario").get<std::string>();
    rec.collided = j.at("collided").get<bool>();
    rec.min_gap = number_from(j.at("min_gap"));
    rec.error = j.at("error").get<std::string>();
    r.comfort.value = number_from(j.at("delta_a"));
    r.comfort.vehicle = j.at("delta_a_vehicle").is_null() ? 0 : j.at("delta_a_vehicle").get<int>();
    r.safety.value = number_from(j.at("delta_d"));
    r.safety.vehicle = j.at("delta_d_vehicle").is_null() ? 0 : j.at("delta_d_vehicle").get<int>();
    r.eta = number_from(j.at("eta"));
    r.comfort.per_vehicle = vector_from(j.at("delta_a_per_vehicle"));
    r.safety.per_vehicle = vector_from(j.at("delta_d_per_vehicle"));
    r.window.t0 = number_from(j.at("window").at(0));
    r.window.t1 = number_from(j.at("window").at(1));
    r.window.truncated = j.at("window_truncated").get<bool>();
    if (spec_hash_out) {
        *spec_hash_out = j.at("spec_hash").get<std::string>();
    }
    return rec;
}

std::string ring_record_json(const RingRecord& rec, const std::string& spec_hash)
{
    json j;
    j["cell"] = rec.cell.id();
    j["density"] = rec.cell.density;
    j["baseline"] = std::string(baseline_name(rec.cell.baseline));
    j["platoons"] = rec.cell.platoons;
    j["policy"] = std::string(policy_name(rec.cell.policy));
    j["N"] = rec.cell.platoon_size;
    j["R"] = rec.cell.penetration;
    j["seed"] = rec.seed;
    j["spec_hash"] = spec_hash;
    j["collided"] = rec.collided;
    j["end_time"] = rec.end_time;
    j["mean_throughput"] = number_or_null(rec.mean_throughput);
    j["throughput"] = vector_json(rec.throughput);
    j["volatility"] = vector_json(rec.volatility);
    j["lane_changes"] = rec.lane_changes;
    j["error"] = rec.error;
    return j.dump() + "\n";
}

RingRecord ring_record_from_json(const std::string& text, std::string* spec_hash_out)
{
    const json j = json::parse(text);
    RingRecord rec;
    rec.cell.density = j.at("density").get<double>();
    rec.cell.baseline = parse_baseline(j.at("baseline").get<std::string>());
    rec.cell.platoons = j.at("platoons").get<bool>();
    rec.cell.policy = parse_policy(j.at("policy").get<std::string>());
    rec.cell.platoon_size = j.at("N").get<int>();
    rec.cell.penetration = j.at("R").get<double>();
    rec.seed = j.at("seed").get<std::uint64_t>();
    rec.collided = j.at("collided").get<bool>();
    rec.end_time = j.at("end_time").get<double>();
    rec.mean_throughput = number_from(j.at("mean_throughput"));
    rec.throughput = vector_from(j.at("throughput"));
    rec.volatility = vector_from(j.at("volatility"));
    rec.lane_changes = j.at("lane_changes").get<long>();
    rec.error = j.at("error").get<std::string>();
    if (spec_hash_out) {
        *spec_hash_out = j.at("spec_hash").get<std::string>();
    }
    return rec;
}

// ---------------------------------------------------------------------------

std::string single_table_text(const std::vector<SingleSweep>& sweeps, bool exclude_gsbl, const std::string& spec_hash)
{
    std::string out = hash_line(spec_hash);
    std::size_t width = 6;
    for (const auto& s : sweeps) {
        width = std::max(width, static_cast<std::size_t>(s.n) + 2);
    }
    out += fmt::format("{:<4} {:<{}} {:>14} {:>14} {:>8}\n", "", "c", width, "delta_a(c)", "delta_d(c)", "eta_c");
    for (const auto& s : sweeps) {
        out += std::string(4 + 1 + width + 1 + 14 + 1 + 14 + 1 + 8, '-') + "\n";
        const std::string letter = scenario_letter(std::string(scenario_name(s.scenario)));
        const WorstCase w = worst_case(s.mixed, exclude_gsbl);
        const SingleRecord* rows[3] = {w.worst_comfort, w.worst_safety, w.best_efficiency};
        for (const SingleRecord* r : rows) {
            if (!r) {
                out += fmt::format("{:<4} {:<{}} (no evaluated configurations)\n", letter, "", width);
                continue;
            }
            out += fmt::format("{:<4} {:<{}} {:>14} {:>14} {:>8.2f}\n", letter, r->report.config, width,
                               metric_cell(r->report.comfort), metric_cell(r->report.safety), r->report.eta);
        }
        long collided = 0;
        long failed = 0;
        for (const auto& r : s.mixed) {
            collided += r.collided ? 1 : 0;
            failed += (!r.collided && !r.error.empty()) ? 1 : 0;
        }
        if (collided || failed || s.partial) {
            out += fmt::format("     N={} {}: {} collided, {} failed{}\n", s.n, scenario_name(s.scenario), collided,
                               failed, s.partial ? ", sweep incomplete" : "");
        }
    }
    return out;
}

std::string single_summary_json(const std::vector<SingleSweep>& sweeps, const std::string& spec_hash)
{
    json root;
    root["spec_hash"] = spec_hash;
    root["sweeps"] = json::array();
    for (const auto& s : sweeps) {
        json js;
        js["N"] = s.n;
        js["scenario"] = std::string(scenario_name(s.scenario));
        js["partial"] = s.partial;
        auto rows = [&](const std::vector<SingleRecord>& recs) {
            json a = json::array();
            for (const auto& r : recs) {
                a.push_back(json::parse(single_record_json(r, spec_hash)));
            }
            return a;
        };
        js["mixed"] = rows(s.mixed);
        js["baselines"] = rows(s.baselines);
        for (bool no_g : {false, true}) {
            const WorstCase w = worst_case(s.mixed, no_g);
            json wc;
            wc["worst_delta_a"] = w.worst_comfort ? json(w.worst_comfort->report.config) : json(nullptr);
            wc["worst_delta_d"] = w.worst_safety ? json(w.worst_safety->report.config) : json(nullptr);
            wc["best_eta"] = w.best_efficiency ? json(w.best_efficiency->report.config) : json(nullptr);
            js[no_g ? "worst_case_without_gsbl" : "worst_case"] = wc;
        }
        root["sweeps"].push_back(js);
    }
    return root.dump(2) + "\n";
}

std::string throughput_csv(const RingSweep& sweep, const std::string& spec_hash)
{
    std::string out = hash_line(spec_hash);
    out += "density,policy,N,R,mean_thr,ci_low,ci_high,collided\n";
    for (const auto& s : sweep.summaries) {
        out += fmt::format("{},{},{},{},{},{},{},{}\n", fixed6(s.cell.density), s.cell.policy_label(),
                           s.cell.platoon_size, fixed6(s.cell.penetration), fixed6(s.mean_throughput),
                           fixed6(s.ci_low), fixed6(s.ci_high), s.collided);
    }
    return out;
}

std::string volatility_csv(const RingSweep& sweep, const std::string& spec_hash)
{
    std::string out = hash_line(spec_hash);
    out += "density,policy,N,R,count,q1,median,q3,whisker_low,whisker_high,outliers\n";
    for (const auto& s : sweep.summaries) {
        const BoxStats& b = s.volatility;
        const bool any = b.count > 0;
        const double nan = std::numeric_limits<double>::quiet_NaN();
        out += fmt::format("{},{},{},{},{},{},{},{},{},{},{}\n", fixed6(s.cell.density), s.cell.policy_label(),
                           s.cell.platoon_size, fixed6(s.cell.penetration), b.count, fixed6(any ? b.q1 : nan),
                           fixed6(any ? b.median : nan), fixed6(any ? b.q3 : nan), fixed6(any ? b.whisker_low : nan),
                           fixed6(any ? b.whisker_high : nan), b.outliers.size());
    }
    return out;
}

std::string collision_csv(const RingSweep& sweep, const std::string& spec_hash)
{
    std::string out = hash_line(spec_hash);
    out += "cell,density,policy,N,R,seed,end_time\n";
    for (const auto& r : sweep.records) {
        if (r.collided) {
            out += fmt::format("{},{},{},{},{},{},{}\n", r.cell.id(), fixed6(r.cell.density), r.cell.policy_label(),
                               r.cell.platoon_size, fixed6(r.cell.penetration), r.seed, fixed6(r.end_time));
        }
    }
    return out;
}

std::string ring_table_text(const RingSweep& sweep, const std::string& spec_hash)
{
    std::string out = hash_line(spec_hash);
    out += fmt::format("{:>8} {:<10} {:>3} {:>5} {:>10} {:>21} {:>9} {:>5} {:>5}\n", "density", "policy", "N", "R",
                       "thr[veh/h]", "ci", "vol_med", "runs", "coll");
    for (const auto& s : sweep.summaries) {
        std::string thr = std::isnan(s.mean_throughput) ? "n/a" : fmt::format("{:.1f}", s.mean_throughput);
        std::string ci = std::isnan(s.ci_low) ? "n/a" : fmt::format("[{:.1f}, {:.1f}]", s.ci_low, s.ci_high);
        std::string vol = s.volatility.count ? fmt::format("{:.4f}", s.volatility.median) : "n/a";
        out += fmt::format("{:>8g} {:<10} {:>3} {:>5g} {:>10} {:>21} {:>9} {:>5} {:>5}", s.cell.density,
                           s.cell.policy_label(), s.cell.platoon_size, s.cell.penetration, thr, ci, vol, s.runs,
                           s.collided);
        if (s.missing) {
            out += fmt::format("  ({} runs missing)", s.missing);
        }
        out += "\n";
    }
    return out;
}

std::string ring_dry_run_text(const RingSweep& sweep, const std::string& spec_hash)
{
    std::string out = hash_line(spec_hash);
    out += fmt::format("cells {}\nruns {}\n", sweep.cells.size(), sweep.planned);
    for (const auto& c : sweep.cells) {
        out += c.id() + "\n";
    }
    return out;
}

std::string matrix_text(const PlatoonConfig& config, const std::string& spec_hash)
{
    const std::string name = format_config(config);
    const ConnectivityMatrix c = connectivity_matrix(config);
    const ConnectivityMatrix ce = extended_connectivity_matrix(config);
    const MatrixClass cls = classify_matrix(c);
    const MatrixClass cls_e = classify_matrix(ce);
    std::string out = hash_line(spec_hash);
    out += fmt::format("config {}\n\nC (lower_triangular={}, square={})\n{}\nC' (lower_triangular={}, square={})\n{}",
                       name, cls.lower_triangular, cls.square, to_text_grid(c), cls_e.lower_triangular, cls_e.square,
                       to_text_grid(ce));
    if (auto ref = reference_for(name)) {
        const auto diffs = diff_cells(ref->cells, ref->extended ? ce.cells : c.cells);
        out += fmt::format("\nreference {}: {}\n", ref->name,
                           diffs.empty() ? "identical" : fmt::format("{} cells differ", diffs.size()));
        for (const auto& d : diffs) {
            out += fmt::format("  row {} col {}: reference {} built {}\n", d.row, d.col, d.expected, d.actual);
        }
    }
    return out;
}

std::string matrix_json(const PlatoonConfig& config, const std::string& spec_hash)
{
    const std::string name = format_config(config);
    const ConnectivityMatrix c = connectivity_matrix(config);
    const ConnectivityMatrix ce = extended_connectivity_matrix(config);
    json j;
    j["config"] = name;
    j["spec_hash"] = spec_hash;
    j["C"] = matrix_cells_json(c.cells);
    j["C_extended"] = matrix_cells_json(ce.cells);
    const MatrixClass cls = classify_matrix(c);
    j["lower_triangular"] = cls.lower_triangular;
    j["square"] = cls.square;
    if (auto ref = reference_for(name)) {
        json diffs = json::array();
        for (const auto& d : diff_cells(ref->cells, ref->extended ? ce.cells : c.cells)) {
            diffs.push_back({{"row", d.row}, {"col", d.col}, {"reference", d.expected}, {"built", d.actual}});
        }
        j["reference"] = ref->name;
        j["reference_diff"] = diffs;
    }
    return j.dump(2) + "\n";
}

// ---------------------------------------------------------------------------

Emitted emit_single_reports(const std::filesystem::path& dir, const std::vector<SingleSweep>& sweeps,
                            const std::string& spec_hash)
{
    Emitted out;
    write_to(dir, "table_worst.txt", single_table_text(sweeps, false, spec_hash), out);
    write_to(dir, "table_worst_no_gsbl.txt", single_table_text(sweeps, true, spec_hash), out);
    write_to(dir, "summary.json", single_summary_json(sweeps, spec_hash), out);
    for (const auto& s : sweeps) {
        std::string csv = hash_line(spec_hash) + "config,scenario,delta_a,delta_a_vehicle,delta_d,delta_d_vehicle,eta,collided,min_gap\n";
        auto line = [&](const SingleRecord& r) {
            const bool ok = !r.collided && r.error.empty();
            const double nan = std::numeric_limits<double>::quiet_NaN();
            csv += fmt::format("{},{},{},{},{},{},{},{},{}\n", r.report.config, r.report.scenario,
                               fixed6(ok ? r.report.comfort.value : nan), ok ? r.report.comfort.vehicle : 0,
                               fixed6(ok ? r.report.safety.value : nan), ok ? r.report.safety.vehicle : 0,
                               fixed6(ok ? r.report.eta : nan), r.collided ? 1 : 0, fixed6(r.min_gap));
        };
        for (const auto& r : s.baselines) {
            line(r);
        }
        for (const auto& r : s.mixed) {
            line(r);
        }
        write_to(dir, fmt::format("metrics_N{}_{}.csv", s.n, scenario_name(s.scenario)), csv, out);
    }
    return out;
}

Emitted emit_ring_reports(const std::filesystem::path& dir, const RingSweep& sweep, const std::string& spec_hash)
{
    Emitted out;
    write_to(dir, "throughput.csv", throughput_csv(sweep, spec_hash), out);
    write_to(dir, "volatility_box.csv", volatility_csv(sweep, spec_hash), out);
    write_to(dir, "collisions.csv", collision_csv(sweep, spec_hash), out);
    write_to(dir, "ring_table.txt", ring_table_text(sweep, spec_hash), out);
    return out;
}

Emitted emit_matrix_reports(const std::filesystem::path& dir, const std::vector<std::string>& configs,
                            const std::string& spec_hash)
{
    Emitted out;
    for (const auto& text : configs) {
        const PlatoonConfig cfg = parse_config(text);
        write_to(dir, fmt::format("matrix_{}.txt", text), matrix_text(cfg, spec_hash), out);
        write_to(dir, fmt::format("matrix_{}.json", text), matrix_json(cfg, spec_hash), out);
    }
    return out;
}

// ---------------------------------------------------------------------------

std::filesystem::path single_store(const std::filesystem::path& root, int n, ScenarioKind kind)
{
    return root / "runs" / fmt::format("N{}", n) / std::string(scenario_name(kind));
}

std::vector<SingleSweep> load_single_sweeps(const std::filesystem::path& store_root, const ExperimentSpec& spec)
{
    const std::string hash = spec_hash(spec);
    std::vector<SingleSweep> sweeps;
    auto load = [&](const std::filesystem::path& p) -> std::optional<SingleRecord> {
        std::ifstream in(p, std::ios::binary);
        if (!in) {
            return std::nullopt;
        }
        std::ostringstream ss;
        ss << in.rdbuf();
        std::string h;
        try {
            SingleRecord r = single_record_from_json(ss.str(), &h);
            if (h == hash) {
                return r;
            }
        } catch (const std::exception&) {
        }
        return std::nullopt;
    };
    for (int n : spec.sweep_sizes) {
        for (auto kind : spec.sweep_scenarios) {
            SingleSweep s;
            s.n = n;
            s.scenario = kind;
            const auto dir = single_store(store_root, n, kind);
            for (const auto& cfg : sweep_configs(spec, n)) {
                if (auto r = load(dir / fmt::format("c{}.json", format_config(cfg)))) {
                    s.mixed.push_back(std::move(*r));
                } else {
                    s.partial = true;
                }
            }
            for (const auto& cfg : baseline_configs(n)) {
                if (auto r = load(dir / fmt::format("b{}.json", format_config(cfg)))) {
                    s.baselines.push_back(std::move(*r));
                } else {
                    s.partial = true;
                }
            }
            sweeps.push_back(std::move(s));
        }
    }
    return sweeps;
}

RingSweep load_ring_sweep(const std::filesystem::path& store, const ExperimentSpec& spec)
{
    const std::string hash = spec_hash(spec);
    RingSweep sweep;
    sweep.cells = ring_grid(spec);
    const auto seeds = repetition_seeds(spec);
    sweep.planned = static_cast<long>(sweep.cells.size() * seeds.size());
    for (const auto& cell : sweep.cells) {
        std::vector<RingRecord> found;
        for (auto seed : seeds) {
            std::ifstream in(store / fmt::format("{}_s{}.json", cell.id(), seed), std::ios::binary);
            if (!in) {
                sweep.partial = true;
                continue;
            }
            std::ostringstream ss;
            ss << in.rdbuf();
            std::string h;
            try {
                RingRecord r = ring_record_from_json(ss.str(), &h);
                if (h == hash) {
                    sweep.records.push_back(std::move(r));
                    continue;
                }
            } catch (const std::exception&) {
            }
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
