#include <doctest.h>

#include <cmath>
#include <map>
#include <random>

#include "mixplat/controllers.hpp"
#include "mixplat/dynamics.hpp"
#include "mixplat/metrics.hpp"
#include "mixplat/sweep.hpp"
#include "mixplat/topology.hpp"

using namespace mixplat;

namespace {

// Nearest preceding vehicle with a different label, or -1 for external.
std::vector<int> oracle_leaders(const std::string& labels)
{
    std::vector<int> out(labels.size(), -1);
    for (std::size_t i = 1; i < labels.size(); ++i) {
        for (std::size_t j = i; j-- > 0;) {
            if (labels[j] != labels[i]) {
                out[i] = static_cast<int>(j);
                break;
            }
        }
    }
    return out;
}

// Row i: self, predecessor, the egoLeader for P and G, the successor for G.
Eigen::MatrixXi oracle_matrix(const std::string& labels, bool extended)
{
    const int n = static_cast<int>(labels.size());
    const int off = extended ? 1 : 0;
    Eigen::MatrixXi m = Eigen::MatrixXi::Zero(n, n + off);
    const auto leaders = oracle_leaders(labels);
    for (int i = 0; i < n; ++i) {
        const char c = labels[static_cast<std::size_t>(i)];
        m(i, i + off) = 1;
        if (i > 0) {
            m(i, i - 1 + off) = 1;
        }
        const bool uses_leader = c == 'P' || c == 'G';
        if (uses_leader && i > 0) {
            if (leaders[static_cast<std::size_t>(i)] >= 0) {
                m(i, leaders[static_cast<std::size_t>(i)] + off) = 1;
            } else if (extended) {
                m(i, 0) = 1;
            }
        }
        if (c == 'G' && i == 0 && extended) {
            m(i, 0) = 1;
        }
        if (c == 'G' && i + 1 < n) {
            m(i, i + 1 + off) = 1;
        }
    }
    return m;
}

std::vector<std::string> all_label_strings(int n)
{
    std::vector<std::string> out;
    for (const auto& c : enumerate_mixes(n)) {
        const std::string s = format_config(c);
        out.push_back(s);
        out.push_back("G" + s.substr(1));
    }
    return out;
}

Trace random_trace(std::mt19937& rng, int ticks, int n, double t0)
{
    std::uniform_real_distribution<double> a(-3.0, 2.0);
    std::uniform_real_distribution<double> g(3.0, 40.0);
    Trace t;
    t.labels.assign(static_cast<std::size_t>(n), 'P');
    t.labels[0] = '-';
    for (int k = 0; k < ticks; ++k) {
        t.time.push_back(t0 + 0.1 * k);
    }
    t.position = Eigen::MatrixXd::Zero(ticks, n);
    t.speed = Eigen::MatrixXd::Constant(ticks, n, 25.0);
    t.accel = Eigen::MatrixXd::NullaryExpr(ticks, n, [&]() { return a(rng); });
    t.ctrl = Eigen::MatrixXd::Zero(ticks, n);
    t.gap = Eigen::MatrixXd::NullaryExpr(ticks, n, [&]() { return g(rng); });
    t.gap.col(0).setConstant(std::nan(""));
    t.lane = Eigen::MatrixXi::Zero(ticks, n);
    t.mode = Eigen::MatrixXi::Zero(ticks, n);
    return t;
}

}  // namespace

TEST_SUITE("properties") {

TEST_CASE("lagged acceleration converges to any constant input")
{
    std::mt19937 rng(11);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    const DynamicsParams p;
    for (int trial = 0; trial < 200; ++trial) {
        VehicleState s;
        s.speed = 30.0;
        s.accel = u(rng);
        const double target = u(rng);
        for (int k = 0; k < 1000; ++k) {
            s = step_vehicle(s, target, p);
        }
        CHECK(std::abs(s.accel - target) < 1e-6);
    }
}

TEST_CASE("acceleration stays within the input bounds")
{
    std::mt19937 rng(12);
    std::uniform_real_distribution<double> u(-20.0, 20.0);
    const DynamicsParams p;
    VehicleState s;
    s.speed = 1e4;  // keep the vehicle moving throughout
    for (int k = 0; k < 5000; ++k) {
        s = step_vehicle(s, u(rng), p);
        REQUIRE(s.accel <= p.u_max + 1e-12);
        REQUIRE(s.accel >= p.u_min - 1e-12);
        REQUIRE(s.speed >= 0.0);
    }
}

TEST_CASE("PATH weights sum to one")
{
    std::mt19937 rng(13);
    std::uniform_real_distribution<double> c1(0.0, 1.0);
    std::uniform_real_distribution<double> xi(1.0, 3.0);
    std::uniform_real_distribution<double> wn(0.05, 2.0);
    for (int trial = 0; trial < 500; ++trial) {
        const PathGains g = path_gains(c1(rng), xi(rng), wn(rng));
        CHECK(g.alpha1 + g.alpha2 == doctest::Approx(1.0).epsilon(1e-14));
        CHECK(g.alpha3 <= 0.0);
        CHECK(g.alpha4 <= 0.0);
        CHECK(g.alpha5 <= 0.0);
    }
}

TEST_CASE("egoLeader election over every mix up to eight vehicles")
{
    for (int n = 2; n <= 8; ++n) {
        for (const auto& labels : all_label_strings(n)) {
            const EgoLeaderMap m = elect_ego_leaders(parse_config(labels));
            const auto expected = oracle_leaders(labels);
            REQUIRE(m.size() == labels.size());
            REQUIRE(m[0].is_external());
            for (std::size_t i = 1; i < labels.size(); ++i) {
                if (expected[i] < 0) {
                    REQUIRE(m[i].is_external());
                } else {
                    REQUIRE_FALSE(m[i].is_external());
                    REQUIRE(static_cast<int>(m[i].index()) == expected[i]);
                    REQUIRE(m[i].index() < i);
                }
            }
        }
    }
}

TEST_CASE("connectivity matrices follow the information-flow rule")
{
    for (int n = 2; n <= 7; ++n) {
        for (const auto& labels : all_label_strings(n)) {
            const PlatoonConfig cfg = parse_config(labels);
            const ConnectivityMatrix c = connectivity_matrix(cfg);
            const ConnectivityMatrix e = extended_connectivity_matrix(cfg);
            INFO(labels);
            REQUIRE(c.cells == oracle_matrix(labels, false));
            REQUIRE(e.cells == oracle_matrix(labels, true));
            REQUIRE(drop_external_column(e).cells == c.cells);
            REQUIRE(c.cells.diagonal().sum() == n);
            // only G reaches backwards
            if (labels.find('G') == std::string::npos) {
                REQUIRE(classify_matrix(c).lower_triangular);
            }
        }
    }
}

TEST_CASE("metrics are invariant under a common time shift")
{
    std::mt19937 rng(14);
    for (int trial = 0; trial < 20; ++trial) {
        const Trace c = random_trace(rng, 50, 4, 0.0);
        const Trace acc = random_trace(rng, 50, 4, 0.0);
        Trace cs = c;
        Trace as = acc;
        for (auto& t : cs.time) t += 123.4;
        for (auto& t : as.time) t += 123.4;
        const auto rule = AnalysisRule::fixed(1.0, 3.0);
        const auto rule_s = AnalysisRule::fixed(124.4, 126.4);
        CHECK(delta_a(c, acc, rule).value == doctest::Approx(delta_a(cs, as, rule_s).value));
        CHECK(eta(c, acc, rule) == doctest::Approx(eta(cs, as, rule_s)));
        const std::map<char, const Trace*> hom{{'P', &acc}};
        const std::map<char, const Trace*> hom_s{{'P', &as}};
        CHECK(delta_d(c, hom, rule).value == doctest::Approx(delta_d(cs, hom_s, rule_s).value));
    }
}

TEST_CASE("eta ignores a constant position offset")
{
    std::mt19937 rng(15);
    const Trace c = random_trace(rng, 30, 5, 0.0);
    const Trace acc = random_trace(rng, 30, 5, 0.0);
    Trace moved = c;
    moved.position.array() += 5000.0;
    const auto rule = AnalysisRule::fixed(0.0, 2.9);
    CHECK(eta(moved, acc, rule) == eta(c, acc, rule));
}

TEST_CASE("self comparison gives neutral metrics")
{
    std::mt19937 rng(16);
    for (int trial = 0; trial < 20; ++trial) {
        const Trace t = random_trace(rng, 40, 5, 0.0);
        const auto rule = AnalysisRule::fixed(0.0, 3.9);
        CHECK(delta_a(t, t, rule).value == 0.0);
        const std::map<char, const Trace*> hom{{'P', &t}};
        CHECK(delta_d(t, hom, rule).value == 0.0);
        CHECK(eta(t, t, rule) == 1.0);
    }
}

TEST_CASE("volatility is scale covariant")
{
    std::mt19937 rng(17);
    std::uniform_real_distribution<double> v(5.0, 40.0);
    std::uniform_real_distribution<double> k(0.01, 100.0);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<double> s(30);
        for (auto& x : s) x = v(rng);
        const double scale = k(rng);
        std::vector<double> scaled = s;
        for (auto& x : scaled) x *= scale;
        CHECK(volatility(scaled) == doctest::Approx(volatility(s)).epsilon(1e-12));
    }
}

TEST_CASE("throughput windows conserve the event count")
{
    std::mt19937 rng(18);
    std::uniform_real_distribution<double> t(0.0, 300.0);
    std::uniform_int_distribution<int> dev(0, 3);
    std::vector<CounterEvent> ev;
    std::array<long, 4> raw{};
    for (int i = 0; i < 2000; ++i) {
        const int d = dev(rng);
        ev.push_back({kDevices[static_cast<std::size_t>(d)], t(rng), i, 0});
        ++raw[static_cast<std::size_t>(d)];
    }
    const ThroughputSeries s = throughput_series(ev, 15.0, 0.0, 300.0);
    for (std::size_t d = 0; d < 4; ++d) {
        double total = 0.0;
        for (double x : s.per_device[d]) total += x * 15.0 / 3600.0;
        CHECK(total == doctest::Approx(static_cast<double>(raw[d])));
        CHECK(s.raw_counts[d] == raw[d]);
    }
}

TEST_CASE("box statistics are ordered")
{
    std::mt19937 rng(19);
    std::lognormal_distribution<double> x(0.0, 1.0);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> v(57);
        for (auto& e : v) e = x(rng);
        const BoxStats b = box_stats(v);
        CHECK(b.whisker_low <= b.q1);
        CHECK(b.q1 <= b.median);
        CHECK(b.median <= b.q3);
        CHECK(b.q3 <= b.whisker_high);
        for (double o : b.outliers) {
            CHECK((o < b.q1 - 1.5 * (b.q3 - b.q1) || o > b.q3 + 1.5 * (b.q3 - b.q1)));
        }
    }
}

}
