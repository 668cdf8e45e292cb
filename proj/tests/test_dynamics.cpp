#include <doctest.h>

#include <cmath>
#include <limits>

#include "mixplat/dynamics.hpp"

using namespace mixplat;

TEST_SUITE("dynamics") {

TEST_CASE("zero input keeps a cruising vehicle unchanged")
{
    DynamicsParams p;
    VehicleState s;
    s.speed = 25.0;
    const VehicleState n = step_vehicle(s, 0.0, p);
    CHECK(n.accel == 0.0);
    CHECK(n.speed == 25.0);
    CHECK(n.position == doctest::Approx(0.25));
}

TEST_CASE("one step follows the semi-implicit update literally")
{
    DynamicsParams p;
    VehicleState s;
    s.position = 10.0;
    s.speed = 20.0;
    s.accel = 0.3;
    const double u = 1.7;
    const VehicleState n = step_vehicle(s, u, p);
    // hand-evaluated oracle
    const double a = 0.3 + (0.01 / 0.5) * (1.7 - 0.3);
    const double v = 20.0 + a * 0.01;
    CHECK(n.accel == doctest::Approx(a).epsilon(1e-15));
    CHECK(n.speed == doctest::Approx(v).epsilon(1e-15));
    CHECK(n.position == doctest::Approx(10.0 + v * 0.01).epsilon(1e-15));
    CHECK(n.ctrl_input == 1.7);
}

TEST_CASE("step response at t = tau is near 1 - 1/e")
{
    DynamicsParams p;
    VehicleState s;
    s.speed = 20.0;
    for (int k = 0; k < 50; ++k) {
        s = step_vehicle(s, 1.0, p);
    }
    // discrete oracle 1 - (1 - dt/tau)^n and the continuous one differ by well under one dt
    const double discrete = 1.0 - std::pow(1.0 - 0.01 / 0.5, 50);
    CHECK(s.accel == doctest::Approx(discrete).epsilon(1e-12));
    CHECK(std::abs(s.accel - (1.0 - std::exp(-1.0))) < 0.01);
}

TEST_CASE("speed is clamped at standstill and resting vehicles report no deceleration")
{
    DynamicsParams p;
    VehicleState s;
    s.speed = 0.005;
    s.accel = -1.0;
    const VehicleState n = step_vehicle(s, -1.0, p);
    CHECK(n.speed == 0.0);
    CHECK(n.accel == 0.0);
}

TEST_CASE("input clamp and emergency bound")
{
    DynamicsParams p;
    CHECK(clamp_input(5.0, p) == 2.5);
    CHECK(clamp_input(-12.0, p) == -8.0);
    CHECK(clamp_input(-3.0, p) == -3.0);
    DynamicsParams q;
    q.u_min = -5.0;
    q.emergency_u_min = -9.0;
    CHECK(clamp_input(-12.0, q) == -5.0);
    CHECK(clamp_input(-12.0, q, true) == -9.0);
}

TEST_CASE("non-finite input is rejected")
{
    DynamicsParams p;
    VehicleState s;
    CHECK_THROWS_AS(step_vehicle(s, std::numeric_limits<double>::quiet_NaN(), p), InvalidInput);
    CHECK_THROWS_AS(step_vehicle(s, std::numeric_limits<double>::infinity(), p), InvalidInput);
    s.speed = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(step_vehicle(s, 0.0, p), InvalidInput);
}

TEST_CASE("parameter validation")
{
    DynamicsParams p;
    CHECK_NOTHROW(p.validate());
    DynamicsParams bad = p;
    bad.tau = 0.0;
    CHECK_THROWS_AS(bad.validate(), InvalidInput);
    bad = p;
    bad.dt = -0.01;
    CHECK_THROWS_AS(bad.validate(), InvalidInput);
    bad = p;
    bad.u_max = -1.0;
    CHECK_THROWS_AS(bad.validate(), InvalidInput);
    bad = p;
    bad.emergency_u_min = -7.0;
    CHECK_THROWS_AS(bad.validate(), InvalidInput);
}

}
