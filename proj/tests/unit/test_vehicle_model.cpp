#include "catch_amalgamated.hpp"

#include <cmath>

#include "vehid/vehicle_model.hpp"

using namespace vehid;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

EffectiveParams nominal(double l_f = 1.3)
{
    IdentifiedParams p;
    p.l_f = l_f;
    return resolve_params(VehicleConstants{}, p);
}

}  // namespace

TEST_CASE("resolved parameters follow the constants")
{
    const EffectiveParams e = nominal(1.3);
    CHECK_THAT(e.l_r, WithinAbs(1.4, 1e-12));
    CHECK_THAT(e.yaw_inertia, WithinAbs(2730.0, 1e-9));
    CHECK_THAT(e.relaxation_length, WithinAbs(0.3, 1e-12));

    const EffectiveParams mid = nominal(1.35);
    CHECK_THAT(mid.load_front_static, WithinAbs(7357.5, 1e-9));
    CHECK_THAT(mid.load_rear_static, WithinAbs(7357.5, 1e-9));
}

TEST_CASE("stiffness deviations and noise add in units of 1e5")
{
    IdentifiedParams p;
    p.d_ckf = 0.2;
    p.d_car = -0.3;
    const EffectiveParams e = resolve_params(VehicleConstants{}, p, {0.01, 0.0, 0.0, 0.02});
    CHECK_THAT(e.c_kappa_front, WithinAbs(1.21e5, 1e-6));
    CHECK_THAT(e.c_kappa_rear, WithinAbs(1e5, 1e-6));
    CHECK_THAT(e.c_alpha_rear, WithinAbs(3.2e4, 1e-6));
}

TEST_CASE("parameter validation")
{
    IdentifiedParams p;
    p.l_f = 2.7;
    CHECK_THROWS_AS(resolve_params(VehicleConstants{}, p), InvalidParameter);
    p.l_f = 1.3;
    p.h_cog = 0.0;
    CHECK_THROWS_AS(resolve_params(VehicleConstants{}, p), InvalidParameter);
    p.h_cog = 0.5;
    p.d_caf = -0.7;
    CHECK_THROWS_AS(resolve_params(VehicleConstants{}, p), RejectedSample);

    VehicleConstants c;
    c.mass = -1.0;
    CHECK_THROWS_AS(c.validate(), InvalidParameter);
}

TEST_CASE("slip angle at the front axle")
{
    VehicleState s;
    s.v_x = 10.0;
    s.v_y = 0.5;
    s.yaw_rate = 0.1;
    ControlInput u;
    u.steer = 0.05;
    const AxlePair a = slip_angles(s, u, nominal(1.3));
    CHECK_THAT(a.front, WithinAbs(-0.0129168489, 1e-9));
    CHECK_THAT(a.rear, WithinAbs(-std::atan((0.5 - 1.4 * 0.1) / 10.0), 1e-15));

    s.v_x = 0.0;
    CHECK_THROWS_AS(slip_angles(s, u, nominal()), InvalidState);
}

TEST_CASE("longitudinal slip branches")
{
    CHECK_THAT(longitudinal_slip(10.5, 10.0), WithinAbs(0.047619047619, 1e-11));
    CHECK_THAT(longitudinal_slip(9.0, 10.0), WithinAbs(-0.1, 1e-15));
    CHECK(longitudinal_slip(10.0, 10.0) == 0.0);
    CHECK_THROWS_AS(longitudinal_slip(0.0, 0.0), InvalidState);
}

TEST_CASE("effective rolling radius")
{
    const VehicleConstants c;
    CHECK_THAT(effective_radius(4000.0, c), WithinAbs(0.3046666667, 1e-9));
    CHECK_THROWS_AS(effective_radius(0.0, c), InvalidState);
    CHECK_THROWS_AS(effective_radius(1e6, c), InvalidParameter);
}

TEST_CASE("longitudinal load transfer")
{
    const VehicleConstants c;
    IdentifiedParams p;
    p.h_cog = 0.5;
    const EffectiveParams e = resolve_params(c, p);
    const AxlePair still = axle_loads(e, c, 0.0);
    const AxlePair accel = axle_loads(e, c, 2.0);
    CHECK_THAT(still.front - accel.front, WithinAbs(555.5555556, 1e-6));
    CHECK_THAT(accel.rear - still.rear, WithinAbs(555.5555556, 1e-6));
    CHECK_THAT(accel.front + accel.rear, WithinRel(c.mass * c.gravity, 1e-14));
    CHECK_THROWS_AS(axle_loads(e, c, 100.0), InvalidState);
}

TEST_CASE("Dugoff tire in the near-linear regime")
{
    const TireForce f = dugoff_forces(0.0, 0.03, 4000.0, 1e5, 6e4, 0.9);
    const double sy = 6e4 * std::tan(0.03);
    const double lambda = 0.9 * 4000.0 / (2.0 * sy);
    CHECK_THAT(lambda, WithinAbs(0.99970, 5e-6));
    CHECK_THAT(dugoff_saturation(lambda), WithinAbs(1.0, 1e-6));
    CHECK_THAT(f.fy, WithinAbs(1800.0, 1.0));
    CHECK(f.fx == 0.0);

    const TireForce zero = dugoff_forces(0.0, 0.0, 4000.0, 1e5, 6e4, 0.9);
    CHECK(zero.fx == 0.0);
    CHECK(zero.fy == 0.0);
}

TEST_CASE("Dugoff saturation is continuous at lambda = 1")
{
    for (double eps : {1e-3, 1e-4, 1e-6, 1e-9}) {
        CHECK(std::abs(dugoff_saturation(1.0 - eps) - 1.0) <= 2.0 * eps);
    }
    CHECK(dugoff_saturation(1.0) == 1.0);
    CHECK(dugoff_saturation(3.0) == 1.0);
}

TEST_CASE("Dugoff force never exceeds the friction circle")
{
    for (double k : {-0.5, -0.1, 0.0, 0.05, 0.3}) {
        for (double a : {-0.3, -0.05, 0.02, 0.2}) {
            const TireForce f = dugoff_forces(k, a, 5000.0, 1e5, 6e4, 0.9);
            CHECK(std::hypot(f.fx, f.fy) <= 0.9 * 5000.0 * (1.0 + 1e-12));
        }
    }
    CHECK_THROWS_AS(dugoff_forces(-1.0, 0.0, 5000.0, 1e5, 6e4, 0.9), InvalidState);
    CHECK_THROWS_AS(dugoff_forces(0.0, 0.0, 0.0, 1e5, 6e4, 0.9), InvalidState);
}

TEST_CASE("force-free rolling is a fixed point")
{
    const VehicleConstants c;
    const EffectiveParams e = nominal(1.35);
    VehicleState s;
    s.v_x = 10.5;
    s.w_front = s.v_x / effective_radius(e.load_front_static, c);
    s.w_rear = s.v_x / effective_radius(e.load_rear_static, c);
    const ModelEvaluation ev = state_derivative(s, ControlInput{}, e, c, 0.0);
    for (double d : ev.derivative) CHECK(std::abs(d) < 1e-12);
    CHECK(ev.a_x == 0.0);
}

TEST_CASE("converged slip lag has zero rate")
{
    const VehicleConstants c;
    const EffectiveParams e = nominal();
    VehicleState s;
    s.v_x = 10.0;
    s.v_y = 0.2;
    s.yaw_rate = 0.05;
    s.w_front = 10.0 / effective_radius(e.load_front_static, c);
    s.w_rear = s.w_front;
    ControlInput u;
    u.steer = 0.02;
    const AxlePair a = slip_angles(s, u, e);
    s.alpha_hat_front = a.front;
    s.alpha_hat_rear = a.rear;
    const ModelEvaluation ev = state_derivative(s, u, e, c, 0.0);
    CHECK(std::abs(ev.derivative[5]) < 1e-12);
    CHECK(std::abs(ev.derivative[6]) < 1e-12);
}

TEST_CASE("state derivative at an arbitrary state")
{
    const VehicleConstants c;
    const IdentifiedParams p{1.35, 0.55, 0.2, -0.1, 0.05, -0.1};
    const EffectiveParams e = resolve_params(c, p);
    const VehicleState s{10.4, 0.12, 0.08, 34.5, 34.0, 0.01, -0.004, 0.015, -0.006};
    ControlInput u;
    u.steer = 0.03;
    u.brake_front = -150.0;
    u.brake_rear = -100.0;

    const ModelEvaluation ev = state_derivative(s, u, e, c, 0.0);
    const StateVector expected{0.816354604258672,  -0.5039247036036,    0.441743001353315,
                               -569.116272613402,  52.4187743016961,    -0.0614261024950954,
                               0.0910769394628909, -0.585408701574684, -0.437892446950737};
    for (std::size_t i = 0; i < kStateSize; ++i) {
        INFO("component " << i);
        CHECK_THAT(ev.derivative[i], WithinRel(expected[i], 1e-9) || WithinAbs(expected[i], 1e-12));
    }
    CHECK_THAT(ev.a_x, WithinRel(0.8067546042586723, 1e-9));
}

TEST_CASE("load-transfer iteration does not depend on its seed")
{
    const VehicleConstants c;
    const EffectiveParams e = nominal();
    const VehicleState s{10.0, 0.0, 0.0, 33.0, 32.5, 0.02, 0.01, 0.03, -0.01};
    const ModelEvaluation a = state_derivative(s, ControlInput{}, e, c, 0.0);
    const ModelEvaluation b = state_derivative(s, ControlInput{}, e, c, 5.0);
    for (std::size_t i = 0; i < kStateSize; ++i) {
        CHECK_THAT(a.derivative[i], WithinRel(b.derivative[i], 1e-11) || WithinAbs(b.derivative[i], 1e-13));
    }
}

TEST_CASE("measurement channels")
{
    STATIC_REQUIRE(kChannelCount == 5);
    VehicleState s;
    s.yaw_rate = 0.3;
    s.w_front = 33.0;
    s.w_rear = 32.0;

    const Measurement zero = measurement_of(s, ControlInput{}, TireForces{}, 1500.0);
    CHECK(zero.a_x == 0.0);
    CHECK(zero.a_y == 0.0);
    CHECK(zero.yaw_rate == 0.3);
    CHECK(zero.w_front == 33.0);
    CHECK(zero.w_rear == 32.0);

    TireForces f;
    f.fx_front = 900.0;
    f.fx_rear = 600.0;
    f.fy_front = 300.0;
    f.fy_rear = 150.0;
    const Measurement m = measurement_of(s, ControlInput{}, f, 1500.0);
    CHECK_THAT(m.a_x, WithinAbs(1.0, 1e-15));
    CHECK_THAT(m.a_y, WithinAbs(0.3, 1e-15));
}

TEST_CASE("sideslip diagnostic")
{
    VehicleState s;
    s.v_x = 10.0;
    s.v_y = 0.5;
    CHECK_THAT(sideslip(s), WithinAbs(std::atan(0.05), 1e-15));
}
