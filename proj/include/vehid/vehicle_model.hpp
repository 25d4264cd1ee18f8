#pragma once

// Single-track vehicle with Dugoff tires: slip kinematics, tire forces, body
// dynamics, wheel spin dynamics and first-order slip lag.

#include <algorithm>
#include <array>
#include <cmath>
#include <string>
#include <string_view>

#include "vehid/errors.hpp"

namespace vehid {

inline constexpr double kStiffnessScale = 1e5;

struct VehicleConstants {
    double mass = 1500.0;                 // [kg]
    double wheelbase = 2.7;               // [m]
    double gravity = 9.81;                // [m/s^2]
    double free_radius = 0.31;            // [m]
    double vertical_stiffness = 2.5e5;    // [N/m]
    double wheel_inertia = 1.2;           // [kg m^2]
    double friction = 0.9;                // [-]
    double lateral_stiffness = 2e5;       // [N/m], sets the relaxation length
    double c_kappa_nom_front = 1e5;       // [N]
    double c_kappa_nom_rear = 1e5;        // [N]
    double c_alpha_nom_front = 6e4;       // [N/rad]
    double c_alpha_nom_rear = 6e4;        // [N/rad]

    void validate() const
    {
        const std::array<double, 12> all{mass,           wheelbase,         gravity,
                                         free_radius,    vertical_stiffness, wheel_inertia,
                                         friction,       lateral_stiffness,  c_kappa_nom_front,
                                         c_kappa_nom_rear, c_alpha_nom_front, c_alpha_nom_rear};
        for (double v : all) {
            if (!(v > 0.0) || !std::isfinite(v)) {
                throw InvalidParameter("vehicle constants must be finite and strictly positive");
            }
        }
        if (friction > 1.5) throw InvalidParameter("friction coefficient must lie in (0, 1.5]");
        if (!(free_radius > mass * gravity / (2.0 * vertical_stiffness))) {
            throw InvalidParameter("free radius too small: loaded radius would be non-positive");
        }
    }

    friend bool operator==(const VehicleConstants&, const VehicleConstants&) = default;
};

inline constexpr std::size_t kParamCount = 6;

/// Parameters under inference. Stiffness deviations are in units of 1e5 N (or N/rad).
struct IdentifiedParams {
    double l_f = 1.3;
    double h_cog = 0.5;
    double d_ckf = 0.0;
    double d_ckr = 0.0;
    double d_caf = 0.0;
    double d_car = 0.0;

    [[nodiscard]] std::array<double, kParamCount> to_array() const
    {
        return {l_f, h_cog, d_ckf, d_ckr, d_caf, d_car};
    }

    static IdentifiedParams from_array(const std::array<double, kParamCount>& a)
    {
        return {a[0], a[1], a[2], a[3], a[4], a[5]};
    }

    friend bool operator==(const IdentifiedParams&, const IdentifiedParams&) = default;
};

inline constexpr std::array<std::string_view, kParamCount> kParamNames{
    "l_f", "h_cog", "d_Ckf", "d_Ckr", "d_Caf", "d_Car"};

/// Order of the stiffness channels shared by noise vectors and deviations.
enum StiffnessChannel : std::size_t { kKappaFront = 0, kKappaRear = 1, kAlphaFront = 2, kAlphaRear = 3 };

using StiffnessNoise = std::array<double, 4>;

struct EffectiveParams {
    double l_f = 0.0;
    double l_r = 0.0;
    double yaw_inertia = 0.0;
    double h_cog = 0.0;
    double c_kappa_front = 0.0;
    double c_kappa_rear = 0.0;
    double c_alpha_front = 0.0;
    double c_alpha_rear = 0.0;
    double relaxation_length = 0.0;
    double load_front_static = 0.0;
    double load_rear_static = 0.0;
};

inline constexpr std::size_t kStateSize = 9;
using StateVector = std::array<double, kStateSize>;

struct VehicleState {
    double v_x = 0.0;
    double v_y = 0.0;
    double yaw_rate = 0.0;
    double w_front = 0.0;
    double w_rear = 0.0;
    double alpha_hat_front = 0.0;
    double alpha_hat_rear = 0.0;
    double kappa_hat_front = 0.0;
    double kappa_hat_rear = 0.0;

    [[nodiscard]] StateVector to_vector() const
    {
        return {v_x,    v_y,           yaw_rate,        w_front,        w_rear,
                alpha_hat_front, alpha_hat_rear, kappa_hat_front, kappa_hat_rear};
    }

    static VehicleState from_vector(const StateVector& s)
    {
        return {s[0], s[1], s[2], s[3], s[4], s[5], s[6], s[7], s[8]};
    }

    friend bool operator==(const VehicleState&, const VehicleState&) = default;
};

/// Torques in N m; braking torques are non-positive.
struct ControlInput {
    double steer = 0.0;
    double traction_front = 0.0;
    double traction_rear = 0.0;
    double brake_front = 0.0;
    double brake_rear = 0.0;
};

struct TireForces {
    double fx_front = 0.0;
    double fx_rear = 0.0;
    double fy_front = 0.0;
    double fy_rear = 0.0;
    double fz_front = 0.0;
    double fz_rear = 0.0;
};

inline constexpr std::size_t kChannelCount = 5;

struct Measurement {
    double a_x = 0.0;
    double a_y = 0.0;
    double yaw_rate = 0.0;
    double w_front = 0.0;
    double w_rear = 0.0;

    [[nodiscard]] std::array<double, kChannelCount> to_array() const
    {
        return {a_x, a_y, yaw_rate, w_front, w_rear};
    }

    friend bool operator==(const Measurement&, const Measurement&) = default;
};

inline constexpr std::array<std::string_view, kChannelCount> kChannelNames{"a_x", "a_y", "r", "w_f",
                                                                           "w_r"};

struct AxlePair {
    double front = 0.0;
    double rear = 0.0;
};

struct TireForce {
    double fx = 0.0;
    double fy = 0.0;
};

/// Effective vehicle parameters for a draw of the identified parameters plus
/// per-trajectory stiffness process noise (same units as the deviations).
inline EffectiveParams resolve_params(const VehicleConstants& c, const IdentifiedParams& theta,
                                      const StiffnessNoise& noise = {})
{
    if (!(theta.l_f > 0.0 && theta.l_f < c.wheelbase)) {
        throw InvalidParameter("l_f must lie strictly inside the wheelbase");
    }
    if (!(theta.h_cog > 0.0)) throw InvalidParameter("h_cog must be positive");

    EffectiveParams e;
    e.l_f = theta.l_f;
    e.l_r = c.wheelbase - theta.l_f;
    e.yaw_inertia = c.mass * e.l_f * e.l_r;
    e.h_cog = theta.h_cog;
    e.c_kappa_front = c.c_kappa_nom_front + kStiffnessScale * (theta.d_ckf + noise[kKappaFront]);
    e.c_kappa_rear = c.c_kappa_nom_rear + kStiffnessScale * (theta.d_ckr + noise[kKappaRear]);
    e.c_alpha_front = c.c_alpha_nom_front + kStiffnessScale * (theta.d_caf + noise[kAlphaFront]);
    e.c_alpha_rear = c.c_alpha_nom_rear + kStiffnessScale * (theta.d_car + noise[kAlphaRear]);
    if (!(e.c_kappa_front > 0.0 && e.c_kappa_rear > 0.0 && e.c_alpha_front > 0.0 &&
          e.c_alpha_rear > 0.0)) {
        throw RejectedSample("non-positive effective tire stiffness");
    }
    e.relaxation_length = e.c_alpha_front / c.lateral_stiffness;
    const double weight = c.mass * c.gravity;
    e.load_front_static = weight * e.l_r / c.wheelbase;
    e.load_rear_static = weight * e.l_f / c.wheelbase;
    return e;
}

/// Slip angles from the contact-patch velocities; rear steering is zero.
inline AxlePair slip_angles(const VehicleState& s, const ControlInput& u, const EffectiveParams& e)
{
    if (!(s.v_x > 0.0)) throw InvalidState("slip angles need V_x > 0");
    return {-std::atan((s.v_y + e.l_f * s.yaw_rate) / s.v_x) + u.steer,
            -std::atan((s.v_y - e.l_r * s.yaw_rate) / s.v_x)};
}

/// Longitudinal velocity of each wheel centre expressed in its own wheel frame.
inline AxlePair wheel_frame_speeds(const VehicleState& s, const ControlInput& u,
                                   const EffectiveParams& e)
{
    return {s.v_x * std::cos(u.steer) + (s.v_y + e.l_f * s.yaw_rate) * std::sin(u.steer), s.v_x};
}

inline double longitudinal_slip(double rolling_speed, double wheel_speed)
{
    const double denom = std::max(rolling_speed, wheel_speed);
    if (!(denom > 0.0)) throw InvalidState("longitudinal slip undefined: wheel and ground speed <= 0");
    return (rolling_speed - wheel_speed) / denom;
}

inline AxlePair longitudinal_slips(const VehicleState& s, const ControlInput& u,
                                   const EffectiveParams& e, double r_eff_front, double r_eff_rear)
{
    const AxlePair v = wheel_frame_speeds(s, u, e);
    return {longitudinal_slip(r_eff_front * s.w_front, v.front),
            longitudinal_slip(r_eff_rear * s.w_rear, v.rear)};
}

/// Rolling radius: 2/3 free + 1/3 loaded, the loaded radius being the free
/// radius minus the static deflection F_z / C_vert.
inline double effective_radius(double load, const VehicleConstants& c)
{
    if (!(load > 0.0)) throw InvalidState("effective radius needs a positive load");
    const double loaded = c.free_radius - load / c.vertical_stiffness;
    if (!(loaded > 0.0)) throw InvalidParameter("loaded tire radius is non-positive");
    return (2.0 / 3.0) * c.free_radius + (1.0 / 3.0) * loaded;
}

/// Axle loads with longitudinal load transfer m a_x h / L.
inline AxlePair axle_loads(const EffectiveParams& e, const VehicleConstants& c, double a_x)
{
    const double transfer = c.mass * a_x * e.h_cog / c.wheelbase;
    AxlePair f{e.load_front_static - transfer, e.load_rear_static + transfer};
    if (!(f.front > 0.0 && f.rear > 0.0)) throw InvalidState("axle load non-positive");
    return f;
}

/// Dugoff saturation factor f(lambda).
inline double dugoff_saturation(double lambda)
{
    return lambda < 1.0 ? (2.0 - lambda) * lambda : 1.0;
}

inline TireForce dugoff_forces(double kappa, double alpha, double load, double c_kappa,
                               double c_alpha, double mu)
{
    if (!(load > 0.0)) throw InvalidState("tire load must be positive");
    const double one_plus = 1.0 + kappa;
    if (!(one_plus > 0.0)) throw InvalidState("longitudinal slip <= -1");
    const double sx = c_kappa * kappa;
    const double sy = c_alpha * std::tan(alpha);
    const double demand = std::hypot(sx, sy);
    if (demand == 0.0) return {};
    const double lambda = mu * load * one_plus / (2.0 * demand);
    const double f = dugoff_saturation(lambda);
    return {sx / one_plus * f, sy / one_plus * f};
}

/// Vehicle sideslip at the COG; diagnostic only.
inline double sideslip(const VehicleState& s) { return std::atan2(s.v_y, s.v_x); }

struct ModelEvaluation {
    StateVector derivative{};
    TireForces forces;
    double a_x = 0.0;   // longitudinal specific force consistent with the loads used
};

namespace detail {

inline TireForces forces_at(const VehicleState& s, const EffectiveParams& e,
                            const VehicleConstants& c, const AxlePair& loads)
{
    const TireForce front = dugoff_forces(s.kappa_hat_front, s.alpha_hat_front, loads.front,
                                          e.c_kappa_front, e.c_alpha_front, c.friction);
    const TireForce rear = dugoff_forces(s.kappa_hat_rear, s.alpha_hat_rear, loads.rear,
                                         e.c_kappa_rear, e.c_alpha_rear, c.friction);
    return {front.fx, rear.fx, front.fy, rear.fy, loads.front, loads.rear};
}

inline double specific_force_x(const TireForces& f, double steer, double mass)
{
    return (f.fx_front * std::cos(steer) - f.fy_front * std::sin(steer) + f.fx_rear) / mass;
}

}  // namespace detail

/// Time derivative of the 9-dimensional state.
///
/// Tire forces come from the delayed slips. The loads depend on a_x, which in
/// turn depends on the forces through the Dugoff saturation; that loop is
/// resolved by fixed-point iteration seeded with `a_x_guess` (the loop gain
/// is about mu * h_cog / L, well below one).
inline ModelEvaluation state_derivative(const VehicleState& s, const ControlInput& u,
                                        const EffectiveParams& e, const VehicleConstants& c,
                                        double a_x_guess)
{
    if (!(s.v_x > 0.0)) throw InvalidState("V_x must stay positive");

    double a_x = a_x_guess;
    AxlePair loads;
    TireForces f;
    constexpr int kMaxIterations = 60;
    int it = 0;
    for (; it < kMaxIterations; ++it) {
        loads = axle_loads(e, c, a_x);
        f = detail::forces_at(s, e, c, loads);
        const double next = detail::specific_force_x(f, u.steer, c.mass);
        const bool done = std::abs(next - a_x) <= 1e-13 * (1.0 + std::abs(next));
        a_x = next;
        if (done) break;
    }
    if (it == kMaxIterations || !std::isfinite(a_x)) {
        throw InvalidState("load-transfer iteration did not converge");
    }
    loads = axle_loads(e, c, a_x);
    f = detail::forces_at(s, e, c, loads);

    const double r_front = effective_radius(loads.front, c);
    const double r_rear = effective_radius(loads.rear, c);
    const AxlePair alpha = slip_angles(s, u, e);
    const AxlePair kappa = longitudinal_slips(s, u, e, r_front, r_rear);

    const double cd = std::cos(u.steer);
    const double sd = std::sin(u.steer);
    const double lat_front = f.fx_front * sd + f.fy_front * cd;
    const double lag_rate = s.v_x / e.relaxation_length;

    ModelEvaluation out;
    auto& d = out.derivative;
    d[0] = (f.fx_front * cd - f.fy_front * sd + f.fx_rear) / c.mass + s.v_y * s.yaw_rate;
    d[1] = (lat_front + f.fy_rear) / c.mass - s.v_x * s.yaw_rate;
    d[2] = (e.l_f * lat_front - e.l_r * f.fy_rear) / e.yaw_inertia;
    d[3] = (u.traction_front + u.brake_front - f.fx_front * r_front) / c.wheel_inertia;
    d[4] = (u.traction_rear + u.brake_rear - f.fx_rear * r_rear) / c.wheel_inertia;
    d[5] = lag_rate * (alpha.front - s.alpha_hat_front);
    d[6] = lag_rate * (alpha.rear - s.alpha_hat_rear);
    d[7] = lag_rate * (kappa.front - s.kappa_hat_front);
    d[8] = lag_rate * (kappa.rear - s.kappa_hat_rear);
    out.forces = f;
    out.a_x = a_x;
    return out;
}

/// Body-frame specific force (without the V r coupling terms) plus the
/// rotational channels copied from the state.
inline Measurement measurement_of(const VehicleState& s, const ControlInput& u, const TireForces& f,
                                  double mass)
{
    const double cd = std::cos(u.steer);
    const double sd = std::sin(u.steer);
    return {(f.fx_front * cd - f.fy_front * sd + f.fx_rear) / mass,
            (f.fx_front * sd + f.fy_front * cd + f.fy_rear) / mass, s.yaw_rate, s.w_front,
            s.w_rear};
}

}  // namespace vehid
