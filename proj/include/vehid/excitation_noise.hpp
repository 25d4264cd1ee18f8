#pragma once

// Excitation inputs and every stochastic element of the simulator.

#include <array>
#include <cmath>
#include <numbers>
#include <random>

#include "vehid/errors.hpp"
#include "vehid/rng.hpp"
#include "vehid/vehicle_model.hpp"

namespace vehid {

/// Sinusoidal steering plus a gas/brake square wave. Traction goes entirely
/// to the front axle; braking is split between the axles.
struct ExcitationProfile {
    double steer_amplitude = 0.04;    // [rad]
    double steer_period = 4.0;        // [s]
    double torque_amplitude = 250.0;  // [N m]
    double torque_period = 5.0;       // [s]
    double duration = 5.0;            // [s]
    double brake_front_share = 0.6;

    void validate() const
    {
        if (!(steer_amplitude >= 0.0 && torque_amplitude >= 0.0)) {
            throw InvalidParameter("excitation amplitudes must be non-negative");
        }
        if (!(steer_period > 0.0 && torque_period > 0.0 && duration > 0.0)) {
            throw InvalidParameter("excitation periods and duration must be positive");
        }
        if (!(brake_front_share >= 0.0 && brake_front_share <= 1.0)) {
            throw InvalidParameter("brake_front_share must lie in [0, 1]");
        }
        if (!(steer_amplitude < std::numbers::pi / 4)) {
            throw InvalidParameter("steering amplitude must stay below pi/4");
        }
    }

    friend bool operator==(const ExcitationProfile&, const ExcitationProfile&) = default;
};

/// True during the first half of each torque period.
inline bool traction_phase(double t, const ExcitationProfile& p)
{
    const double phase = t - p.torque_period * std::floor(t / p.torque_period);
    return phase < 0.5 * p.torque_period;
}

inline double steering_at(double t, const ExcitationProfile& p)
{
    return p.steer_amplitude * std::sin(2.0 * std::numbers::pi * t / p.steer_period);
}

/// Control input with the steering evaluated at `t` and the square-wave phase
/// taken at `phase_time`. The integrator passes the centre of the current
/// step as `phase_time`, so that a switch never falls inside a step.
inline ControlInput input_at(double t, double phase_time, const ExcitationProfile& p)
{
    ControlInput u;
    u.steer = steering_at(t, p);
    if (traction_phase(phase_time, p)) {
        u.traction_front = p.torque_amplitude;
    } else {
        u.brake_front = -p.brake_front_share * p.torque_amplitude;
        u.brake_rear = -(1.0 - p.brake_front_share) * p.torque_amplitude;
    }
    return u;
}

inline ControlInput input_at(double t, const ExcitationProfile& p) { return input_at(t, t, p); }

struct MixtureComponent {
    double mean = 0.0;
    double std = 0.0;
    friend bool operator==(const MixtureComponent&, const MixtureComponent&) = default;
};

inline constexpr std::size_t kMixtureComponents = 10;
using StiffnessMixture = std::array<MixtureComponent, kMixtureComponents>;

struct NoiseSpec {
    /// Per stiffness channel (order of StiffnessChannel), in units of 1e5.
    std::array<StiffnessMixture, 4> stiffness{};
    double meas_rel_std_rotational = 0.05;
    double meas_rel_std_accel = 0.10;
    double v0_min = 10.0;
    double v0_max = 11.0;

    void validate() const
    {
        for (const auto& channel : stiffness) {
            for (const auto& c : channel) {
                if (!(c.std >= 0.0) || !std::isfinite(c.mean)) {
                    throw InvalidParameter("mixture component std must be non-negative");
                }
            }
        }
        if (!(meas_rel_std_rotational >= 0.0 && meas_rel_std_accel >= 0.0)) {
            throw InvalidParameter("measurement noise levels must be non-negative");
        }
        if (!(v0_min > 0.0 && v0_max >= v0_min)) throw InvalidParameter("bad initial speed range");
    }

    /// Noise-free variant at a fixed initial speed.
    static NoiseSpec none(double v0 = 10.0)
    {
        NoiseSpec s;
        s.meas_rel_std_rotational = 0.0;
        s.meas_rel_std_accel = 0.0;
        s.v0_min = s.v0_max = v0;
        return s;
    }

    friend bool operator==(const NoiseSpec&, const NoiseSpec&) = default;
};

/// Draws the mixture components once: means uniform in +-5% of nominal,
/// standard deviations uniform in (0, 5%] of nominal.
inline NoiseSpec make_noise_spec(const RngStream& setup, const VehicleConstants& c,
                                 double fraction = 0.05)
{
    NoiseSpec spec;
    const std::array<double, 4> nominal{c.c_kappa_nom_front, c.c_kappa_nom_rear,
                                        c.c_alpha_nom_front, c.c_alpha_nom_rear};
    Engine eng = setup.engine();
    for (std::size_t ch = 0; ch < 4; ++ch) {
        const double bound = fraction * nominal[ch] / kStiffnessScale;
        for (auto& comp : spec.stiffness[ch]) {
            comp.mean = uniform(eng, -bound, bound);
            comp.std = bound - uniform(eng, 0.0, bound);   // (0, bound]
        }
    }
    return spec;
}

/// One process-noise draw per trajectory: pick a component uniformly, then
/// sample its Gaussian.
inline StiffnessNoise sample_stiffness_noise(Engine& eng, const NoiseSpec& spec)
{
    StiffnessNoise out{};
    std::uniform_int_distribution<std::size_t> pick(0, kMixtureComponents - 1);
    for (std::size_t ch = 0; ch < 4; ++ch) {
        const auto& comp = spec.stiffness[ch][pick(eng)];
        out[ch] = gaussian(eng, comp.mean, comp.std);
    }
    return out;
}

/// Zero-mean Gaussian noise proportional to the magnitude of each clean channel.
inline Measurement add_measurement_noise(Engine& eng, const Measurement& clean,
                                         const NoiseSpec& spec)
{
    auto noisy = [&](double v, double rel) { return v + gaussian(eng, 0.0, rel * std::abs(v)); };
    Measurement m;
    m.a_x = noisy(clean.a_x, spec.meas_rel_std_accel);
    m.a_y = noisy(clean.a_y, spec.meas_rel_std_accel);
    m.yaw_rate = noisy(clean.yaw_rate, spec.meas_rel_std_rotational);
    m.w_front = noisy(clean.w_front, spec.meas_rel_std_rotational);
    m.w_rear = noisy(clean.w_rear, spec.meas_rel_std_rotational);
    return m;
}

/// Straight rolling at a random initial speed.
inline VehicleState sample_initial_state(Engine& eng, const NoiseSpec& spec, const AxlePair& radius)
{
    if (!(radius.front > 0.0 && radius.rear > 0.0)) {
        throw InvalidParameter("rolling radius must be positive");
    }
    const double v0 = spec.v0_max > spec.v0_min ? uniform(eng, spec.v0_min, spec.v0_max)
                                                : spec.v0_min;
    VehicleState s;
    s.v_x = v0;
    s.w_front = v0 / radius.front;
    s.w_rear = v0 / radius.rear;
    return s;
}

}  // namespace vehid
