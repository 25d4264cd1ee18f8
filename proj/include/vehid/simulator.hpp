#pragma once

// Fixed-step integration of the vehicle model under the excitation profile,
// producing noisy 5-channel measurement trajectories.

#include <array>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "vehid/errors.hpp"
#include "vehid/excitation_noise.hpp"
#include "vehid/parallel.hpp"
#include "vehid/rng.hpp"
#include "vehid/vehicle_model.hpp"

namespace vehid {

/// Classical fourth-order Runge-Kutta step for any fixed-size state array.
/// `deriv(t, x)` returns dx/dt.
template <typename Real, std::size_t N, typename Deriv>
std::array<Real, N> rk4_step(Deriv&& deriv, const std::array<Real, N>& x, Real t, Real dt)
{
    auto axpy = [](const std::array<Real, N>& a, const std::array<Real, N>& k, Real h) {
        std::array<Real, N> out;
        for (std::size_t i = 0; i < N; ++i) out[i] = a[i] + h * k[i];
        return out;
    };
    const auto k1 = deriv(t, x);
    const auto k2 = deriv(t + dt / 2, axpy(x, k1, dt / 2));
    const auto k3 = deriv(t + dt / 2, axpy(x, k2, dt / 2));
    const auto k4 = deriv(t + dt, axpy(x, k3, dt));
    std::array<Real, N> out;
    for (std::size_t i = 0; i < N; ++i) {
        out[i] = x[i] + dt / 6 * (k1[i] + 2 * k2[i] + 2 * k3[i] + k4[i]);
    }
    return out;
}

struct SimConfig {
    double sample_rate = 200.0;   // [Hz]
    double duration = 5.0;        // [s]
    int substeps_per_sample = 5;
    VehicleConstants constants;
    ExcitationProfile profile;
    NoiseSpec noise;

    [[nodiscard]] std::size_t sample_count() const
    {
        return static_cast<std::size_t>(std::llround(sample_rate * duration));
    }

    [[nodiscard]] double substep() const { return 1.0 / (sample_rate * substeps_per_sample); }

    void validate() const
    {
        if (!(sample_rate > 0.0 && duration > 0.0)) {
            throw InvalidParameter("sample rate and duration must be positive");
        }
        if (substeps_per_sample < 1) throw InvalidParameter("substeps_per_sample must be >= 1");
        if (std::abs(sample_rate * duration - static_cast<double>(sample_count())) > 1e-9) {
            throw InvalidParameter("sample_rate * duration must be an integer sample count");
        }
        if (std::abs(profile.duration - duration) > 1e-12) {
            throw InvalidParameter("excitation duration must equal the simulation duration");
        }
        constants.validate();
        profile.validate();
        noise.validate();
    }

    friend bool operator==(const SimConfig&, const SimConfig&) = default;
};

struct TrajectoryRecord {
    std::vector<double> t;
    std::array<std::vector<double>, kChannelCount> channels;
    IdentifiedParams theta_used;
    RngStream seed;
    bool valid = false;
    std::string failure;   // reason when !valid

    [[nodiscard]] std::size_t size() const { return t.size(); }
};

struct StepResult {
    VehicleState state;
    double a_x = 0.0;
};

/// One RK4 step of the 9-state model. `a_x_prev` seeds the load-transfer
/// iteration; the returned a_x is the value at the last stage.
inline StepResult integrate_step(const VehicleState& state, double t, double dt,
                                 const ExcitationProfile& profile, const EffectiveParams& eff,
                                 const VehicleConstants& constants, double a_x_prev)
{
    const double phase_time = t + 0.5 * dt;
    double a_x = a_x_prev;
    auto deriv = [&](double tau, const StateVector& x) {
        const ModelEvaluation ev = state_derivative(
            VehicleState::from_vector(x), input_at(tau, phase_time, profile), eff, constants, a_x);
        a_x = ev.a_x;
        return ev.derivative;
    };
    const StateVector next = rk4_step(deriv, state.to_vector(), t, dt);
    for (double v : next) {
        if (!std::isfinite(v)) throw InvalidState("non-finite state after integration step");
    }
    if (!(next[0] > 0.0)) throw InvalidState("V_x dropped to zero");
    return {VehicleState::from_vector(next), a_x};
}

/// Clean (noise-free) measurements and the state at each sample instant for a
/// given effective parameter set and initial state. Throws on invalid states.
struct CleanTrajectory {
    std::vector<double> t;
    std::vector<Measurement> measurements;
    std::vector<VehicleState> states;
};

inline CleanTrajectory integrate_clean(VehicleState state, const EffectiveParams& eff,
                                       const SimConfig& cfg)
{
    const std::size_t n = cfg.sample_count();
    const double sample_dt = 1.0 / cfg.sample_rate;
    const double dt = cfg.substep();
    CleanTrajectory out;
    out.t.reserve(n);
    out.measurements.reserve(n);
    out.states.reserve(n);
    double a_x = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        const double t_k = static_cast<double>(k) * sample_dt;
        const ControlInput u = input_at(t_k, t_k + 0.5 * dt, cfg.profile);
        const ModelEvaluation ev = state_derivative(state, u, eff, cfg.constants, a_x);
        a_x = ev.a_x;
        out.t.push_back(t_k);
        out.measurements.push_back(measurement_of(state, u, ev.forces, cfg.constants.mass));
        out.states.push_back(state);
        if (k + 1 == n) break;
        for (int j = 0; j < cfg.substeps_per_sample; ++j) {
            const double t = (static_cast<double>(k) * cfg.substeps_per_sample + j) * dt;
            const StepResult step = integrate_step(state, t, dt, cfg.profile, eff, cfg.constants, a_x);
            state = step.state;
            a_x = step.a_x;
        }
    }
    return out;
}

/// Rolling radii at the static loads, used for the equilibrium initial state.
inline AxlePair static_radii(const EffectiveParams& eff, const VehicleConstants& c)
{
    return {effective_radius(eff.load_front_static, c), effective_radius(eff.load_rear_static, c)};
}

/// Simulates one noisy trajectory. Never throws for model failures: those
/// come back as a record with valid == false.
inline TrajectoryRecord simulate(const IdentifiedParams& theta, const RngStream& rng,
                                 const SimConfig& cfg)
{
    TrajectoryRecord rec;
    rec.theta_used = theta;
    rec.seed = rng;
    Engine eng = rng.engine();
    try {
        const StiffnessNoise noise = sample_stiffness_noise(eng, cfg.noise);
        const EffectiveParams eff = resolve_params(cfg.constants, theta, noise);
        const VehicleState init = sample_initial_state(eng, cfg.noise, static_radii(eff, cfg.constants));
        const CleanTrajectory clean = integrate_clean(init, eff, cfg);
        rec.t = clean.t;
        for (auto& ch : rec.channels) ch.reserve(clean.t.size());
        for (const Measurement& m : clean.measurements) {
            const auto noisy = add_measurement_noise(eng, m, cfg.noise).to_array();
            for (std::size_t c = 0; c < kChannelCount; ++c) rec.channels[c].push_back(noisy[c]);
        }
        rec.valid = true;
    } catch (const Error& e) {
        rec.t.clear();
        for (auto& ch : rec.channels) ch.clear();
        rec.valid = false;
        rec.failure = e.what();
    }
    return rec;
}

/// Element i equals simulate(thetas[i], seeds[i], cfg) regardless of threading.
inline std::vector<TrajectoryRecord> simulate_batch(const std::vector<IdentifiedParams>& thetas,
                                                    const std::vector<RngStream>& seeds,
                                                    const SimConfig& cfg, unsigned threads = 1)
{
    if (thetas.size() != seeds.size()) {
        throw InvalidParameter("simulate_batch: thetas and seeds differ in length");
    }
    std::vector<TrajectoryRecord> out(thetas.size());
    parallel_for(thetas.size(), threads,
                 [&](std::size_t i) { out[i] = simulate(thetas[i], seeds[i], cfg); });
    return out;
}

}  // namespace vehid
