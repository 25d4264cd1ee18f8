#include "catch_amalgamated.hpp"

#include <cmath>
#include <vector>

#include "vehid/simulator.hpp"

using namespace vehid;
using Catch::Matchers::WithinAbs;

namespace {

SimConfig quiet_config(double duration, double sample_rate, int substeps)
{
    SimConfig cfg;
    cfg.duration = duration;
    cfg.sample_rate = sample_rate;
    cfg.substeps_per_sample = substeps;
    cfg.profile.duration = duration;
    cfg.noise = NoiseSpec::none(10.5);
    return cfg;
}

VehicleState rolling_start(const EffectiveParams& e, const VehicleConstants& c, double v)
{
    const AxlePair r = static_radii(e, c);
    VehicleState s;
    s.v_x = v;
    s.w_front = v / r.front;
    s.w_rear = v / r.rear;
    return s;
}

}  // namespace

TEST_CASE("RK4 step on exponential decay")
{
    auto decay = [](double, const std::array<double, 1>& x) { return std::array<double, 1>{-x[0]}; };
    const auto x = rk4_step(decay, std::array<double, 1>{1.0}, 0.0, 0.1);
    CHECK_THAT(x[0], WithinAbs(0.9048375, 5e-8));
    CHECK(std::abs(x[0] - std::exp(-0.1)) < 1e-7);
}

TEST_CASE("configuration checks")
{
    SimConfig cfg;
    CHECK(cfg.sample_count() == 1000);
    CHECK_THAT(cfg.substep(), WithinAbs(1e-3, 1e-15));
    CHECK_NOTHROW(cfg.validate());
    cfg.substeps_per_sample = 0;
    CHECK_THROWS_AS(cfg.validate(), InvalidParameter);
    cfg = {};
    cfg.profile.duration = 4.0;
    CHECK_THROWS_AS(cfg.validate(), InvalidParameter);
}

TEST_CASE("force-free equilibrium does not drift")
{
    SimConfig cfg = quiet_config(5.0, 200.0, 5);
    cfg.profile.steer_amplitude = 0.0;
    cfg.profile.torque_amplitude = 0.0;
    const EffectiveParams e = resolve_params(cfg.constants, IdentifiedParams{});
    const VehicleState start = rolling_start(e, cfg.constants, 10.5);
    const CleanTrajectory tr = integrate_clean(start, e, cfg);
    REQUIRE(tr.states.size() == 1000);
    const StateVector a = start.to_vector();
    for (const VehicleState& s : tr.states) {
        const StateVector b = s.to_vector();
        for (std::size_t i = 0; i < kStateSize; ++i) REQUIRE(std::abs(b[i] - a[i]) < 1e-9);
    }

    const TrajectoryRecord rec = simulate(IdentifiedParams{}, RngStream{1, 0}, cfg);
    REQUIRE(rec.valid);
    for (std::size_t k = 0; k < rec.size(); ++k) {
        REQUIRE(rec.channels[0][k] == 0.0);
        REQUIRE(rec.channels[1][k] == 0.0);
        REQUIRE(rec.channels[2][k] == 0.0);
        REQUIRE(std::abs(rec.channels[3][k] - rec.channels[3][0]) < 1e-9);
    }
}

TEST_CASE("integrator converges at fourth order")
{
    const double duration = 5.0;
    const IdentifiedParams theta{1.3, 0.5, 0.1, -0.1, 0.05, -0.05};
    auto states = [&](int substeps) {
        const SimConfig cfg = quiet_config(duration, 100.0, substeps);
        const EffectiveParams e = resolve_params(cfg.constants, theta);
        return integrate_clean(rolling_start(e, cfg.constants, 10.5), e, cfg).states;
    };
    const auto ref = states(1000);
    std::vector<double> err;
    for (int substeps : {5, 10, 20}) {
        const auto run = states(substeps);
        double e = 0.0;
        for (std::size_t k = 0; k < run.size(); ++k) {
            const StateVector x = run[k].to_vector();
            const StateVector r = ref[k].to_vector();
            for (std::size_t i = 0; i < kStateSize; ++i) {
                e = std::max(e, std::abs(x[i] - r[i]) / (1.0 + std::abs(r[i])));
            }
        }
        err.push_back(e);
    }
    const double order = std::log2(std::sqrt(err[0] / err[2]));
    INFO("errors " << err[0] << " " << err[1] << " " << err[2]);
    CHECK(order >= 3.5);
}

TEST_CASE("record layout and determinism")
{
    const SimConfig cfg;
    const IdentifiedParams theta;
    const TrajectoryRecord a = simulate(theta, RngStream{7, 3}, cfg);
    const TrajectoryRecord b = simulate(theta, RngStream{7, 3}, cfg);
    REQUIRE(a.valid);
    REQUIRE(a.size() == 1000);
    for (const auto& ch : a.channels) CHECK(ch.size() == 1000);
    for (std::size_t k = 1; k < a.size(); ++k) {
        REQUIRE_THAT(a.t[k] - a.t[k - 1], WithinAbs(0.005, 1e-12));
    }
    CHECK(a.channels == b.channels);
    CHECK(a.t == b.t);
    CHECK(a.theta_used == theta);
    CHECK(a.seed == (RngStream{7, 3}));

    const TrajectoryRecord c = simulate(theta, RngStream{7, 4}, cfg);
    CHECK(c.channels != a.channels);
}

TEST_CASE("yaw rate follows the steering during the first quarter period")
{
    const SimConfig cfg;
    const TrajectoryRecord rec = simulate(IdentifiedParams{}, RngStream{3, 0}, cfg);
    REQUIRE(rec.valid);
    double peak = 0.0;
    for (std::size_t k = 40; k < 200; ++k) {
        REQUIRE(rec.channels[2][k] > 0.0);
        peak = std::max(peak, std::abs(rec.channels[1][k]));
    }
    CHECK(peak > 0.5);
}

TEST_CASE("prior-box extremes yield valid or flagged records")
{
    const SimConfig cfg;
    const std::array<double, 6> lo{1.0, 0.2, -0.2, -0.2, -0.3, -0.3};
    const std::array<double, 6> hi{1.5, 0.6, 0.5, 0.5, 0.3, 0.3};
    std::uint64_t k = 0;
    for (unsigned mask = 0; mask < 64; mask += 5) {
        std::array<double, 6> a{};
        for (std::size_t i = 0; i < 6; ++i) a[i] = (mask >> i) & 1u ? hi[i] : lo[i];
        const TrajectoryRecord rec = simulate(IdentifiedParams::from_array(a), RngStream{8, k++}, cfg);
        if (rec.valid) {
            for (const auto& ch : rec.channels) {
                for (double v : ch) REQUIRE(std::isfinite(v));
            }
        } else {
            CHECK_FALSE(rec.failure.empty());
            CHECK(rec.t.empty());
        }
    }
}

TEST_CASE("batch preserves order and matches single runs")
{
    SimConfig cfg;
    const std::vector<IdentifiedParams> thetas{{1.2, 0.4, 0, 0, 0, 0}, {1.4, 0.5, 0.1, 0, 0, 0},
                                               {1.3, 0.3, 0, 0.2, 0.1, -0.1}};
    const std::vector<RngStream> seeds{{1, 1}, {1, 2}, {1, 3}};
    const auto batch = simulate_batch(thetas, seeds, cfg, 3);
    REQUIRE(batch.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(batch[i].channels == simulate(thetas[i], seeds[i], cfg).channels);
    }
    const auto reversed = simulate_batch({thetas[2], thetas[1], thetas[0]},
                                         {seeds[2], seeds[1], seeds[0]}, cfg, 2);
    CHECK(reversed[0].channels == batch[2].channels);
    CHECK(reversed[2].channels == batch[0].channels);
    CHECK_THROWS_AS(simulate_batch(thetas, {seeds[0]}, cfg), InvalidParameter);

    const auto one = simulate_batch({thetas[0]}, {seeds[0]}, cfg);
    CHECK(one[0].channels == batch[0].channels);
}
