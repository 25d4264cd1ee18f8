#include "catch_amalgamated.hpp"

#include <cmath>
#include <vector>

#include "vehid/summaries.hpp"

using namespace vehid;
using Catch::Matchers::WithinAbs;

namespace {

std::vector<std::vector<double>> channels_of(std::size_t n, auto&& gen)
{
    std::vector<std::vector<double>> ch(kChannelCount, std::vector<double>(n));
    for (std::size_t c = 0; c < kChannelCount; ++c) {
        for (std::size_t t = 0; t < n; ++t) ch[c][t] = gen(c, t);
    }
    return ch;
}

}  // namespace

TEST_CASE("layout has 35 labelled entries")
{
    const SummaryLayout layout;
    CHECK(layout.size() == 35);
    const auto labels = layout.labels();
    REQUIRE(labels.size() == 35);
    CHECK(labels[0] == "mean_a_x");
    CHECK(labels[5] == "logvar_a_x");
    CHECK(labels[10] == "acf10_a_x");
    CHECK(labels[25] == "xcorr_a_x_a_y");
    CHECK(labels[34] == "xcorr_w_f_w_r");
}

TEST_CASE("constant channel")
{
    const auto ch = channels_of(1000, [](std::size_t c, std::size_t) { return 2.0 + c; });
    const SummaryVector s = summarize_channels(ch);
    REQUIRE(s.values.size() == 35);
    CHECK(s.values[0] == 2.0);
    CHECK_THAT(s.values[5], WithinAbs(std::log(kVarianceFloor), 1e-9));
    for (int i = 10; i < 35; ++i) CHECK(s.values[i] == 0.0);
    CHECK_FALSE(s.normalized);
}

TEST_CASE("alternating channel")
{
    const auto ch = channels_of(1000, [](std::size_t, std::size_t t) { return t % 2 ? -1.0 : 1.0; });
    const SummaryVector s = summarize_channels(ch);
    CHECK_THAT(s.values[0], WithinAbs(0.0, 1e-15));
    CHECK_THAT(s.values[5], WithinAbs(0.0, 1e-11));
    CHECK_THAT(s.values[10], WithinAbs(0.99, 1e-12));
    CHECK_THAT(s.values[12], WithinAbs(0.96, 1e-12));
    for (int i = 25; i < 35; ++i) CHECK_THAT(s.values[i], WithinAbs(1.0, 1e-12));
}

TEST_CASE("cross-correlation sign and pairing")
{
    const auto ch = channels_of(500, [](std::size_t c, std::size_t t) {
        const double x = std::sin(0.05 * static_cast<double>(t));
        return c == 1 ? -3.0 * x : (c == 4 ? std::cos(0.37 * t) : x);
    });
    const SummaryVector s = summarize_channels(ch);
    CHECK_THAT(s.values[25], WithinAbs(-1.0, 1e-12));   // a_x, a_y
    CHECK_THAT(s.values[26], WithinAbs(1.0, 1e-12));    // a_x, r
    CHECK_THAT(s.values[29], WithinAbs(-1.0, 1e-12));   // a_y, r
}

TEST_CASE("input validation")
{
    std::vector<std::vector<double>> four(4, std::vector<double>(10, 1.0));
    CHECK_THROWS_AS(summarize_channels(four), InvalidParameter);
    auto ragged = channels_of(10, [](std::size_t, std::size_t) { return 1.0; });
    ragged[2].pop_back();
    CHECK_THROWS_AS(summarize_channels(ragged), InvalidParameter);
    TrajectoryRecord bad;
    CHECK_THROWS_AS(summarize(bad), InvalidParameter);
}

TEST_CASE("normalizer fit")
{
    std::vector<SummaryVector> two(2);
    two[0].values = Eigen::VectorXd::Zero(35);
    two[1].values = Eigen::VectorXd::Constant(35, 2.0);
    const Normalizer n = fit_normalizer(two);
    CHECK(n.pilot_count == 2);
    for (int i = 0; i < 35; ++i) {
        CHECK_THAT(n.mean[i], WithinAbs(1.0, 1e-15));
        CHECK_THAT(n.std[i], WithinAbs(std::sqrt(2.0), 1e-15));
    }

    std::vector<SummaryVector> same(3, two[1]);
    CHECK(fit_normalizer(same).std.isZero());
    CHECK_THROWS_AS(fit_normalizer(std::span<const SummaryVector>(two.data(), 1)), InvalidParameter);
}

TEST_CASE("normalization conventions")
{
    Normalizer n;
    n.mean = Eigen::VectorXd::LinSpaced(35, 0.0, 3.4);
    n.std = Eigen::VectorXd::Constant(35, 2.0);
    n.std[4] = 0.0;
    n.pilot_count = 10;
    SummaryVector s;
    s.values = n.mean;
    const SummaryVector z = normalize(s, n);
    CHECK(z.normalized);
    CHECK(z.values.isZero());
    s.values[4] += 5.0;
    CHECK(normalize(s, n).values[4] == 0.0);
    CHECK_THROWS_AS(normalize(z, n), InvalidParameter);
}

TEST_CASE("simulated pilot set normalizes to zero mean and unit spread")
{
    const SimConfig cfg;
    std::vector<SummaryVector> pilot;
    Engine eng = RngStream{21, 0}.engine();
    for (std::uint64_t k = 0; k < 60; ++k) {
        IdentifiedParams p;
        p.l_f = uniform(eng, 1.0, 1.5);
        p.h_cog = uniform(eng, 0.2, 0.6);
        p.d_caf = uniform(eng, -0.3, 0.3);
        const TrajectoryRecord rec = simulate(p, RngStream{21, k + 1}, cfg);
        REQUIRE(rec.valid);
        pilot.push_back(summarize(rec));
    }
    const Normalizer n = fit_normalizer(pilot);
    for (int i = 0; i < 35; ++i) REQUIRE(std::isfinite(n.std[i]));

    Eigen::VectorXd sum = Eigen::VectorXd::Zero(35), sum2 = Eigen::VectorXd::Zero(35);
    for (const auto& s : pilot) {
        const Eigen::VectorXd z = normalize(s, n).values;
        sum += z;
        sum2 += z.cwiseAbs2();
    }
    const double m = static_cast<double>(pilot.size());
    for (int i = 0; i < 35; ++i) {
        if (n.std[i] == 0.0) continue;
        CHECK_THAT(sum[i] / m, WithinAbs(0.0, 1e-10));
        CHECK_THAT(std::sqrt((sum2[i] - sum[i] * sum[i] / m) / (m - 1.0)), WithinAbs(1.0, 1e-10));
    }
}
