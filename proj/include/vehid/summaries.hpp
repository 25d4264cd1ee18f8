#pragma once

// Handcrafted sufficient statistics of a measurement trajectory and their
// pilot-run normalization.

#include <Eigen/Core>

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "vehid/errors.hpp"
#include "vehid/simulator.hpp"

namespace vehid {

inline constexpr double kVarianceFloor = 1e-12;

/// Layout: channel means, log variances, autocorrelations (channel-major, one
/// per lag), then lag-0 cross-correlations of all channel pairs in
/// lexicographic order.
struct SummaryLayout {
    std::vector<int> lags{10, 20, 40};

    [[nodiscard]] std::size_t size() const
    {
        constexpr std::size_t pairs = kChannelCount * (kChannelCount - 1) / 2;
        return 2 * kChannelCount + kChannelCount * lags.size() + pairs;
    }

    [[nodiscard]] std::vector<std::string> labels() const
    {
        std::vector<std::string> out;
        for (auto c : kChannelNames) out.push_back("mean_" + std::string(c));
        for (auto c : kChannelNames) out.push_back("logvar_" + std::string(c));
        for (auto c : kChannelNames) {
            for (int lag : lags) out.push_back("acf" + std::to_string(lag) + "_" + std::string(c));
        }
        for (std::size_t i = 0; i < kChannelCount; ++i) {
            for (std::size_t j = i + 1; j < kChannelCount; ++j) {
                out.push_back("xcorr_" + std::string(kChannelNames[i]) + "_" +
                              std::string(kChannelNames[j]));
            }
        }
        return out;
    }

    friend bool operator==(const SummaryLayout&, const SummaryLayout&) = default;
};

struct SummaryVector {
    Eigen::VectorXd values;
    bool normalized = false;
};

namespace detail {

inline double mean_of(std::span<const double> x)
{
    double s = 0.0;
    for (double v : x) s += v;
    return s / static_cast<double>(x.size());
}

/// Centered sum of squares.
inline double centered_ss(std::span<const double> x, double mean)
{
    double s = 0.0;
    for (double v : x) s += (v - mean) * (v - mean);
    return s;
}

inline double autocorrelation(std::span<const double> x, double mean, double ss, int lag)
{
    if (!(ss > 0.0) || lag <= 0 || static_cast<std::size_t>(lag) >= x.size()) return 0.0;
    double s = 0.0;
    for (std::size_t t = 0; t + lag < x.size(); ++t) s += (x[t] - mean) * (x[t + lag] - mean);
    return s / ss;
}

inline double cross_correlation(std::span<const double> x, double mx, double ssx,
                                std::span<const double> y, double my, double ssy)
{
    if (!(ssx > 0.0 && ssy > 0.0)) return 0.0;
    double s = 0.0;
    for (std::size_t t = 0; t < x.size(); ++t) s += (x[t] - mx) * (y[t] - my);
    return s / std::sqrt(ssx * ssy);
}

}  // namespace detail

/// Summary statistics of any equal-length channel set.
inline SummaryVector summarize_channels(std::span<const std::vector<double>> channels,
                                        const SummaryLayout& layout = {})
{
    if (channels.size() != kChannelCount) throw InvalidParameter("expected 5 channels");
    const std::size_t n = channels[0].size();
    if (n < 2) throw InvalidParameter("trajectory too short to summarize");
    for (const auto& ch : channels) {
        if (ch.size() != n) throw InvalidParameter("channel lengths differ");
    }

    std::array<double, kChannelCount> mean{};
    std::array<double, kChannelCount> ss{};
    for (std::size_t c = 0; c < kChannelCount; ++c) {
        mean[c] = detail::mean_of(channels[c]);
        ss[c] = detail::centered_ss(channels[c], mean[c]);
    }

    SummaryVector out;
    out.values.resize(static_cast<Eigen::Index>(layout.size()));
    Eigen::Index k = 0;
    for (std::size_t c = 0; c < kChannelCount; ++c) out.values[k++] = mean[c];
    for (std::size_t c = 0; c < kChannelCount; ++c) {
        out.values[k++] = std::log(ss[c] / static_cast<double>(n) + kVarianceFloor);
    }
    for (std::size_t c = 0; c < kChannelCount; ++c) {
        for (int lag : layout.lags) {
            out.values[k++] = detail::autocorrelation(channels[c], mean[c], ss[c], lag);
        }
    }
    for (std::size_t i = 0; i < kChannelCount; ++i) {
        for (std::size_t j = i + 1; j < kChannelCount; ++j) {
            out.values[k++] =
                detail::cross_correlation(channels[i], mean[i], ss[i], channels[j], mean[j], ss[j]);
        }
    }
    for (Eigen::Index i = 0; i < out.values.size(); ++i) {
        if (!std::isfinite(out.values[i])) throw InvalidParameter("non-finite summary statistic");
    }
    return out;
}

inline SummaryVector summarize(const TrajectoryRecord& rec, const SummaryLayout& layout = {})
{
    if (!rec.valid) throw InvalidParameter("cannot summarize an invalid trajectory");
    return summarize_channels(rec.channels, layout);
}

struct Normalizer {
    Eigen::VectorXd mean;
    Eigen::VectorXd std;
    std::size_t pilot_count = 0;
};

/// Per-coordinate sample mean and (n-1) standard deviation.
inline Normalizer fit_normalizer(std::span<const SummaryVector> summaries)
{
    if (summaries.size() < 2) throw InvalidParameter("normalizer needs at least two summaries");
    const Eigen::Index d = summaries[0].values.size();
    Normalizer n;
    n.pilot_count = summaries.size();
    n.mean = Eigen::VectorXd::Zero(d);
    for (const auto& s : summaries) {
        if (s.values.size() != d) throw InvalidParameter("summary lengths differ");
        n.mean += s.values;
    }
    n.mean /= static_cast<double>(summaries.size());
    Eigen::VectorXd ss = Eigen::VectorXd::Zero(d);
    for (const auto& s : summaries) ss += (s.values - n.mean).cwiseAbs2();
    n.std = (ss / static_cast<double>(summaries.size() - 1)).cwiseSqrt();
    return n;
}

/// z = (s - mean) / std, with zero-spread coordinates mapped to 0.
inline SummaryVector normalize(const SummaryVector& s, const Normalizer& n)
{
    if (s.normalized) throw InvalidParameter("summary is already normalized");
    if (s.values.size() != n.mean.size()) throw InvalidParameter("normalizer size mismatch");
    SummaryVector out;
    out.normalized = true;
    out.values.resize(s.values.size());
    for (Eigen::Index i = 0; i < s.values.size(); ++i) {
        out.values[i] = n.std[i] > 0.0 ? (s.values[i] - n.mean[i]) / n.std[i] : 0.0;
    }
    return out;
}

}  // namespace vehid
