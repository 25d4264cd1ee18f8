#pragma once

// Fisher information of the summary statistics under a Gaussian likelihood
// with parameter-independent covariance, estimated by simulation.

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <Eigen/Eigenvalues>

#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "vehid/errors.hpp"
#include "vehid/inference.hpp"
#include "vehid/parallel.hpp"
#include "vehid/rng.hpp"
#include "vehid/summaries.hpp"

namespace vehid {

inline constexpr double kCovarianceJitter = 1e-8;
inline constexpr double kSingularTolerance = 1e-8;   // relative to the largest eigenvalue
inline constexpr double kMaxInvalidFraction = 0.1;
inline constexpr std::size_t kMinMomentSims = 100;

struct SummaryMoments {
    Eigen::VectorXd mean;
    Eigen::MatrixXd cov;        // includes the diagonal jitter
    Normalizer normalizer;      // the scaling the moments are expressed in
    std::size_t sims_used = 0;
    std::size_t invalid = 0;
};

struct FisherReport {
    Eigen::VectorXd theta_star;
    Eigen::VectorXd fd_steps;
    Eigen::MatrixXd fisher;
    Eigen::VectorXd eigenvalues;   // ascending
    double condition_number = 0.0;
    bool singular = false;
    std::size_t sims_used = 0;     // draws pooled into the summary covariance
};

/// One percent of each prior width.
inline Eigen::VectorXd default_fd_steps(const PriorBox& box)
{
    Eigen::VectorXd h(static_cast<Eigen::Index>(box.dim()));
    for (std::size_t i = 0; i < box.dim(); ++i) h[static_cast<Eigen::Index>(i)] = 0.01 * box.width(i);
    return h;
}

namespace detail {

template <SummarySimulator Sim>
std::vector<std::optional<Eigen::VectorXd>> simulate_at(const Sim& sim, const Eigen::VectorXd& theta,
                                                       const RngStream& rng, std::size_t n,
                                                       unsigned threads)
{
    std::vector<std::optional<Eigen::VectorXd>> out(n);
    parallel_for(n, threads, [&](std::size_t i) { out[i] = sim(theta, rng.child(i)); });
    return out;
}

inline Eigen::VectorXd scaled(const Eigen::VectorXd& s, const Normalizer& n)
{
    SummaryVector v{s, false};
    return normalize(v, n).values;
}

}  // namespace detail

/// Sample mean and covariance of normalized summaries over n_sims runs at a
/// fixed theta. Without a normalizer, the summaries are scaled by their own
/// mean and spread at theta.
template <SummarySimulator Sim>
SummaryMoments summary_moments(const Sim& sim, const Eigen::VectorXd& theta, std::size_t n_sims,
                               const RngStream& rng, const Normalizer* normalizer = nullptr,
                               unsigned threads = 1)
{
    if (n_sims < kMinMomentSims) throw InvalidParameter("summary_moments needs at least 100 simulations");
    if (static_cast<std::size_t>(theta.size()) != sim.param_dim()) {
        throw InvalidParameter("theta has the wrong dimension");
    }
    const auto results = detail::simulate_at(sim, theta, rng, n_sims, threads);

    SummaryMoments m;
    std::vector<SummaryVector> valid;
    valid.reserve(n_sims);
    for (const auto& r : results) {
        if (r) valid.push_back({*r, false});
    }
    m.invalid = n_sims - valid.size();
    if (static_cast<double>(m.invalid) > kMaxInvalidFraction * static_cast<double>(n_sims)) {
        throw SimulationFailure(std::to_string(m.invalid) + " of " + std::to_string(n_sims) +
                                " simulations invalid at the fiducial parameter");
    }
    m.normalizer = normalizer ? *normalizer : fit_normalizer(valid);
    m.sims_used = valid.size();

    const auto d = static_cast<Eigen::Index>(sim.summary_dim());
    Eigen::MatrixXd z(d, static_cast<Eigen::Index>(valid.size()));
    for (std::size_t j = 0; j < valid.size(); ++j) {
        z.col(static_cast<Eigen::Index>(j)) = normalize(valid[j], m.normalizer).values;
    }
    m.mean = z.rowwise().mean();
    const Eigen::MatrixXd c = z.colwise() - m.mean;
    m.cov = c * c.transpose() / static_cast<double>(z.cols() - 1);
    m.cov.diagonal().array() += kCovarianceJitter;
    return m;
}

/// Eigen-decomposition summary of a symmetric information matrix.
inline void analyze_spectrum(FisherReport& report)
{
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(report.fisher, Eigen::EigenvaluesOnly);
    if (eig.info() != Eigen::Success) throw NumericalFailure("eigen-decomposition of the Fisher matrix failed");
    report.eigenvalues = eig.eigenvalues();
    const double lo = report.eigenvalues.minCoeff();
    const double hi = report.eigenvalues.maxCoeff();
    report.singular = !(hi > 0.0) || lo < kSingularTolerance * hi;
    report.condition_number = lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity();
}

/// F = J^T Sigma^-1 J with J the central-difference Jacobian of the mean
/// summary. The + and - evaluations of a parameter share random streams;
/// each parameter gets its own. Sigma pools the draws at theta_star with the
/// midpoints of every +/- pair, which sit at theta_star up to O(h^2) and
/// carry independent noise. `box`, when given, must contain
/// theta_star +- fd_steps.
template <SummarySimulator Sim>
FisherReport fisher_matrix(const Sim& sim, const Eigen::VectorXd& theta_star,
                           const Eigen::VectorXd& fd_steps, std::size_t n_sims, const RngStream& rng,
                           const PriorBox* box = nullptr, const Normalizer* normalizer = nullptr,
                           unsigned threads = 1)
{
    const auto p = static_cast<Eigen::Index>(sim.param_dim());
    if (theta_star.size() != p || fd_steps.size() != p) {
        throw InvalidParameter("theta_star and fd_steps must match the parameter dimension");
    }
    if (!(fd_steps.array() > 0.0).all()) throw InvalidParameter("finite-difference steps must be positive");
    if (box) {
        if (!box->contains(theta_star - fd_steps) || !box->contains(theta_star + fd_steps)) {
            throw InvalidParameter("theta_star must lie at least one step inside the prior box");
        }
    }

    const SummaryMoments moments = summary_moments(sim, theta_star, n_sims, rng.named("moments"), normalizer, threads);
    const RngStream jac = rng.named("jacobian");
    const auto d = static_cast<Eigen::Index>(sim.summary_dim());
    Eigen::MatrixXd J(d, p);
    Eigen::MatrixXd scatter = (moments.cov - kCovarianceJitter * Eigen::MatrixXd::Identity(d, d)) *
                              static_cast<double>(moments.sims_used - 1);
    std::size_t dof = moments.sims_used - 1;
    for (Eigen::Index i = 0; i < p; ++i) {
        Eigen::VectorXd up = theta_star;
        Eigen::VectorXd down = theta_star;
        up[i] += fd_steps[i];
        down[i] -= fd_steps[i];
        const RngStream stream = jac.child(static_cast<std::uint64_t>(i));
        const auto plus = detail::simulate_at(sim, up, stream, n_sims, threads);
        const auto minus = detail::simulate_at(sim, down, stream, n_sims, threads);
        Eigen::MatrixXd mid(d, static_cast<Eigen::Index>(n_sims));
        Eigen::VectorXd diff = Eigen::VectorXd::Zero(d);
        Eigen::Index pairs = 0;
        for (std::size_t j = 0; j < n_sims; ++j) {
            if (!plus[j] || !minus[j]) continue;
            const Eigen::VectorXd a = detail::scaled(*plus[j], moments.normalizer);
            const Eigen::VectorXd b = detail::scaled(*minus[j], moments.normalizer);
            diff += a - b;
            mid.col(pairs++) = 0.5 * (a + b);
        }
        if (static_cast<double>(n_sims - static_cast<std::size_t>(pairs)) >
            kMaxInvalidFraction * static_cast<double>(n_sims)) {
            throw SimulationFailure("too many invalid simulations in the finite-difference Jacobian");
        }
        J.col(i) = diff / (static_cast<double>(pairs) * 2.0 * fd_steps[i]);
        const Eigen::MatrixXd c = mid.leftCols(pairs).colwise() - mid.leftCols(pairs).rowwise().mean();
        scatter += c * c.transpose();
        dof += static_cast<std::size_t>(pairs) - 1;
    }
    Eigen::MatrixXd sigma = scatter / static_cast<double>(dof);
    sigma.diagonal().array() += kCovarianceJitter;

    Eigen::LLT<Eigen::MatrixXd> llt(sigma);
    if (llt.info() != Eigen::Success) throw NumericalFailure("summary covariance is not positive definite");
    const Eigen::MatrixXd W = llt.matrixL().solve(J);

    FisherReport report;
    report.theta_star = theta_star;
    report.fd_steps = fd_steps;
    report.fisher = W.transpose() * W;
    report.fisher = 0.5 * (report.fisher + report.fisher.transpose()).eval();
    report.sims_used = dof + static_cast<std::size_t>(p) + 1;
    analyze_spectrum(report);
    return report;
}

}  // namespace vehid
