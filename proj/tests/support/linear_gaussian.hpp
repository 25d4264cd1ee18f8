#pragma once

// Linear-Gaussian surrogate simulator x = A theta + eps, eps ~ N(0, Sigma),
// with its closed-form posterior under a flat prior and its Fisher matrix.

#include <Eigen/Dense>
#include <Eigen/Core>

#include <optional>

#include "vehid/inference.hpp"
#include "vehid/rng.hpp"

namespace vehid::testing {

struct LinearGaussianSimulator {
    Eigen::MatrixXd A;        // summary_dim x param_dim
    Eigen::MatrixXd sigma;    // noise covariance

    [[nodiscard]] std::size_t param_dim() const { return static_cast<std::size_t>(A.cols()); }
    [[nodiscard]] std::size_t summary_dim() const { return static_cast<std::size_t>(A.rows()); }

    std::optional<Eigen::VectorXd> operator()(const Eigen::VectorXd& theta, const RngStream& rng) const
    {
        Engine eng = rng.engine();
        Eigen::VectorXd eps(A.rows());
        for (Eigen::Index i = 0; i < eps.size(); ++i) eps[i] = gaussian(eng, 0.0, 1.0);
        const Eigen::MatrixXd L = sigma.llt().matrixL();
        return Eigen::VectorXd(A * theta + L * eps);
    }

    [[nodiscard]] Eigen::MatrixXd fisher() const { return A.transpose() * sigma.llt().solve(A); }

    /// Posterior covariance for a flat prior (truncation ignored).
    [[nodiscard]] Eigen::MatrixXd posterior_cov() const { return fisher().inverse(); }

    [[nodiscard]] Eigen::VectorXd posterior_mean(const Eigen::VectorXd& x) const
    {
        return posterior_cov() * A.transpose() * sigma.llt().solve(x);
    }
};

/// The 6-parameter surrogate used by the inference acceptance checks:
/// 8 observed coordinates, a fixed well-conditioned mixing matrix and
/// correlated noise; the posterior is about 20x narrower than the prior box.
inline LinearGaussianSimulator six_parameter_surrogate()
{
    LinearGaussianSimulator s;
    s.A.resize(8, 6);
    s.A << 1.0, 0.3, 0.0, 0.0, 0.2, 0.0,
           0.0, 1.0, 0.4, 0.0, 0.0, 0.1,
           0.2, 0.0, 1.0, 0.3, 0.0, 0.0,
           0.0, 0.0, 0.0, 1.0, 0.5, 0.0,
           0.0, 0.2, 0.0, 0.0, 1.0, 0.3,
           0.1, 0.0, 0.0, 0.2, 0.0, 1.0,
           0.5, 0.5, 0.0, 0.0, 0.0, 0.0,
           0.0, 0.0, 0.0, 0.5, 0.0, 0.5;
    s.sigma = 0.04 * Eigen::MatrixXd::Identity(8, 8);
    for (int i = 0; i + 1 < 8; ++i) s.sigma(i, i + 1) = s.sigma(i + 1, i) = 0.01;
    return s;
}

inline PriorBox surrogate_box(std::size_t dim) { return {std::vector<double>(dim, -2.0), std::vector<double>(dim, 2.0)}; }

}  // namespace vehid::testing
