#pragma once

// Conditional Gaussian-mixture density network q(theta | x) with
// full-covariance components and hand-written reverse-mode gradients.
//
// Network: x -> tanh(W1 x + b1) -> tanh(W2 h1 + b2) -> W3 h2 + b3.
// Output block of component m (size 1 + d + d(d+1)/2):
//   [logit, mean(d), log diag of L (d), strictly-lower entries of L row-major]
// with covariance L L^T.

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <span>
#include <vector>

#include "vehid/errors.hpp"
#include "vehid/rng.hpp"

namespace vehid {

struct MdnArchitecture {
    int input_dim = 35;
    int param_dim = 6;
    int hidden = 50;
    int components = 8;

    [[nodiscard]] int block_size() const { return 1 + param_dim + param_dim * (param_dim + 1) / 2; }
    [[nodiscard]] int output_dim() const { return components * block_size(); }
    [[nodiscard]] Eigen::Index weight_count() const
    {
        return static_cast<Eigen::Index>(hidden) * (input_dim + 1) +
               static_cast<Eigen::Index>(hidden) * (hidden + 1) +
               static_cast<Eigen::Index>(output_dim()) * (hidden + 1);
    }

    friend bool operator==(const MdnArchitecture&, const MdnArchitecture&) = default;
};

/// Mixture parameters for one conditioning input.
struct GaussianMixture {
    Eigen::VectorXd log_weights;               // normalized
    std::vector<Eigen::VectorXd> means;
    std::vector<Eigen::MatrixXd> scale_tril;   // lower triangular, positive diagonal
    std::vector<double> log_norm;              // -d/2 log 2pi - sum log L_ii

    [[nodiscard]] int dim() const { return static_cast<int>(means.front().size()); }
    [[nodiscard]] int size() const { return static_cast<int>(means.size()); }

    [[nodiscard]] double component_logpdf(int m, const Eigen::Ref<const Eigen::VectorXd>& theta,
                                          Eigen::VectorXd* z_out = nullptr) const
    {
        Eigen::VectorXd z = scale_tril[m].triangularView<Eigen::Lower>().solve(theta - means[m]);
        const double lp = log_norm[m] - 0.5 * z.squaredNorm();
        if (z_out) *z_out = std::move(z);
        return lp;
    }

    [[nodiscard]] double logpdf(const Eigen::Ref<const Eigen::VectorXd>& theta) const
    {
        double mx = -std::numeric_limits<double>::infinity();
        std::vector<double> terms(means.size());
        for (int m = 0; m < size(); ++m) {
            terms[m] = log_weights[m] + component_logpdf(m, theta);
            mx = std::max(mx, terms[m]);
        }
        double s = 0.0;
        for (double t : terms) s += std::exp(t - mx);
        return mx + std::log(s);
    }

    /// Draws one sample: component by weight, then its Gaussian.
    [[nodiscard]] Eigen::VectorXd sample(Engine& eng) const
    {
        double u = uniform(eng, 0.0, 1.0);
        int m = 0;
        for (; m + 1 < size(); ++m) {
            u -= std::exp(log_weights[m]);
            if (u < 0.0) break;
        }
        Eigen::VectorXd eps(dim());
        for (int i = 0; i < dim(); ++i) eps[i] = gaussian(eng, 0.0, 1.0);
        return means[m] + scale_tril[m].triangularView<Eigen::Lower>() * eps;
    }
};

inline double log_sum_exp(std::span<const double> v)
{
    double mx = -std::numeric_limits<double>::infinity();
    for (double x : v) mx = std::max(mx, x);
    if (!std::isfinite(mx)) return mx;
    double s = 0.0;
    for (double x : v) s += std::exp(x - mx);
    return mx + std::log(s);
}

namespace detail {

/// Mixture decoded from one network output column, stored flat for fast
/// repeated evaluation and gradient accumulation.
class OutputMixture {
public:
    OutputMixture(const Eigen::Ref<const Eigen::VectorXd>& out, int d, int components)
        : d_(d), m_(components), block_(1 + d + d * (d + 1) / 2),
          log_w_(components), mean_(static_cast<std::size_t>(components * d)),
          tril_(static_cast<std::size_t>(components * d * d), 0.0),
          log_norm_(components), z_(static_cast<std::size_t>(components * d)),
          u_(static_cast<std::size_t>(d)), terms_(components)
    {
        const double half_log_2pi = 0.5 * std::log(2.0 * std::numbers::pi);
        for (int m = 0; m < m_; ++m) {
            const Eigen::Index off = static_cast<Eigen::Index>(m) * block_;
            log_w_[m] = out[off];
            double* L = &tril_[static_cast<std::size_t>(m * d * d)];
            double log_det = 0.0;
            for (int i = 0; i < d; ++i) {
                mean_[static_cast<std::size_t>(m * d + i)] = out[off + 1 + i];
                const double s = out[off + 1 + d + i];
                L[i * d + i] = std::exp(s);
                log_det += s;
            }
            Eigen::Index k = off + 1 + 2 * d;
            for (int i = 1; i < d; ++i) {
                for (int j = 0; j < i; ++j) L[i * d + j] = out[k++];
            }
            log_norm_[m] = -d * half_log_2pi - log_det;
        }
        const double lse = log_sum_exp(log_w_);
        for (double& w : log_w_) w -= lse;
        for (int m = 0; m < m_; ++m) {
            bool ok = std::isfinite(log_w_[m]) && std::isfinite(log_norm_[m]);
            for (int i = 0; i < d * d; ++i) ok = ok && std::isfinite(tril_[static_cast<std::size_t>(m * d * d + i)]);
            for (int i = 0; i < d; ++i) ok = ok && std::isfinite(mean_[static_cast<std::size_t>(m * d + i)]);
            if (!ok) throw TrainingDivergence("non-finite mixture parameters from network output");
        }
    }

    [[nodiscard]] GaussianMixture mixture() const
    {
        GaussianMixture g;
        g.log_weights = Eigen::Map<const Eigen::VectorXd>(log_w_.data(), m_);
        for (int m = 0; m < m_; ++m) {
            g.means.emplace_back(Eigen::Map<const Eigen::VectorXd>(&mean_[static_cast<std::size_t>(m * d_)], d_));
            g.scale_tril.emplace_back(Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
                &tril_[static_cast<std::size_t>(m * d_ * d_)], d_, d_));
            g.log_norm.push_back(log_norm_[m]);
        }
        return g;
    }

    /// log q(theta); leaves the whitened residuals of every component in z_.
    double logpdf(const Eigen::Ref<const Eigen::VectorXd>& theta) const
    {
        for (int m = 0; m < m_; ++m) {
            const double* L = &tril_[static_cast<std::size_t>(m * d_ * d_)];
            const double* mu = &mean_[static_cast<std::size_t>(m * d_)];
            double* z = &z_[static_cast<std::size_t>(m * d_)];
            double q = 0.0;
            for (int i = 0; i < d_; ++i) {
                double r = theta[i] - mu[i];
                for (int j = 0; j < i; ++j) r -= L[i * d_ + j] * z[j];
                z[i] = r / L[i * d_ + i];
                q += z[i] * z[i];
            }
            terms_[m] = log_w_[m] + log_norm_[m] - 0.5 * q;
        }
        return log_sum_exp(terms_);
    }

    /// grad += coef * d log q(theta) / d out. Returns log q(theta).
    double accumulate_gradient(const Eigen::Ref<const Eigen::VectorXd>& theta, double coef,
                               Eigen::Ref<Eigen::VectorXd> grad) const
    {
        const double lq = logpdf(theta);
        for (int m = 0; m < m_; ++m) {
            const double resp = std::exp(terms_[m] - lq);
            const Eigen::Index off = static_cast<Eigen::Index>(m) * block_;
            grad[off] += coef * (resp - std::exp(log_w_[m]));
            const double c = coef * resp;
            if (c == 0.0) continue;
            const double* L = &tril_[static_cast<std::size_t>(m * d_ * d_)];
            const double* z = &z_[static_cast<std::size_t>(m * d_)];
            // u = L^-T z
            for (int i = d_ - 1; i >= 0; --i) {
                double r = z[i];
                for (int j = i + 1; j < d_; ++j) r -= L[j * d_ + i] * u_[static_cast<std::size_t>(j)];
                u_[static_cast<std::size_t>(i)] = r / L[i * d_ + i];
            }
            for (int i = 0; i < d_; ++i) {
                const double ui = u_[static_cast<std::size_t>(i)];
                grad[off + 1 + i] += c * ui;
                grad[off + 1 + d_ + i] += c * (ui * z[i] * L[i * d_ + i] - 1.0);
            }
            Eigen::Index k = off + 1 + 2 * d_;
            for (int i = 1; i < d_; ++i) {
                for (int j = 0; j < i; ++j) grad[k++] += c * u_[static_cast<std::size_t>(i)] * z[j];
            }
        }
        return lq;
    }

private:
    int d_;
    int m_;
    Eigen::Index block_;
    std::vector<double> log_w_;
    std::vector<double> mean_;
    std::vector<double> tril_;   // row-major d x d per component
    std::vector<double> log_norm_;
    mutable std::vector<double> z_;
    mutable std::vector<double> u_;
    mutable std::vector<double> terms_;
};

}  // namespace detail

/// Atom index sets for the contrastive loss: atoms[j] lists the batch
/// columns whose parameters act as contrasts for datum j (excluding j).
using AtomSets = std::vector<std::vector<int>>;

/// For each of n data, K-1 distinct contrast indices drawn uniformly from
/// the other n-1 members of the batch. K is clamped to n.
inline AtomSets draw_atoms(int n, int atoms, Engine& eng)
{
    const int k = std::min(atoms, n) - 1;
    AtomSets out(n);
    std::vector<int> pool(n);
    for (int j = 0; j < n; ++j) {
        pool.resize(n);
        for (int i = 0; i < n; ++i) pool[i] = i;
        std::swap(pool[j], pool[n - 1]);
        for (int a = 0; a < k; ++a) {
            std::uniform_int_distribution<int> pick(a, n - 2);
            std::swap(pool[a], pool[pick(eng)]);
        }
        out[j].assign(pool.begin(), pool.begin() + k);
    }
    return out;
}

class MdnModel {
public:
    MdnModel() = default;

    MdnModel(const MdnArchitecture& arch, Engine& eng) : arch_(arch), weights_(arch.weight_count())
    {
        initialize(eng);
    }

    MdnModel(const MdnArchitecture& arch, Eigen::VectorXd weights)
        : arch_(arch), weights_(std::move(weights))
    {
        if (weights_.size() != arch_.weight_count()) {
            throw InvalidParameter("weight vector does not match architecture");
        }
    }

    [[nodiscard]] const MdnArchitecture& architecture() const { return arch_; }
    [[nodiscard]] const Eigen::VectorXd& weights() const { return weights_; }
    Eigen::VectorXd& weights() { return weights_; }

    /// Raw network outputs for the columns of x (input_dim x n).
    [[nodiscard]] Eigen::MatrixXd forward(const Eigen::Ref<const Eigen::MatrixXd>& x) const
    {
        Activations a = activations(x);
        return std::move(a.out);
    }

    [[nodiscard]] GaussianMixture mixture(const Eigen::Ref<const Eigen::VectorXd>& x) const
    {
        const Eigen::MatrixXd out = forward(x);
        return detail::OutputMixture(out.col(0), arch_.param_dim, arch_.components).mixture();
    }

    [[nodiscard]] double logpdf(const Eigen::Ref<const Eigen::VectorXd>& theta,
                                const Eigen::Ref<const Eigen::VectorXd>& x) const
    {
        return mixture(x).logpdf(theta);
    }

    /// Mean loss over the columns of (theta, x) and its gradient w.r.t. the
    /// weights. Empty `atoms` gives the negative log-likelihood; otherwise
    /// the contrastive loss -log[q(theta_j|x_j) / sum_{b in {j} u atoms[j]} q(theta_b|x_j)],
    /// plus nll_weights[j] * -log q(theta_j|x_j) when weights are given.
    double loss_and_gradient(const Eigen::Ref<const Eigen::MatrixXd>& theta,
                             const Eigen::Ref<const Eigen::MatrixXd>& x, const AtomSets& atoms,
                             Eigen::VectorXd* grad, std::span<const double> nll_weights = {}) const
    {
        const Eigen::Index n = x.cols();
        if (theta.cols() != n || n == 0) throw InvalidParameter("batch shape mismatch");
        if (!atoms.empty() && static_cast<Eigen::Index>(atoms.size()) != n) {
            throw InvalidParameter("atom sets do not match the batch");
        }
        if (!nll_weights.empty() && static_cast<Eigen::Index>(nll_weights.size()) != n) {
            throw InvalidParameter("likelihood weights do not match the batch");
        }
        const Activations a = activations(x);
        Eigen::MatrixXd g_out;
        if (grad) g_out = Eigen::MatrixXd::Zero(a.out.rows(), n);
        const double inv_n = 1.0 / static_cast<double>(n);
        double total = 0.0;
        std::vector<double> lq;
        for (Eigen::Index j = 0; j < n; ++j) {
            const detail::OutputMixture mix(a.out.col(j), arch_.param_dim, arch_.components);
            if (atoms.empty()) {
                const double l = grad ? mix.accumulate_gradient(theta.col(j), -inv_n, g_out.col(j))
                                      : mix.logpdf(theta.col(j));
                total -= l;
                continue;
            }
            const auto& set = atoms[static_cast<std::size_t>(j)];
            lq.assign(set.size() + 1, 0.0);
            lq[0] = mix.logpdf(theta.col(j));
            for (std::size_t b = 0; b < set.size(); ++b) lq[b + 1] = mix.logpdf(theta.col(set[b]));
            const double lse = log_sum_exp(lq);
            const double w = nll_weights.empty() ? 0.0 : nll_weights[static_cast<std::size_t>(j)];
            total += lse - lq[0] - w * lq[0];
            if (grad) {
                // d/d log q_b of (lse - log q_0) = softmax_b - [b == 0]
                mix.accumulate_gradient(theta.col(j), inv_n * (std::exp(lq[0] - lse) - 1.0 - w),
                                        g_out.col(j));
                for (std::size_t b = 0; b < set.size(); ++b) {
                    mix.accumulate_gradient(theta.col(set[b]), inv_n * std::exp(lq[b + 1] - lse),
                                            g_out.col(j));
                }
            }
        }
        const double loss = total * inv_n;
        if (!std::isfinite(loss)) throw TrainingDivergence("non-finite training loss");
        if (grad) backward(a, x, g_out, *grad);
        return loss;
    }

private:
    struct Activations {
        Eigen::MatrixXd h1, h2, out;
    };

    struct Views {
        Eigen::Map<const Eigen::MatrixXd> w1;
        Eigen::Map<const Eigen::VectorXd> b1;
        Eigen::Map<const Eigen::MatrixXd> w2;
        Eigen::Map<const Eigen::VectorXd> b2;
        Eigen::Map<const Eigen::MatrixXd> w3;
        Eigen::Map<const Eigen::VectorXd> b3;
    };

    template <typename Ptr>
    struct Offsets {
        Ptr w1, b1, w2, b2, w3, b3;
    };

    template <typename Ptr>
    Offsets<Ptr> offsets(Ptr base) const
    {
        const Eigen::Index h = arch_.hidden;
        const Eigen::Index d = arch_.input_dim;
        const Eigen::Index p = arch_.output_dim();
        Offsets<Ptr> o{};
        o.w1 = base;
        o.b1 = o.w1 + h * d;
        o.w2 = o.b1 + h;
        o.b2 = o.w2 + h * h;
        o.w3 = o.b2 + h;
        o.b3 = o.w3 + p * h;
        return o;
    }

    [[nodiscard]] Views views() const
    {
        const Eigen::Index h = arch_.hidden;
        const Eigen::Index d = arch_.input_dim;
        const Eigen::Index p = arch_.output_dim();
        const auto o = offsets(weights_.data());
        return {{o.w1, h, d}, {o.b1, h}, {o.w2, h, h}, {o.b2, h}, {o.w3, p, h}, {o.b3, p}};
    }

    [[nodiscard]] Activations activations(const Eigen::Ref<const Eigen::MatrixXd>& x) const
    {
        if (x.rows() != arch_.input_dim) throw InvalidParameter("input dimension mismatch");
        const Views v = views();
        Activations a;
        a.h1 = ((v.w1 * x).colwise() + v.b1).array().tanh();
        a.h2 = ((v.w2 * a.h1).colwise() + v.b2).array().tanh();
        a.out = (v.w3 * a.h2).colwise() + v.b3;
        return a;
    }

    void backward(const Activations& a, const Eigen::Ref<const Eigen::MatrixXd>& x,
                  const Eigen::MatrixXd& g_out, Eigen::VectorXd& grad) const
    {
        const Eigen::Index h = arch_.hidden;
        const Eigen::Index d = arch_.input_dim;
        const Eigen::Index p = arch_.output_dim();
        grad.resize(weights_.size());
        const Views v = views();
        const auto o = offsets(grad.data());
        Eigen::Map<Eigen::MatrixXd>(o.w3, p, h) = g_out * a.h2.transpose();
        Eigen::Map<Eigen::VectorXd>(o.b3, p) = g_out.rowwise().sum();
        const Eigen::MatrixXd g2 =
            ((v.w3.transpose() * g_out).array() * (1.0 - a.h2.array().square())).matrix();
        Eigen::Map<Eigen::MatrixXd>(o.w2, h, h) = g2 * a.h1.transpose();
        Eigen::Map<Eigen::VectorXd>(o.b2, h) = g2.rowwise().sum();
        const Eigen::MatrixXd g1 =
            ((v.w2.transpose() * g2).array() * (1.0 - a.h1.array().square())).matrix();
        Eigen::Map<Eigen::MatrixXd>(o.w1, h, d) = g1 * x.transpose();
        Eigen::Map<Eigen::VectorXd>(o.b1, h) = g1.rowwise().sum();
    }

    /// Glorot-uniform hidden layers; a damped output layer whose biases
    /// spread component means over the unit box with moderate scales.
    void initialize(Engine& eng)
    {
        const Eigen::Index h = arch_.hidden;
        const Eigen::Index d = arch_.input_dim;
        const Eigen::Index p = arch_.output_dim();
        weights_.setZero();
        const auto o = offsets(weights_.data());
        auto glorot = [&](double* w, Eigen::Index rows, Eigen::Index cols, double gain) {
            const double a = gain * std::sqrt(6.0 / static_cast<double>(rows + cols));
            for (Eigen::Index i = 0; i < rows * cols; ++i) w[i] = uniform(eng, -a, a);
        };
        glorot(o.w1, h, d, 1.0);
        glorot(o.w2, h, h, 1.0);
        glorot(o.w3, p, h, 0.1);
        const int dim = arch_.param_dim;
        for (int m = 0; m < arch_.components; ++m) {
            double* block = o.b3 + static_cast<Eigen::Index>(m) * arch_.block_size();
            for (int i = 0; i < dim; ++i) block[1 + i] = uniform(eng, 0.2, 0.8);
            for (int i = 0; i < dim; ++i) block[1 + dim + i] = std::log(0.25);
        }
    }

    MdnArchitecture arch_;
    Eigen::VectorXd weights_;
};

}  // namespace vehid
