#pragma once

// Likelihood-free posterior estimation: uniform box prior, sequential
// training of the mixture-density posterior with the atomic contrastive
// loss, prior-truncated posterior sampling, and a rejection-ABC baseline.

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "vehid/errors.hpp"
#include "vehid/mdn.hpp"
#include "vehid/parallel.hpp"
#include "vehid/rng.hpp"
#include "vehid/summaries.hpp"

namespace vehid {

struct PriorBox {
    std::vector<double> lower;
    std::vector<double> upper;

    [[nodiscard]] std::size_t dim() const { return lower.size(); }

    void validate() const
    {
        if (lower.empty() || lower.size() != upper.size()) {
            throw InvalidParameter("prior box bounds must be non-empty and of equal length");
        }
        for (std::size_t i = 0; i < dim(); ++i) {
            if (!(lower[i] < upper[i])) throw InvalidParameter("prior box needs lower < upper");
        }
    }

    [[nodiscard]] double width(std::size_t i) const { return upper[i] - lower[i]; }

    [[nodiscard]] double log_volume() const
    {
        double v = 0.0;
        for (std::size_t i = 0; i < dim(); ++i) v += std::log(width(i));
        return v;
    }

    [[nodiscard]] bool contains(const Eigen::Ref<const Eigen::VectorXd>& theta) const
    {
        if (static_cast<std::size_t>(theta.size()) != dim()) return false;
        for (std::size_t i = 0; i < dim(); ++i) {
            if (!(theta[i] >= lower[i] && theta[i] <= upper[i])) return false;
        }
        return true;
    }

    /// Affine map onto [0, 1]^d.
    [[nodiscard]] Eigen::VectorXd to_unit(const Eigen::Ref<const Eigen::VectorXd>& theta) const
    {
        Eigen::VectorXd u(theta.size());
        for (std::size_t i = 0; i < dim(); ++i) u[i] = (theta[i] - lower[i]) / width(i);
        return u;
    }

    [[nodiscard]] Eigen::VectorXd from_unit(const Eigen::Ref<const Eigen::VectorXd>& u) const
    {
        Eigen::VectorXd theta(u.size());
        for (std::size_t i = 0; i < dim(); ++i) theta[i] = lower[i] + u[i] * width(i);
        return theta;
    }

    /// Bounds for l_f, h_cog, d_Ckf, d_Ckr, d_Caf, d_Car.
    static PriorBox vehicle_default()
    {
        return {{1.0, 0.2, -0.2, -0.2, -0.3, -0.3}, {1.5, 0.6, 0.5, 0.5, 0.3, 0.3}};
    }

    friend bool operator==(const PriorBox&, const PriorBox&) = default;
};

inline Eigen::VectorXd prior_sample(Engine& eng, const PriorBox& box)
{
    Eigen::VectorXd theta(static_cast<Eigen::Index>(box.dim()));
    for (std::size_t i = 0; i < box.dim(); ++i) theta[i] = uniform(eng, box.lower[i], box.upper[i]);
    return theta;
}

inline double prior_logpdf(const Eigen::Ref<const Eigen::VectorXd>& theta, const PriorBox& box)
{
    return box.contains(theta) ? -box.log_volume() : -std::numeric_limits<double>::infinity();
}

/// A stochastic simulator already reduced to (unnormalized) summary
/// statistics. Invalid simulations return std::nullopt.
template <typename S>
concept SummarySimulator = requires(const S& s, const Eigen::VectorXd& theta, const RngStream& r) {
    { s.param_dim() } -> std::convertible_to<std::size_t>;
    { s.summary_dim() } -> std::convertible_to<std::size_t>;
    { s(theta, r) } -> std::same_as<std::optional<Eigen::VectorXd>>;
};

/// The vehicle simulator seen through the summary statistics. Parameters
/// not listed in `free` stay at their value in `base`.
struct VehicleSummarySimulator {
    SimConfig config;
    SummaryLayout layout;
    IdentifiedParams base;
    std::vector<std::size_t> free{0, 1, 2, 3, 4, 5};

    [[nodiscard]] std::size_t param_dim() const { return free.size(); }
    [[nodiscard]] std::size_t summary_dim() const { return layout.size(); }

    [[nodiscard]] IdentifiedParams full_params(const Eigen::Ref<const Eigen::VectorXd>& theta) const
    {
        auto a = base.to_array();
        for (std::size_t i = 0; i < free.size(); ++i) a[free[i]] = theta[static_cast<Eigen::Index>(i)];
        return IdentifiedParams::from_array(a);
    }

    std::optional<Eigen::VectorXd> operator()(const Eigen::VectorXd& theta, const RngStream& rng) const
    {
        const TrajectoryRecord rec = simulate(full_params(theta), rng, config);
        if (!rec.valid) return std::nullopt;
        return summarize(rec, layout).values;
    }
};

struct TrainConfig {
    int rounds = 5;
    int sims_per_round = 5000;
    int atoms = 10;
    int batch_size = 256;
    int epochs_per_round = 200;
    double learning_rate = 1e-3;
    double validation_fraction = 0.1;
    int patience = 30;
    int hidden = 50;
    int components = 8;
    int pilot_sims = 1000;
    int posterior_samples = 1000;
    // In atomic rounds, also maximize log q(theta|x) on pairs drawn from the prior.
    bool prior_likelihood_term = true;
    // Decay of the per-step exponential moving average of the weights that is
    // validated and kept; 0 disables averaging.
    double weight_averaging = 0.995;

    void validate() const
    {
        if (rounds < 1 || sims_per_round < 2 || atoms < 1 || batch_size < 2 || epochs_per_round < 1 ||
            patience < 1 || hidden < 1 || components < 1 || pilot_sims < 2 || posterior_samples < 1) {
            throw InvalidParameter("train config values must be positive");
        }
        if (atoms > batch_size) throw InvalidParameter("atom count exceeds batch size");
        if (!(learning_rate > 0.0)) throw InvalidParameter("learning rate must be positive");
        if (!(weight_averaging >= 0.0 && weight_averaging < 1.0)) {
            throw InvalidParameter("weight averaging decay must lie in [0, 1)");
        }
        if (!(validation_fraction > 0.0 && validation_fraction < 1.0)) {
            throw InvalidParameter("validation fraction must lie in (0, 1)");
        }
    }

    friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

/// Adaptive-moment gradient descent.
class Adam {
public:
    explicit Adam(Eigen::Index n, double lr, double beta1 = 0.9, double beta2 = 0.999,
                  double eps = 1e-8)
        : lr_(lr), b1_(beta1), b2_(beta2), eps_(eps), m_(Eigen::VectorXd::Zero(n)),
          v_(Eigen::VectorXd::Zero(n))
    {
    }

    void step(Eigen::VectorXd& w, const Eigen::VectorXd& g)
    {
        ++t_;
        m_ = b1_ * m_ + (1.0 - b1_) * g;
        v_ = b2_ * v_ + (1.0 - b2_) * g.cwiseAbs2();
        const double c1 = 1.0 - std::pow(b1_, t_);
        const double c2 = 1.0 - std::pow(b2_, t_);
        w.array() -= lr_ * (m_.array() / c1) / ((v_.array() / c2).sqrt() + eps_);
    }

private:
    double lr_, b1_, b2_, eps_;
    Eigen::VectorXd m_, v_;
    int t_ = 0;
};

/// Training pairs: parameters in unit-box coordinates and normalized summaries.
struct TrainingData {
    Eigen::MatrixXd theta;   // param_dim x n
    Eigen::MatrixXd x;       // summary_dim x n
    std::vector<double> from_prior;   // 1 for pairs drawn from the prior, else 0
    std::vector<char> held_out;       // validation membership, fixed when a pair is added

    [[nodiscard]] Eigen::Index size() const { return theta.cols(); }

    /// Adds a block of pairs and holds out round(fraction * cols) of them,
    /// chosen with `eng`, for validation in this and every later round.
    void append(const Eigen::MatrixXd& t, const Eigen::MatrixXd& s, bool prior_draws,
                double validation_fraction, Engine& eng)
    {
        if (t.cols() != s.cols()) throw InvalidParameter("parameter and summary counts differ");
        const auto cols = static_cast<std::size_t>(t.cols());
        from_prior.insert(from_prior.end(), cols, prior_draws ? 1.0 : 0.0);
        std::vector<char> mark(cols, 0);
        const auto n_val = std::min<std::size_t>(
            cols, static_cast<std::size_t>(std::llround(validation_fraction * static_cast<double>(cols))));
        std::fill_n(mark.begin(), n_val, 1);
        std::shuffle(mark.begin(), mark.end(), eng);
        held_out.insert(held_out.end(), mark.begin(), mark.end());
        if (theta.size() == 0) {
            theta = t;
            x = s;
            return;
        }
        Eigen::MatrixXd nt(theta.rows(), theta.cols() + t.cols());
        nt << theta, t;
        Eigen::MatrixXd nx(x.rows(), x.cols() + s.cols());
        nx << x, s;
        theta = std::move(nt);
        x = std::move(nx);
    }
};

/// Mean contrastive loss over a batch (unit-box parameters). Atoms are drawn
/// from the batch itself; with a uniform prior the proposal/prior ratios cancel.
inline double atomic_loss(const MdnModel& model, const Eigen::Ref<const Eigen::MatrixXd>& theta_unit,
                          const Eigen::Ref<const Eigen::MatrixXd>& x, int atoms, Engine& eng,
                          Eigen::VectorXd* grad = nullptr)
{
    if (atoms > theta_unit.cols()) throw InvalidParameter("more atoms than batch members");
    if ((theta_unit.array() < 0.0).any() || (theta_unit.array() > 1.0).any()) {
        throw InvalidParameter("atomic loss needs parameters inside the prior box");
    }
    const AtomSets sets = draw_atoms(static_cast<int>(theta_unit.cols()), atoms, eng);
    return model.loss_and_gradient(theta_unit, x, sets, grad);
}

enum class LossKind { kLikelihood, kAtomic };

struct RoundReport {
    int round = 0;
    std::size_t simulations = 0;
    std::size_t invalid_simulations = 0;
    double proposal_acceptance = 1.0;   // 1 - leakage of the proposal
    LossKind loss = LossKind::kLikelihood;
    std::vector<double> train_loss;
    std::vector<double> validation_loss;
    double best_validation_loss = 0.0;
    int epochs_run = 0;
};

namespace detail {

inline Eigen::MatrixXd gather(const Eigen::MatrixXd& m, std::span<const Eigen::Index> idx)
{
    Eigen::MatrixXd out(m.rows(), static_cast<Eigen::Index>(idx.size()));
    for (std::size_t i = 0; i < idx.size(); ++i) out.col(static_cast<Eigen::Index>(i)) = m.col(idx[i]);
    return out;
}

}  // namespace detail

/// One round of training. Round 1 minimizes -log q(theta|x); later rounds
/// use the atomic loss. The model is left at the weights with the best
/// validation loss.
inline RoundReport train_round(MdnModel& model, const TrainingData& data, const TrainConfig& cfg,
                               int round, const RngStream& rng)
{
    const Eigen::Index n = data.size();
    if (n < 2) throw InvalidParameter("training set too small");
    RoundReport report;
    report.round = round;
    report.loss = round <= 1 ? LossKind::kLikelihood : LossKind::kAtomic;
    const bool atomic = report.loss == LossKind::kAtomic;

    if (data.held_out.size() != static_cast<std::size_t>(n)) {
        throw InvalidParameter("training data lacks a validation split");
    }
    Engine eng = rng.named("shuffle").engine();
    std::vector<Eigen::Index> val_idx;
    std::vector<Eigen::Index> train_idx;
    for (Eigen::Index i = 0; i < n; ++i) {
        (data.held_out[static_cast<std::size_t>(i)] ? val_idx : train_idx).push_back(i);
    }
    if (val_idx.empty() || train_idx.empty()) {
        throw InvalidParameter("validation split leaves an empty set");
    }
    const auto n_val = static_cast<Eigen::Index>(val_idx.size());
    const Eigen::MatrixXd val_theta = detail::gather(data.theta, val_idx);
    const Eigen::MatrixXd val_x = detail::gather(data.x, val_idx);
    const bool mixed = atomic && cfg.prior_likelihood_term &&
                       data.from_prior.size() == static_cast<std::size_t>(n);
    auto prior_weights = [&](std::span<const Eigen::Index> idx) {
        std::vector<double> w;
        if (!mixed) return w;
        w.reserve(idx.size());
        for (Eigen::Index i : idx) w.push_back(data.from_prior[static_cast<std::size_t>(i)]);
        return w;
    };
    const std::vector<double> val_prior = prior_weights(val_idx);

    const RngStream val_stream = rng.named("validation-atoms");
    auto validation_loss = [&] {
        Engine veng = val_stream.engine();   // same atoms every epoch
        double total = 0.0;
        for (Eigen::Index start = 0; start < n_val; start += cfg.batch_size) {
            const Eigen::Index len = std::min<Eigen::Index>(cfg.batch_size, n_val - start);
            const auto th = val_theta.middleCols(start, len);
            const auto xs = val_x.middleCols(start, len);
            if (atomic && len < 2) continue;
            const AtomSets sets =
                atomic ? draw_atoms(static_cast<int>(len), cfg.atoms, veng) : AtomSets{};
            const std::span<const double> w =
                val_prior.empty() ? std::span<const double>{}
                                  : std::span<const double>(val_prior).subspan(static_cast<std::size_t>(start),
                                                                                static_cast<std::size_t>(len));
            total += model.loss_and_gradient(th, xs, sets, nullptr, w) * static_cast<double>(len);
        }
        return total / static_cast<double>(n_val);
    };

    Adam opt(model.weights().size(), cfg.learning_rate);
    Eigen::VectorXd best = model.weights();
    double best_loss = validation_loss();
    Eigen::VectorXd live;
    Eigen::VectorXd average = model.weights();
    const double beta = cfg.weight_averaging;
    int since_best = 0;
    Eigen::VectorXd grad;
    for (int epoch = 0; epoch < cfg.epochs_per_round; ++epoch) {
        std::shuffle(train_idx.begin(), train_idx.end(), eng);
        double epoch_loss = 0.0;
        const auto n_train = static_cast<Eigen::Index>(train_idx.size());
        for (Eigen::Index start = 0; start < n_train; start += cfg.batch_size) {
            const Eigen::Index len = std::min<Eigen::Index>(cfg.batch_size, n_train - start);
            if (atomic && len < 2) continue;
            const std::span<const Eigen::Index> idx(train_idx.data() + start, static_cast<std::size_t>(len));
            const Eigen::MatrixXd th = detail::gather(data.theta, idx);
            const Eigen::MatrixXd xs = detail::gather(data.x, idx);
            const AtomSets sets =
                atomic ? draw_atoms(static_cast<int>(len), cfg.atoms, eng) : AtomSets{};
            const std::vector<double> w = prior_weights(idx);
            const double loss = model.loss_and_gradient(th, xs, sets, &grad, w);
            if (!grad.allFinite()) throw TrainingDivergence("non-finite gradient in round " + std::to_string(round));
            opt.step(model.weights(), grad);
            if (beta > 0.0) average = beta * average + (1.0 - beta) * model.weights();
            epoch_loss += loss * static_cast<double>(len);
        }
        report.train_loss.push_back(epoch_loss / static_cast<double>(n_train));
        if (beta > 0.0) {
            live = model.weights();
            model.weights() = average;
        }
        const double vl = validation_loss();
        if (beta > 0.0) model.weights() = live;
        report.validation_loss.push_back(vl);
        report.epochs_run = epoch + 1;
        if (vl < best_loss) {
            best_loss = vl;
            best = beta > 0.0 ? average : model.weights();
            since_best = 0;
        } else if (++since_best >= cfg.patience) {
            break;
        }
    }
    model.weights() = best;
    report.best_validation_loss = best_loss;
    return report;
}

struct PosteriorSamples {
    Eigen::MatrixXd samples;   // n x d, physical units
    std::size_t proposals = 0;
    [[nodiscard]] double acceptance() const
    {
        return proposals ? static_cast<double>(samples.rows()) / static_cast<double>(proposals) : 0.0;
    }
};

inline constexpr std::size_t kLeakageProposalLimit = 1'000'000;
inline constexpr double kLeakageMinAcceptance = 1e-3;

/// Draws from q(theta | x) truncated to the prior box by rejection.
inline PosteriorSamples posterior_sample(const MdnModel& model,
                                         const Eigen::Ref<const Eigen::VectorXd>& x_normalized,
                                         std::size_t n, Engine& eng, const PriorBox& box)
{
    const GaussianMixture mix = model.mixture(x_normalized);
    PosteriorSamples out;
    out.samples.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(box.dim()));
    std::size_t accepted = 0;
    while (accepted < n) {
        const Eigen::VectorXd u = mix.sample(eng);
        ++out.proposals;
        if ((u.array() >= 0.0).all() && (u.array() <= 1.0).all()) {
            out.samples.row(static_cast<Eigen::Index>(accepted++)) = box.from_unit(u).transpose();
        }
        if (out.proposals >= kLeakageProposalLimit &&
            static_cast<double>(accepted) < kLeakageMinAcceptance * static_cast<double>(out.proposals)) {
            throw LeakageError("posterior mass leaks out of the prior box (acceptance " +
                               std::to_string(static_cast<double>(accepted) /
                                              static_cast<double>(out.proposals)) + ")");
        }
    }
    return out;
}

/// Posterior density in physical units (prior-truncation normalizer omitted).
inline double posterior_logpdf(const MdnModel& model, const Eigen::Ref<const Eigen::VectorXd>& theta,
                               const Eigen::Ref<const Eigen::VectorXd>& x_normalized,
                               const PriorBox& box)
{
    return model.logpdf(box.to_unit(theta), x_normalized) - box.log_volume();
}

/// Simulated parameter/summary pairs where every entry is a valid simulation.
struct SimulationSet {
    Eigen::MatrixXd theta;       // d x n, physical
    Eigen::MatrixXd summaries;   // summary_dim x n, raw
    std::size_t invalid = 0;
};

/// Simulates n valid pairs with parameters from `propose`. Invalid
/// simulations are dropped and their parameters redrawn; gives up after 10 n
/// attempts.
template <SummarySimulator Sim, typename Proposal>
SimulationSet simulate_set(const Sim& sim, Proposal&& propose, std::size_t n, const RngStream& rng,
                           unsigned threads)
{
    SimulationSet out;
    out.theta.resize(static_cast<Eigen::Index>(sim.param_dim()), static_cast<Eigen::Index>(n));
    out.summaries.resize(static_cast<Eigen::Index>(sim.summary_dim()), static_cast<Eigen::Index>(n));
    std::vector<std::size_t> pending(n);
    std::iota(pending.begin(), pending.end(), std::size_t{0});
    std::uint64_t counter = 0;
    std::size_t attempts = 0;
    while (!pending.empty()) {
        attempts += pending.size();
        if (attempts > 10 * n + 10) {
            throw SimulationFailure("too many invalid simulations (" + std::to_string(out.invalid) + ")");
        }
        std::vector<Eigen::VectorXd> thetas(pending.size());
        std::vector<RngStream> streams(pending.size());
        for (std::size_t i = 0; i < pending.size(); ++i) {
            thetas[i] = propose();
            streams[i] = rng.child(counter++);
        }
        std::vector<std::optional<Eigen::VectorXd>> results(pending.size());
        parallel_for(pending.size(), threads, [&](std::size_t i) { results[i] = sim(thetas[i], streams[i]); });
        std::vector<std::size_t> retry;
        for (std::size_t i = 0; i < pending.size(); ++i) {
            if (!results[i]) {
                ++out.invalid;
                retry.push_back(pending[i]);
                continue;
            }
            out.theta.col(static_cast<Eigen::Index>(pending[i])) = thetas[i];
            out.summaries.col(static_cast<Eigen::Index>(pending[i])) = *results[i];
        }
        pending = std::move(retry);
    }
    return out;
}

inline Eigen::MatrixXd normalize_columns(const Eigen::MatrixXd& raw, const Normalizer& n)
{
    Eigen::MatrixXd out(raw.rows(), raw.cols());
    for (Eigen::Index j = 0; j < raw.cols(); ++j) out.col(j) = normalize({raw.col(j), false}, n).values;
    return out;
}

/// Pilot run: prior-predictive simulations whose summaries fix the normalizer.
/// Fails if more than 10% of the simulations are invalid.
template <SummarySimulator Sim>
Normalizer pilot_normalizer(const Sim& sim, const PriorBox& box, std::size_t n, const RngStream& rng,
                            unsigned threads, std::size_t* invalid_out = nullptr)
{
    Engine eng = rng.named("theta").engine();
    std::vector<Eigen::VectorXd> thetas(n);
    for (auto& t : thetas) t = prior_sample(eng, box);
    std::vector<std::optional<Eigen::VectorXd>> results(n);
    parallel_for(n, threads, [&](std::size_t i) { results[i] = sim(thetas[i], rng.child(i)); });
    std::vector<SummaryVector> valid;
    for (auto& r : results) {
        if (r) valid.push_back({std::move(*r), false});
    }
    const std::size_t invalid = n - valid.size();
    if (invalid_out) *invalid_out = invalid;
    if (static_cast<double>(invalid) > 0.1 * static_cast<double>(n)) {
        throw SimulationFailure("pilot run: " + std::to_string(invalid) + " of " + std::to_string(n) +
                                " simulations invalid");
    }
    return fit_normalizer(valid);
}

struct SnpeResult {
    MdnModel model;
    Normalizer normalizer;
    PosteriorSamples posterior;
    std::vector<RoundReport> rounds;
};

/// Sequential neural posterior estimation. Round 1 simulates from the prior;
/// later rounds simulate from the current posterior at the observation,
/// truncated to the prior box. Data from all rounds are kept for training.
/// `on_round` (optional) sees each finished round, e.g. to persist partial results.
template <SummarySimulator Sim>
SnpeResult run_snpe(const Sim& sim, const Eigen::VectorXd& observed_summary, const PriorBox& box,
                    const TrainConfig& cfg, const RngStream& rng, unsigned threads = 1,
                    std::optional<Normalizer> normalizer = std::nullopt,
                    const std::function<void(const SnpeResult&)>& on_round = {})
{
    cfg.validate();
    box.validate();
    if (box.dim() != sim.param_dim()) throw InvalidParameter("prior box dimension mismatch");

    SnpeResult result;
    result.normalizer = normalizer ? std::move(*normalizer)
                                   : pilot_normalizer(sim, box, static_cast<std::size_t>(cfg.pilot_sims),
                                                      rng.named("pilot"), threads);
    const Eigen::VectorXd x_obs = normalize({observed_summary, false}, result.normalizer).values;

    MdnArchitecture arch;
    arch.input_dim = static_cast<int>(sim.summary_dim());
    arch.param_dim = static_cast<int>(sim.param_dim());
    arch.hidden = cfg.hidden;
    arch.components = cfg.components;
    Engine init = rng.named("init").engine();
    result.model = MdnModel(arch, init);

    TrainingData data;
    const auto n = static_cast<std::size_t>(cfg.sims_per_round);
    for (int r = 1; r <= cfg.rounds; ++r) {
        const std::string tag = "round-" + std::to_string(r);
        Engine proposal_eng = rng.named(tag + "-proposal").engine();
        std::size_t proposals = 0;
        std::size_t accepted = 0;
        std::function<Eigen::VectorXd()> propose;
        std::optional<GaussianMixture> mix;
        if (r == 1) {
            propose = [&] { return prior_sample(proposal_eng, box); };
        } else {
            mix = result.model.mixture(x_obs);
            propose = [&] {
                for (;;) {
                    const Eigen::VectorXd u = mix->sample(proposal_eng);
                    ++proposals;
                    if ((u.array() >= 0.0).all() && (u.array() <= 1.0).all()) {
                        ++accepted;
                        return Eigen::VectorXd(box.from_unit(u));
                    }
                    if (proposals >= kLeakageProposalLimit &&
                        static_cast<double>(accepted) < kLeakageMinAcceptance * static_cast<double>(proposals)) {
                        throw LeakageError("proposal leaks out of the prior box in " + tag);
                    }
                }
            };
        }
        const SimulationSet set = simulate_set(sim, propose, n, rng.named(tag + "-sim"), threads);

        Eigen::MatrixXd unit(set.theta.rows(), set.theta.cols());
        for (Eigen::Index j = 0; j < unit.cols(); ++j) unit.col(j) = box.to_unit(set.theta.col(j));
        Engine split = rng.named(tag + "-split").engine();
        data.append(unit, normalize_columns(set.summaries, result.normalizer), r == 1,
                    cfg.validation_fraction, split);

        RoundReport report = train_round(result.model, data, cfg, r, rng.named(tag + "-train"));
        report.simulations = n;
        report.invalid_simulations = set.invalid;
        report.proposal_acceptance =
            r == 1 ? 1.0 : static_cast<double>(accepted) / static_cast<double>(std::max<std::size_t>(proposals, 1));
        result.rounds.push_back(std::move(report));
        if (on_round) on_round(result);
    }

    Engine post = rng.named("posterior").engine();
    result.posterior = posterior_sample(result.model, x_obs,
                                        static_cast<std::size_t>(cfg.posterior_samples), post, box);
    return result;
}

struct AbcResult {
    Eigen::MatrixXd samples;      // kept x d, physical
    std::vector<double> distances;
    double epsilon = 0.0;         // largest accepted distance
    std::size_t invalid = 0;
};

/// Rejection ABC: n_sims prior draws ranked by Euclidean distance to the
/// observation in normalized summary space; the closest fraction is kept.
template <SummarySimulator Sim>
AbcResult rejection_abc(const Sim& sim, const Eigen::VectorXd& observed_summary,
                        const Normalizer& normalizer, const PriorBox& box, std::size_t n_sims,
                        double accept_fraction, const RngStream& rng, unsigned threads = 1)
{
    if (!(accept_fraction > 0.0 && accept_fraction <= 1.0)) {
        throw InvalidParameter("accept fraction must lie in (0, 1]");
    }
    const auto keep = static_cast<std::size_t>(std::llround(static_cast<double>(n_sims) * accept_fraction));
    if (keep < 100) throw InvalidParameter("rejection ABC needs n_sims * accept_fraction >= 100");

    Engine eng = rng.named("theta").engine();
    const SimulationSet set =
        simulate_set(sim, [&] { return prior_sample(eng, box); }, n_sims, rng.named("sim"), threads);
    const Eigen::VectorXd x_obs = normalize({observed_summary, false}, normalizer).values;
    const Eigen::MatrixXd x = normalize_columns(set.summaries, normalizer);

    std::vector<double> dist(n_sims);
    for (std::size_t j = 0; j < n_sims; ++j) dist[j] = (x.col(static_cast<Eigen::Index>(j)) - x_obs).norm();
    std::vector<std::size_t> order(n_sims);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return dist[a] < dist[b]; });

    AbcResult out;
    out.invalid = set.invalid;
    out.samples.resize(static_cast<Eigen::Index>(keep), set.theta.rows());
    for (std::size_t i = 0; i < keep; ++i) {
        out.samples.row(static_cast<Eigen::Index>(i)) = set.theta.col(static_cast<Eigen::Index>(order[i])).transpose();
        out.distances.push_back(dist[order[i]]);
    }
    out.epsilon = out.distances.back();
    return out;
}

}  // namespace vehid
