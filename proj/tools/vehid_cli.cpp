// Command-line driver: simulate, pilot, infer, abc, fisher, analyze.
//
// Exit codes: 0 ok, 1 I/O or unexpected error, 2 configuration or malformed
// input, 3 simulation failure, 4 training failure, 5 singular Fisher matrix.

#include <CLI11.hpp>

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "vehid/vehid.hpp"

namespace fs = std::filesystem;
using namespace vehid;

namespace {

enum Exit : int { kOk = 0, kFailure = 1, kConfig = 2, kSimulation = 3, kTraining = 4, kSingular = 5 };

struct Common {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::string out;
    unsigned threads = 1;
};

ExperimentConfig load(const Common& c)
{
    ExperimentConfig cfg = c.config_path.empty() ? ExperimentConfig{} : load_config(c.config_path);
    if (c.seed) cfg.seed = *c.seed;
    if (!c.out.empty()) cfg.output_dir = c.out;
    cfg.validate();
    return cfg;
}

fs::path out_dir(const ExperimentConfig& cfg)
{
    const fs::path dir = cfg.output_dir;
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
    return dir;
}

VehicleSummarySimulator make_simulator(const ExperimentConfig& cfg)
{
    VehicleSummarySimulator sim;
    sim.config = cfg.sim_config();
    return sim;
}

/// "nominal", "sample" or six comma-separated numbers.
std::optional<Eigen::VectorXd> parse_theta(const std::string& text)
{
    if (text == "sample") return std::nullopt;
    if (text == "nominal") {
        const auto a = IdentifiedParams{}.to_array();
        return Eigen::Map<const Eigen::VectorXd>(a.data(), static_cast<Eigen::Index>(a.size()));
    }
    std::vector<double> v;
    std::stringstream s(text);
    std::string cell;
    while (std::getline(s, cell, ',')) {
        try {
            std::size_t used = 0;
            v.push_back(std::stod(cell, &used));
            if (used != cell.size()) throw std::invalid_argument(cell);
        } catch (const std::exception&) {
            throw ConfigError("bad theta component '" + cell + "'");
        }
    }
    if (v.size() != kParamCount) throw ConfigError("theta needs 6 comma-separated values");
    return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

Eigen::VectorXd observed_summary(const fs::path& path)
{
    return summarize(read_trajectory(path)).values;
}

Normalizer obtain_normalizer(const ExperimentConfig& cfg, const VehicleSummarySimulator& sim,
                             const std::string& path, unsigned threads)
{
    if (!path.empty()) return read_normalizer(path, sim.layout);
    return pilot_normalizer(sim, cfg.prior, static_cast<std::size_t>(cfg.training.pilot_sims),
                            cfg.master().named("pilot"), threads);
}

int cmd_simulate(const Common& c, const std::string& theta_text)
{
    const ExperimentConfig cfg = load(c);
    const std::optional<Eigen::VectorXd> given = parse_theta(theta_text);
    Eigen::VectorXd theta;
    if (given) {
        theta = *given;
    } else {
        Engine eng = cfg.master().named("truth").engine();
        theta = prior_sample(eng, cfg.prior);
    }
    const VehicleSummarySimulator sim = make_simulator(cfg);
    const RngStream stream = cfg.master().named("observation");
    const TrajectoryRecord rec = simulate(sim.full_params(theta), stream, sim.config);

    TrajectoryMeta meta;
    meta.theta = rec.theta_used;
    meta.seed = stream;
    meta.config_hash = config_hash(cfg);
    meta.valid = rec.valid;
    meta.sampled_truth = !given.has_value();
    meta.failure = rec.failure;
    const fs::path dir = out_dir(cfg);
    write_trajectory(rec, meta, dir / "trajectory");
    if (!rec.valid) {
        std::cerr << "simulation failed: " << rec.failure << "\n";
        return kSimulation;
    }
    std::cout << "wrote " << (dir / "trajectory.csv").string() << " (" << rec.size() << " samples)\n";
    return kOk;
}

int cmd_pilot(const Common& c)
{
    const ExperimentConfig cfg = load(c);
    const VehicleSummarySimulator sim = make_simulator(cfg);
    std::size_t invalid = 0;
    const Normalizer n = pilot_normalizer(sim, cfg.prior, static_cast<std::size_t>(cfg.training.pilot_sims),
                                          cfg.master().named("pilot"), c.threads, &invalid);
    const fs::path dir = out_dir(cfg);
    detail::write_text(dir / "normalizer.json", to_json(n, sim.layout).dump(2) + "\n");
    std::cerr << "pilot: " << n.pilot_count << " simulations, " << invalid << " invalid\n";
    return kOk;
}

int cmd_infer(const Common& c, const std::string& observation, const std::string& normalizer_path)
{
    const ExperimentConfig cfg = load(c);
    const VehicleSummarySimulator sim = make_simulator(cfg);
    const Eigen::VectorXd x_obs = observed_summary(observation);
    std::optional<Normalizer> norm;
    if (!normalizer_path.empty()) norm = read_normalizer(normalizer_path, sim.layout);
    const fs::path dir = out_dir(cfg);

    auto save_progress = [&](const SnpeResult& r) {
        detail::write_text(dir / "report.json", to_json(r.rounds).dump(2) + "\n");
        detail::write_text(dir / "model.json",
                           to_json(r.model, cfg.prior, normalizer_hash(r.normalizer, sim.layout)).dump() + "\n");
        const RoundReport& last = r.rounds.back();
        std::cerr << "round " << last.round << ": " << last.epochs_run << " epochs, best validation loss "
                  << last.best_validation_loss << ", proposal acceptance " << last.proposal_acceptance << "\n";
    };
    const SnpeResult result = run_snpe(sim, x_obs, cfg.prior, cfg.training, cfg.master(), c.threads, norm, save_progress);
    if (!norm) detail::write_text(dir / "normalizer.json", to_json(result.normalizer, sim.layout).dump(2) + "\n");
    detail::write_text(dir / "samples.csv", samples_csv(result.posterior.samples, param_names()));
    std::cout << "wrote " << result.posterior.samples.rows() << " posterior samples to "
              << (dir / "samples.csv").string() << "\n";
    return kOk;
}

int cmd_abc(const Common& c, const std::string& observation, const std::string& normalizer_path,
            std::size_t n_sims, double fraction)
{
    const ExperimentConfig cfg = load(c);
    const VehicleSummarySimulator sim = make_simulator(cfg);
    const Eigen::VectorXd x_obs = observed_summary(observation);
    const Normalizer norm = obtain_normalizer(cfg, sim, normalizer_path, c.threads);
    const AbcResult abc =
        rejection_abc(sim, x_obs, norm, cfg.prior, n_sims, fraction, cfg.master().named("abc"), c.threads);
    const fs::path dir = out_dir(cfg);
    detail::write_text(dir / "abc_samples.csv", samples_csv(abc.samples, param_names()));
    std::cout << "kept " << abc.samples.rows() << " of " << n_sims << " (epsilon " << abc.epsilon << ")\n";
    return kOk;
}

int cmd_fisher(const Common& c, const std::string& theta_text)
{
    const ExperimentConfig cfg = load(c);
    const std::optional<Eigen::VectorXd> theta = parse_theta(theta_text);
    if (!theta) throw ConfigError("fisher needs 'nominal' or six values, not 'sample'");
    const VehicleSummarySimulator sim = make_simulator(cfg);
    Eigen::VectorXd steps = default_fd_steps(cfg.prior) * (cfg.fisher.fd_fraction / 0.01);
    const FisherReport report =
        fisher_matrix(sim, *theta, steps, cfg.fisher.n_sims, cfg.master().named("fisher"), &cfg.prior, nullptr, c.threads);
    const fs::path dir = out_dir(cfg);
    detail::write_text(dir / "fisher.json", to_json(report, param_names()).dump(2) + "\n");
    std::cout << "condition number " << report.condition_number << (report.singular ? " (singular)" : "") << "\n";
    return report.singular ? kSingular : kOk;
}

int cmd_analyze(const Common& c, const std::string& samples_path, const std::string& truth_text)
{
    const ExperimentConfig cfg = load(c);
    const NamedSamples s = read_samples(samples_path);
    if (s.names != param_names()) throw FormatError(samples_path + ": columns must be l_f,h_cog,d_Ckf,d_Ckr,d_Caf,d_Car");
    if (s.samples.rows() < 2) throw FormatError(samples_path + ": need at least two samples");
    std::optional<Eigen::VectorXd> truth;
    if (!truth_text.empty()) {
        if (fs::path(truth_text).extension() == ".json") {
            const auto a = read_trajectory_meta(truth_text).theta.to_array();
            truth = Eigen::Map<const Eigen::VectorXd>(a.data(), static_cast<Eigen::Index>(a.size()));
        } else {
            truth = parse_theta(truth_text);
        }
    }
    const PosteriorTable table = posterior_table(s.samples, cfg.prior, param_names(), truth);
    const fs::path dir = out_dir(cfg);
    detail::write_text(dir / "table.csv", table_csv(table));
    detail::write_text(dir / "table.txt", table_text(table));
    pairplot_export(s.samples, cfg.prior, param_names(), truth, dir / "pairplot");
    std::cout << table_text(table);
    return kOk;
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Simulation-based identification of single-track vehicle parameters"};
    app.require_subcommand(1);
    Common common;
    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", common.config_path, "Experiment config (JSON)")->check(CLI::ExistingFile);
        sub->add_option("--seed", common.seed, "Override the master seed");
        sub->add_option("--out", common.out, "Output directory (overrides config)");
        sub->add_option("--threads", common.threads, "Worker threads for simulation (0 = all cores)");
    };

    std::string theta = "nominal";
    std::string observation;
    std::string normalizer;
    std::string samples;
    std::string truth;
    std::size_t abc_sims = 20000;
    double abc_fraction = 0.01;

    auto* simulate_cmd = app.add_subcommand("simulate", "Simulate one noisy trajectory");
    add_common(simulate_cmd);
    simulate_cmd->add_option("--theta", theta, "'nominal', 'sample' or six comma-separated values");

    auto* pilot_cmd = app.add_subcommand("pilot", "Fit the summary normalizer from prior simulations");
    add_common(pilot_cmd);

    auto* infer_cmd = app.add_subcommand("infer", "Sequential posterior estimation for an observed trajectory");
    add_common(infer_cmd);
    infer_cmd->add_option("--observation", observation, "Trajectory CSV")->required()->check(CLI::ExistingFile);
    infer_cmd->add_option("--normalizer", normalizer, "Normalizer JSON from 'pilot'")->check(CLI::ExistingFile);

    auto* abc_cmd = app.add_subcommand("abc", "Rejection ABC baseline");
    add_common(abc_cmd);
    abc_cmd->add_option("--observation", observation, "Trajectory CSV")->required()->check(CLI::ExistingFile);
    abc_cmd->add_option("--normalizer", normalizer, "Normalizer JSON from 'pilot'")->check(CLI::ExistingFile);
    abc_cmd->add_option("--n-sims", abc_sims, "Prior simulations")->check(CLI::PositiveNumber);
    abc_cmd->add_option("--accept-fraction", abc_fraction, "Fraction kept")->check(CLI::Range(1e-9, 1.0));

    auto* fisher_cmd = app.add_subcommand("fisher", "Fisher information of the summaries");
    add_common(fisher_cmd);
    fisher_cmd->add_option("--theta", theta, "'nominal' or six comma-separated values");

    auto* analyze_cmd = app.add_subcommand("analyze", "Posterior table and pair-plot export");
    add_common(analyze_cmd);
    analyze_cmd->add_option("--samples", samples, "Samples CSV")->required()->check(CLI::ExistingFile);
    analyze_cmd->add_option("--truth", truth, "Trajectory sidecar JSON or six comma-separated values");

    auto* config_cmd = app.add_subcommand("config", "Print the default configuration");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kConfig;
    }

    try {
        if (*config_cmd) {
            std::cout << dump_config(ExperimentConfig{});
            return kOk;
        }
        if (*simulate_cmd) return cmd_simulate(common, theta);
        if (*pilot_cmd) return cmd_pilot(common);
        if (*infer_cmd) return cmd_infer(common, observation, normalizer);
        if (*abc_cmd) return cmd_abc(common, observation, normalizer, abc_sims, abc_fraction);
        if (*fisher_cmd) return cmd_fisher(common, theta);
        if (*analyze_cmd) return cmd_analyze(common, samples, truth);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kConfig;
    } catch (const FormatError& e) {
        std::cerr << "malformed input: " << e.what() << "\n";
        return kConfig;
    } catch (const SimulationFailure& e) {
        std::cerr << "simulation failure: " << e.what() << "\n";
        return kSimulation;
    } catch (const TrainingDivergence& e) {
        std::cerr << "training failed: " << e.what() << "\n";
        return kTraining;
    } catch (const LeakageError& e) {
        std::cerr << "training failed: " << e.what() << "\n";
        return kTraining;
    } catch (const NumericalFailure& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return kSingular;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kFailure;
    }
    return kFailure;
}
