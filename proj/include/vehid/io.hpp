#pragma once

// On-disk formats: trajectory CSV with a JSON sidecar, sample matrices,
// the pilot normalizer, trained models, round reports and Fisher reports.

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "vehid/config.hpp"
#include "vehid/errors.hpp"
#include "vehid/inference.hpp"
#include "vehid/mdn.hpp"
#include "vehid/observability.hpp"
#include "vehid/posterior_analysis.hpp"
#include "vehid/simulator.hpp"
#include "vehid/summaries.hpp"

namespace vehid {

inline constexpr int kFileFormatVersion = 1;

/// Input file that exists but does not have the expected layout.
class FormatError : public Error {
public:
    using Error::Error;
};

namespace detail {

inline std::string read_file(const std::filesystem::path& path)
{
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot read " + path.string());
    std::ostringstream s;
    s << f.rdbuf();
    return s.str();
}

inline std::string full(double v)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::vector<std::string> split(const std::string& line, char sep)
{
    std::vector<std::string> out;
    std::string cell;
    std::istringstream s(line);
    while (std::getline(s, cell, sep)) out.push_back(cell);
    if (!line.empty() && line.back() == sep) out.emplace_back();
    return out;
}

inline double parse_number(const std::string& cell, const std::filesystem::path& path, std::size_t line)
{
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(cell, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used == 0 || used != cell.size() || !std::isfinite(v)) {
        throw FormatError(path.string() + ":" + std::to_string(line) + ": bad number '" + cell + "'");
    }
    return v;
}

/// Header plus rows of numbers; every row must match the header width.
struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;
};

inline Table read_csv(const std::filesystem::path& path)
{
    std::istringstream in(read_file(path));
    Table t;
    std::string line;
    if (!std::getline(in, line)) throw FormatError(path.string() + " is empty");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    t.header = split(line, ',');
    std::size_t n = 1;
    while (std::getline(in, line)) {
        ++n;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto cells = split(line, ',');
        if (cells.size() != t.header.size()) {
            throw FormatError(path.string() + ":" + std::to_string(n) + ": expected " +
                              std::to_string(t.header.size()) + " columns");
        }
        std::vector<double> row;
        row.reserve(cells.size());
        for (const auto& c : cells) row.push_back(parse_number(c, path, n));
        t.rows.push_back(std::move(row));
    }
    return t;
}

inline Json parse_json_file(const std::filesystem::path& path)
{
    try {
        return Json::parse(read_file(path));
    } catch (const Json::exception& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
}

inline Json vector_json(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

inline Eigen::VectorXd json_vector(const Json& j, const std::string& what)
{
    if (!j.is_array()) throw FormatError(what + " must be an array");
    Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) {
        if (!j[i].is_number()) throw FormatError(what + " must hold numbers");
        v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
    }
    return v;
}

inline void check_version(const Json& j, const std::string& what)
{
    if (!j.is_object() || !j.contains("version") || j["version"] != kFileFormatVersion) {
        throw FormatError(what + ": missing or unsupported version");
    }
}

}  // namespace detail

inline const std::vector<std::string>& param_names()
{
    static const std::vector<std::string> names(kParamNames.begin(), kParamNames.end());
    return names;
}

inline std::string hex64(std::uint64_t v)
{
    char buf[20];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

// --- trajectories -----------------------------------------------------------

inline std::string trajectory_csv(const TrajectoryRecord& rec)
{
    if (!rec.valid) throw InvalidParameter("refusing to write an invalid trajectory");
    std::string s = "t";
    for (auto c : kChannelNames) s += "," + std::string(c);
    s += '\n';
    for (std::size_t k = 0; k < rec.size(); ++k) {
        s += detail::full(rec.t[k]);
        for (const auto& ch : rec.channels) s += ',' + detail::full(ch[k]);
        s += '\n';
    }
    return s;
}

struct TrajectoryMeta {
    IdentifiedParams theta;
    RngStream seed;
    std::uint64_t config_hash = 0;
    bool valid = false;
    bool sampled_truth = false;
    std::string failure;
};

inline Json to_json(const TrajectoryMeta& m)
{
    Json theta;
    const auto a = m.theta.to_array();
    for (std::size_t i = 0; i < kParamCount; ++i) theta[std::string(kParamNames[i])] = a[i];
    return {{"version", kFileFormatVersion},
            {"theta", theta},
            {"theta_sampled_from_prior", m.sampled_truth},
            {"seed", {{"seed", m.seed.seed}, {"stream", m.seed.stream_id}}},
            {"config_hash", hex64(m.config_hash)},
            {"valid", m.valid},
            {"failure", m.failure}};
}

/// Writes <stem>.csv and <stem>.json.
inline void write_trajectory(const TrajectoryRecord& rec, const TrajectoryMeta& meta,
                             const std::filesystem::path& stem)
{
    if (rec.valid) detail::write_text(std::filesystem::path(stem).concat(".csv"), trajectory_csv(rec));
    detail::write_text(std::filesystem::path(stem).concat(".json"), to_json(meta).dump(2) + "\n");
}

/// Reads a trajectory CSV with the t,a_x,a_y,r,w_f,w_r header.
inline TrajectoryRecord read_trajectory(const std::filesystem::path& path)
{
    const detail::Table t = detail::read_csv(path);
    std::vector<std::string> expected{"t"};
    for (auto c : kChannelNames) expected.emplace_back(c);
    if (t.header != expected) throw FormatError(path.string() + ": header must be t,a_x,a_y,r,w_f,w_r");
    if (t.rows.size() < 2) throw FormatError(path.string() + ": too few rows");
    TrajectoryRecord rec;
    for (const auto& row : t.rows) {
        rec.t.push_back(row[0]);
        for (std::size_t c = 0; c < kChannelCount; ++c) rec.channels[c].push_back(row[c + 1]);
    }
    rec.valid = true;
    return rec;
}

inline TrajectoryMeta read_trajectory_meta(const std::filesystem::path& path)
{
    const Json j = detail::parse_json_file(path);
    detail::check_version(j, path.string());
    TrajectoryMeta m;
    try {
        std::array<double, kParamCount> a{};
        for (std::size_t i = 0; i < kParamCount; ++i) a[i] = j.at("theta").at(std::string(kParamNames[i])).get<double>();
        m.theta = IdentifiedParams::from_array(a);
        m.sampled_truth = j.at("theta_sampled_from_prior").get<bool>();
        m.seed = {j.at("seed").at("seed").get<std::uint64_t>(), j.at("seed").at("stream").get<std::uint64_t>()};
        m.config_hash = std::stoull(j.at("config_hash").get<std::string>(), nullptr, 16);
        m.valid = j.at("valid").get<bool>();
        m.failure = j.at("failure").get<std::string>();
    } catch (const std::exception& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
    return m;
}

// --- sample matrices --------------------------------------------------------

inline std::string samples_csv(const Eigen::MatrixXd& samples, const std::vector<std::string>& names)
{
    if (static_cast<std::size_t>(samples.cols()) != names.size()) throw InvalidParameter("one name per column");
    std::string s;
    for (std::size_t i = 0; i < names.size(); ++i) s += (i ? "," : "") + names[i];
    s += '\n';
    for (Eigen::Index r = 0; r < samples.rows(); ++r) {
        for (Eigen::Index c = 0; c < samples.cols(); ++c) s += (c ? "," : "") + detail::full(samples(r, c));
        s += '\n';
    }
    return s;
}

struct NamedSamples {
    std::vector<std::string> names;
    Eigen::MatrixXd samples;   // n x d
};

inline NamedSamples read_samples(const std::filesystem::path& path)
{
    const detail::Table t = detail::read_csv(path);
    NamedSamples out;
    out.names = t.header;
    out.samples.resize(static_cast<Eigen::Index>(t.rows.size()), static_cast<Eigen::Index>(t.header.size()));
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        for (std::size_t c = 0; c < t.header.size(); ++c) {
            out.samples(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = t.rows[r][c];
        }
    }
    return out;
}

// --- normalizer -------------------------------------------------------------

inline Json to_json(const Normalizer& n, const SummaryLayout& layout)
{
    return {{"version", kFileFormatVersion},
            {"layout", {{"lags", layout.lags}, {"labels", layout.labels()}}},
            {"pilot_count", n.pilot_count},
            {"mean", detail::vector_json(n.mean)},
            {"std", detail::vector_json(n.std)}};
}

inline std::uint64_t normalizer_hash(const Normalizer& n, const SummaryLayout& layout)
{
    return detail::fnv1a(to_json(n, layout).dump());
}

inline Normalizer read_normalizer(const std::filesystem::path& path, const SummaryLayout& layout)
{
    const Json j = detail::parse_json_file(path);
    detail::check_version(j, path.string());
    Normalizer n;
    try {
        if (j.at("layout").at("lags").get<std::vector<int>>() != layout.lags) {
            throw FormatError("summary layout differs from the configured one");
        }
        n.pilot_count = j.at("pilot_count").get<std::size_t>();
        n.mean = detail::json_vector(j.at("mean"), "mean");
        n.std = detail::json_vector(j.at("std"), "std");
    } catch (const Json::exception& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
    if (n.mean.size() != static_cast<Eigen::Index>(layout.size()) || n.std.size() != n.mean.size()) {
        throw FormatError(path.string() + ": normalizer length does not match the summary layout");
    }
    return n;
}

// --- model ------------------------------------------------------------------

inline Json to_json(const MdnModel& model, const PriorBox& box, std::uint64_t norm_hash)
{
    const MdnArchitecture& a = model.architecture();
    return {{"version", kFileFormatVersion},
            {"architecture",
             {{"input_dim", a.input_dim}, {"param_dim", a.param_dim}, {"hidden", a.hidden}, {"components", a.components}}},
            {"layer_sizes", {a.input_dim, a.hidden, a.hidden, a.output_dim()}},
            {"prior", {{"lower", box.lower}, {"upper", box.upper}}},
            {"normalizer_hash", hex64(norm_hash)},
            {"weights", detail::vector_json(model.weights())}};
}

struct LoadedModel {
    MdnModel model;
    PriorBox box;
    std::uint64_t normalizer_hash = 0;
};

inline LoadedModel read_model(const std::filesystem::path& path)
{
    const Json j = detail::parse_json_file(path);
    detail::check_version(j, path.string());
    LoadedModel out;
    try {
        MdnArchitecture a;
        const Json& aj = j.at("architecture");
        a.input_dim = aj.at("input_dim").get<int>();
        a.param_dim = aj.at("param_dim").get<int>();
        a.hidden = aj.at("hidden").get<int>();
        a.components = aj.at("components").get<int>();
        Eigen::VectorXd w = detail::json_vector(j.at("weights"), "weights");
        if (w.size() != a.weight_count()) throw FormatError("weight count does not match the architecture");
        out.model = MdnModel(a, std::move(w));
        out.box.lower = j.at("prior").at("lower").get<std::vector<double>>();
        out.box.upper = j.at("prior").at("upper").get<std::vector<double>>();
        out.normalizer_hash = std::stoull(j.at("normalizer_hash").get<std::string>(), nullptr, 16);
    } catch (const Json::exception& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
    return out;
}

// --- reports ----------------------------------------------------------------

inline Json to_json(const RoundReport& r)
{
    return {{"round", r.round},
            {"loss", r.loss == LossKind::kLikelihood ? "likelihood" : "atomic"},
            {"simulations", r.simulations},
            {"invalid_simulations", r.invalid_simulations},
            {"proposal_acceptance", r.proposal_acceptance},
            {"epochs_run", r.epochs_run},
            {"best_validation_loss", r.best_validation_loss},
            {"train_loss", r.train_loss},
            {"validation_loss", r.validation_loss}};
}

inline Json to_json(const std::vector<RoundReport>& rounds)
{
    Json list = Json::array();
    for (const auto& r : rounds) list.push_back(to_json(r));
    return {{"version", kFileFormatVersion}, {"rounds", list}};
}

inline Json to_json(const FisherReport& f, const std::vector<std::string>& names)
{
    Json matrix = Json::array();
    for (Eigen::Index i = 0; i < f.fisher.rows(); ++i) {
        Json row = Json::array();
        for (Eigen::Index k = 0; k < f.fisher.cols(); ++k) row.push_back(f.fisher(i, k));
        matrix.push_back(std::move(row));
    }
    Json theta;
    for (std::size_t i = 0; i < names.size(); ++i) theta[names[i]] = f.theta_star[static_cast<Eigen::Index>(i)];
    Json cond = std::isfinite(f.condition_number) ? Json(f.condition_number) : Json("inf");
    return {{"version", kFileFormatVersion},
            {"theta_star", theta},
            {"fd_steps", detail::vector_json(f.fd_steps)},
            {"sims_used", f.sims_used},
            {"fisher", matrix},
            {"eigenvalues", detail::vector_json(f.eigenvalues)},
            {"condition_number", cond},
            {"singular", f.singular},
            {"singular_tolerance", kSingularTolerance}};
}

inline std::string table_csv(const PosteriorTable& table)
{
    std::string s = "parameter,real,mean,std,prior_lower,prior_upper\n";
    for (const auto& r : table) {
        s += r.name + ',' + (r.truth ? detail::full(*r.truth) : std::string()) + ',' + detail::full(r.mean) + ',' +
             detail::full(r.std) + ',' + detail::full(r.prior_lower) + ',' + detail::full(r.prior_upper) + '\n';
    }
    return s;
}

/// Fixed-width text rendering with four decimals.
inline std::string table_text(const PosteriorTable& table)
{
    char buf[160];
    std::string s;
    std::snprintf(buf, sizeof buf, "%-8s %10s %10s %10s   %s\n", "param", "real", "mean", "std", "prior");
    s += buf;
    for (const auto& r : table) {
        char real[24] = "-";
        if (r.truth) std::snprintf(real, sizeof real, "%.4f", *r.truth);
        std::snprintf(buf, sizeof buf, "%-8s %10s %10.4f %10.4f   [%g, %g]\n", r.name.c_str(), real, r.mean, r.std,
                      r.prior_lower, r.prior_upper);
        s += buf;
    }
    return s;
}

}  // namespace vehid
