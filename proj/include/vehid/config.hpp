#pragma once

// Versioned experiment configuration with a strict JSON schema. Every key is
// optional except schema_version; unknown keys and wrong types are errors.

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "vehid/errors.hpp"
#include "vehid/excitation_noise.hpp"
#include "vehid/inference.hpp"
#include "vehid/rng.hpp"
#include "vehid/simulator.hpp"

namespace vehid {

inline constexpr int kSchemaVersion = 1;

struct NoiseSettings {
    double mixture_bound = 0.05;   // fraction of nominal for mixture means and stds
    double meas_rel_std_rotational = 0.05;
    double meas_rel_std_accel = 0.10;
    double v0_min = 10.0;
    double v0_max = 11.0;
    /// Explicit mixture; drawn from the "noise-setup" stream when absent.
    std::optional<std::array<StiffnessMixture, 4>> mixture;

    friend bool operator==(const NoiseSettings&, const NoiseSettings&) = default;
};

struct FisherSettings {
    std::size_t n_sims = 2000;
    double fd_fraction = 0.01;   // of each prior width

    friend bool operator==(const FisherSettings&, const FisherSettings&) = default;
};

struct ExperimentConfig {
    int schema_version = kSchemaVersion;
    VehicleConstants vehicle;
    PriorBox prior = PriorBox::vehicle_default();
    ExcitationProfile excitation;
    NoiseSettings noise;
    double sample_rate = 200.0;
    double duration = 5.0;
    int substeps_per_sample = 5;
    TrainConfig training;
    FisherSettings fisher;
    std::uint64_t seed = 0;
    std::string output_dir = "out";

    [[nodiscard]] RngStream master() const { return {seed, 0}; }

    [[nodiscard]] SimConfig sim_config() const
    {
        SimConfig c;
        c.sample_rate = sample_rate;
        c.duration = duration;
        c.substeps_per_sample = substeps_per_sample;
        c.constants = vehicle;
        c.profile = excitation;
        c.profile.duration = duration;
        c.noise = make_noise_spec(master().named("noise-setup"), vehicle, noise.mixture_bound);
        if (noise.mixture) c.noise.stiffness = *noise.mixture;
        c.noise.meas_rel_std_rotational = noise.meas_rel_std_rotational;
        c.noise.meas_rel_std_accel = noise.meas_rel_std_accel;
        c.noise.v0_min = noise.v0_min;
        c.noise.v0_max = noise.v0_max;
        return c;
    }

    void validate() const
    {
        if (schema_version != kSchemaVersion) {
            throw ConfigError("unsupported schema_version " + std::to_string(schema_version));
        }
        if (prior.dim() != kParamCount) throw ConfigError("prior must have 6 bounds per side");
        if (!(noise.mixture_bound > 0.0 && noise.mixture_bound < 1.0)) {
            throw ConfigError("noise.mixture_bound must lie in (0, 1)");
        }
        if (fisher.n_sims < 100) throw ConfigError("fisher.n_sims must be at least 100");
        if (!(fisher.fd_fraction > 0.0 && fisher.fd_fraction < 0.5)) {
            throw ConfigError("fisher.fd_fraction must lie in (0, 0.5)");
        }
        try {
            prior.validate();
            training.validate();
            sim_config().validate();
        } catch (const InvalidParameter& e) {
            throw ConfigError(e.what());
        }
    }

    friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

using Json = nlohmann::ordered_json;

namespace detail {

/// Reads fields from one JSON object and rejects keys nobody asked for.
class StrictObject {
public:
    StrictObject(const Json& j, std::string path) : j_(j), path_(std::move(path))
    {
        if (!j_.is_object()) throw ConfigError(where() + " must be an object");
    }

    template <typename T>
    void read(const char* key, T& out)
    {
        seen_.insert(key);
        if (!j_.contains(key)) return;
        out = convert<T>(j_.at(key), path_ + "." + key);
    }

    [[nodiscard]] bool has(const char* key) const { return j_.contains(key); }

    const Json& child(const char* key)
    {
        seen_.insert(key);
        return j_.at(key);
    }

    void finish() const
    {
        for (const auto& item : j_.items()) {
            if (!seen_.count(item.key())) throw ConfigError("unknown key " + path_ + "." + item.key());
        }
    }

    template <typename T>
    static T convert(const Json& v, const std::string& at)
    {
        if constexpr (std::is_same_v<T, bool>) {
            if (!v.is_boolean()) throw ConfigError(at + " must be a boolean");
            return v.get<bool>();
        } else if constexpr (std::is_same_v<T, std::string>) {
            if (!v.is_string()) throw ConfigError(at + " must be a string");
            return v.get<std::string>();
        } else if constexpr (std::is_unsigned_v<T>) {
            if (!v.is_number_unsigned()) throw ConfigError(at + " must be a non-negative integer");
            return v.get<T>();
        } else if constexpr (std::is_integral_v<T>) {
            if (!v.is_number_integer()) throw ConfigError(at + " must be an integer");
            return v.get<T>();
        } else if constexpr (std::is_floating_point_v<T>) {
            if (!v.is_number()) throw ConfigError(at + " must be a number");
            return v.get<T>();
        } else {
            if (!v.is_array()) throw ConfigError(at + " must be an array");
            T out;
            for (std::size_t i = 0; i < v.size(); ++i) {
                out.push_back(convert<typename T::value_type>(v[i], at + "[" + std::to_string(i) + "]"));
            }
            return out;
        }
    }

private:
    [[nodiscard]] std::string where() const { return path_.empty() ? "config" : path_; }

    const Json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

inline const char* kStiffnessKeys[4] = {"c_kappa_front", "c_kappa_rear", "c_alpha_front", "c_alpha_rear"};

}  // namespace detail

inline Json to_json(const ExperimentConfig& c)
{
    Json j;
    j["schema_version"] = c.schema_version;
    j["seed"] = c.seed;
    j["output_dir"] = c.output_dir;
    const VehicleConstants& v = c.vehicle;
    j["vehicle"] = {{"mass", v.mass},
                    {"wheelbase", v.wheelbase},
                    {"gravity", v.gravity},
                    {"free_radius", v.free_radius},
                    {"vertical_stiffness", v.vertical_stiffness},
                    {"wheel_inertia", v.wheel_inertia},
                    {"friction", v.friction},
                    {"lateral_stiffness", v.lateral_stiffness},
                    {"c_kappa_nom_front", v.c_kappa_nom_front},
                    {"c_kappa_nom_rear", v.c_kappa_nom_rear},
                    {"c_alpha_nom_front", v.c_alpha_nom_front},
                    {"c_alpha_nom_rear", v.c_alpha_nom_rear}};
    j["prior"] = {{"lower", c.prior.lower}, {"upper", c.prior.upper}};
    const ExcitationProfile& e = c.excitation;
    j["excitation"] = {{"steer_amplitude", e.steer_amplitude},
                       {"steer_period", e.steer_period},
                       {"torque_amplitude", e.torque_amplitude},
                       {"torque_period", e.torque_period},
                       {"brake_front_share", e.brake_front_share}};
    const NoiseSettings& n = c.noise;
    j["noise"] = {{"mixture_bound", n.mixture_bound},
                  {"meas_rel_std_rotational", n.meas_rel_std_rotational},
                  {"meas_rel_std_accel", n.meas_rel_std_accel},
                  {"v0_min", n.v0_min},
                  {"v0_max", n.v0_max}};
    if (n.mixture) {
        Json mix;
        for (std::size_t ch = 0; ch < 4; ++ch) {
            Json comps = Json::array();
            for (const auto& comp : (*n.mixture)[ch]) comps.push_back({{"mean", comp.mean}, {"std", comp.std}});
            mix[detail::kStiffnessKeys[ch]] = comps;
        }
        j["noise"]["mixture"] = mix;
    }
    j["simulation"] = {{"sample_rate", c.sample_rate},
                       {"duration", c.duration},
                       {"substeps_per_sample", c.substeps_per_sample}};
    const TrainConfig& t = c.training;
    j["training"] = {{"rounds", t.rounds},
                     {"sims_per_round", t.sims_per_round},
                     {"atoms", t.atoms},
                     {"batch_size", t.batch_size},
                     {"epochs_per_round", t.epochs_per_round},
                     {"learning_rate", t.learning_rate},
                     {"validation_fraction", t.validation_fraction},
                     {"patience", t.patience},
                     {"hidden", t.hidden},
                     {"components", t.components},
                     {"pilot_sims", t.pilot_sims},
                     {"posterior_samples", t.posterior_samples},
                     {"prior_likelihood_term", t.prior_likelihood_term},
                     {"weight_averaging", t.weight_averaging}};
    j["fisher"] = {{"n_sims", c.fisher.n_sims}, {"fd_fraction", c.fisher.fd_fraction}};
    return j;
}

inline ExperimentConfig from_json(const Json& j)
{
    ExperimentConfig c;
    detail::StrictObject root(j, "");
    if (!j.contains("schema_version")) throw ConfigError("missing schema_version");
    root.read("schema_version", c.schema_version);
    if (c.schema_version != kSchemaVersion) {
        throw ConfigError("unsupported schema_version " + std::to_string(c.schema_version));
    }
    root.read("seed", c.seed);
    root.read("output_dir", c.output_dir);

    if (root.has("vehicle")) {
        detail::StrictObject o(root.child("vehicle"), "vehicle");
        VehicleConstants& v = c.vehicle;
        o.read("mass", v.mass);
        o.read("wheelbase", v.wheelbase);
        o.read("gravity", v.gravity);
        o.read("free_radius", v.free_radius);
        o.read("vertical_stiffness", v.vertical_stiffness);
        o.read("wheel_inertia", v.wheel_inertia);
        o.read("friction", v.friction);
        o.read("lateral_stiffness", v.lateral_stiffness);
        o.read("c_kappa_nom_front", v.c_kappa_nom_front);
        o.read("c_kappa_nom_rear", v.c_kappa_nom_rear);
        o.read("c_alpha_nom_front", v.c_alpha_nom_front);
        o.read("c_alpha_nom_rear", v.c_alpha_nom_rear);
        o.finish();
    }
    if (root.has("prior")) {
        detail::StrictObject o(root.child("prior"), "prior");
        o.read("lower", c.prior.lower);
        o.read("upper", c.prior.upper);
        o.finish();
    }
    if (root.has("excitation")) {
        detail::StrictObject o(root.child("excitation"), "excitation");
        ExcitationProfile& e = c.excitation;
        o.read("steer_amplitude", e.steer_amplitude);
        o.read("steer_period", e.steer_period);
        o.read("torque_amplitude", e.torque_amplitude);
        o.read("torque_period", e.torque_period);
        o.read("brake_front_share", e.brake_front_share);
        o.finish();
    }
    if (root.has("noise")) {
        detail::StrictObject o(root.child("noise"), "noise");
        NoiseSettings& n = c.noise;
        o.read("mixture_bound", n.mixture_bound);
        o.read("meas_rel_std_rotational", n.meas_rel_std_rotational);
        o.read("meas_rel_std_accel", n.meas_rel_std_accel);
        o.read("v0_min", n.v0_min);
        o.read("v0_max", n.v0_max);
        if (o.has("mixture")) {
            detail::StrictObject mix(o.child("mixture"), "noise.mixture");
            std::array<StiffnessMixture, 4> m{};
            for (std::size_t ch = 0; ch < 4; ++ch) {
                const std::string at = std::string("noise.mixture.") + detail::kStiffnessKeys[ch];
                if (!mix.has(detail::kStiffnessKeys[ch])) throw ConfigError("missing " + at);
                const Json& comps = mix.child(detail::kStiffnessKeys[ch]);
                if (!comps.is_array() || comps.size() != kMixtureComponents) {
                    throw ConfigError(at + " must list exactly 10 components");
                }
                for (std::size_t k = 0; k < kMixtureComponents; ++k) {
                    detail::StrictObject comp(comps[k], at + "[" + std::to_string(k) + "]");
                    comp.read("mean", m[ch][k].mean);
                    comp.read("std", m[ch][k].std);
                    comp.finish();
                }
            }
            mix.finish();
            n.mixture = m;
        }
        o.finish();
    }
    if (root.has("simulation")) {
        detail::StrictObject o(root.child("simulation"), "simulation");
        o.read("sample_rate", c.sample_rate);
        o.read("duration", c.duration);
        o.read("substeps_per_sample", c.substeps_per_sample);
        o.finish();
    }
    c.excitation.duration = c.duration;
    if (root.has("training")) {
        detail::StrictObject o(root.child("training"), "training");
        TrainConfig& t = c.training;
        o.read("rounds", t.rounds);
        o.read("sims_per_round", t.sims_per_round);
        o.read("atoms", t.atoms);
        o.read("batch_size", t.batch_size);
        o.read("epochs_per_round", t.epochs_per_round);
        o.read("learning_rate", t.learning_rate);
        o.read("validation_fraction", t.validation_fraction);
        o.read("patience", t.patience);
        o.read("hidden", t.hidden);
        o.read("components", t.components);
        o.read("pilot_sims", t.pilot_sims);
        o.read("posterior_samples", t.posterior_samples);
        o.read("prior_likelihood_term", t.prior_likelihood_term);
        o.read("weight_averaging", t.weight_averaging);
        o.finish();
    }
    if (root.has("fisher")) {
        detail::StrictObject o(root.child("fisher"), "fisher");
        o.read("n_sims", c.fisher.n_sims);
        o.read("fd_fraction", c.fisher.fd_fraction);
        o.finish();
    }
    root.finish();
    c.validate();
    return c;
}

inline ExperimentConfig parse_config(const std::string& text)
{
    Json j;
    try {
        j = Json::parse(text);
    } catch (const Json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    return from_json(j);
}

inline std::string dump_config(const ExperimentConfig& c) { return to_json(c).dump(2) + "\n"; }

inline ExperimentConfig load_config(const std::filesystem::path& path)
{
    std::ifstream f(path, std::ios::binary);
    if (!f) throw ConfigError("cannot read config " + path.string());
    std::ostringstream s;
    s << f.rdbuf();
    return parse_config(s.str());
}

/// Stable 64-bit fingerprint of the canonical serialization. The output
/// directory is left out, so moving a run does not change its identity.
inline std::uint64_t config_hash(ExperimentConfig c)
{
    c.output_dir.clear();
    return detail::fnv1a(dump_config(c));
}

}  // namespace vehid
