#include "catch_amalgamated.hpp"

#include <filesystem>
#include <fstream>

#include "vehid/config.hpp"
#include "vehid/io.hpp"

using namespace vehid;
using Catch::Matchers::ContainsSubstring;

namespace {

std::filesystem::path scratch_dir(const std::string& name)
{
    const auto dir = std::filesystem::temp_directory_path() / ("vehid_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

void write(const std::filesystem::path& p, const std::string& s) { std::ofstream(p, std::ios::binary) << s; }

}  // namespace

TEST_CASE("default configuration round-trips")
{
    ExperimentConfig c;
    c.seed = 17;
    CHECK_NOTHROW(c.validate());
    const std::string text = dump_config(c);
    const ExperimentConfig back = parse_config(text);
    CHECK(back == c);
    CHECK(dump_config(back) == text);
    CHECK(config_hash(back) == config_hash(c));
    c.output_dir = "elsewhere";
    CHECK(config_hash(back) == config_hash(c));
    c.seed = 18;
    CHECK(config_hash(back) != config_hash(c));
}

TEST_CASE("explicit mixture round-trips")
{
    ExperimentConfig c;
    std::array<StiffnessMixture, 4> m{};
    for (std::size_t ch = 0; ch < 4; ++ch) {
        for (std::size_t k = 0; k < kMixtureComponents; ++k) m[ch][k] = {0.001 * k, 0.002 + 0.0001 * ch};
    }
    c.noise.mixture = m;
    const ExperimentConfig back = parse_config(dump_config(c));
    CHECK(back == c);
    CHECK(back.sim_config().noise.stiffness == m);
}

TEST_CASE("partial documents fill in defaults")
{
    const ExperimentConfig c = parse_config(R"({"schema_version": 1, "seed": 5, "training": {"rounds": 2}})");
    CHECK(c.seed == 5);
    CHECK(c.training.rounds == 2);
    CHECK(c.training.sims_per_round == 5000);
    CHECK(c.excitation.torque_amplitude == 250.0);
    const SimConfig s = c.sim_config();
    CHECK(s.sample_count() == 1000);
    CHECK(s.profile.duration == 5.0);
}

TEST_CASE("noise setup is seeded by the experiment")
{
    ExperimentConfig a, b;
    a.seed = b.seed = 3;
    CHECK(a.sim_config().noise == b.sim_config().noise);
    b.seed = 4;
    CHECK_FALSE(a.sim_config().noise == b.sim_config().noise);
}

TEST_CASE("malformed configurations are rejected")
{
    CHECK_THROWS_AS(parse_config("{"), ConfigError);
    CHECK_THROWS_AS(parse_config(R"({"seed": 1})"), ConfigError);
    CHECK_THROWS_AS(parse_config(R"({"schema_version": 2})"), ConfigError);
    CHECK_THROWS_AS(parse_config(R"({"schema_version": 1, "colour": "red"})"), ConfigError);
    CHECK_THROWS_AS(parse_config(R"({"schema_version": 1, "vehicle": {"mas": 1500}})"), ConfigError);
    CHECK_THROWS_AS(parse_config(R"({"schema_version": 1, "vehicle": {"mass": "heavy"}})"), ConfigError);
    CHECK_THROWS_AS(parse_config(R"({"schema_version": 1, "training": {"rounds": 0}})"), ConfigError);
    CHECK_THROWS_AS(parse_config(R"({"schema_version": 1, "prior": {"lower": [0], "upper": [1]}})"), ConfigError);
    CHECK_THROWS_AS(parse_config(R"({"schema_version": 1, "noise": {"mixture": {"c_kappa_front": []}}})"),
                    ConfigError);
    try {
        parse_config(R"({"schema_version": 1, "excitation": {"torque_amplitud": 200}})");
        FAIL("unknown key accepted");
    } catch (const ConfigError& e) {
        CHECK_THAT(std::string(e.what()), ContainsSubstring("torque_amplitud"));
    }
    CHECK_THROWS_AS(load_config("/nonexistent/vehid.json"), ConfigError);
}

TEST_CASE("trajectory files round-trip")
{
    const auto dir = scratch_dir("traj");
    const SimConfig cfg;
    const TrajectoryRecord rec = simulate(IdentifiedParams{}, RngStream{1, 2}, cfg);
    REQUIRE(rec.valid);
    TrajectoryMeta meta;
    meta.theta = rec.theta_used;
    meta.seed = rec.seed;
    meta.config_hash = 0xABCDEF0123456789ULL;
    meta.valid = true;
    write_trajectory(rec, meta, dir / "obs");

    const TrajectoryRecord back = read_trajectory(dir / "obs.csv");
    CHECK(back.t == rec.t);
    CHECK(back.channels == rec.channels);
    const TrajectoryMeta m = read_trajectory_meta(dir / "obs.json");
    CHECK(m.theta == meta.theta);
    CHECK(m.seed == meta.seed);
    CHECK(m.config_hash == meta.config_hash);
    CHECK(m.valid);

    write(dir / "bad.csv", "t,a_x\n0,1\n");
    CHECK_THROWS_AS(read_trajectory(dir / "bad.csv"), FormatError);
    write(dir / "bad2.csv", "t,a_x,a_y,r,w_f,w_r\n0,1,2,3,4,x\n0,1,2,3,4,5\n");
    CHECK_THROWS_AS(read_trajectory(dir / "bad2.csv"), FormatError);
    std::filesystem::remove_all(dir);
}

TEST_CASE("samples, normalizer and model round-trip")
{
    const auto dir = scratch_dir("artifacts");
    Eigen::MatrixXd s(3, 2);
    s << 1.0 / 3.0, -2.5, 1e-17, 4.0, 7.0, 0.1;
    write(dir / "s.csv", samples_csv(s, {"a", "b"}));
    const NamedSamples ns = read_samples(dir / "s.csv");
    CHECK(ns.names == std::vector<std::string>{"a", "b"});
    CHECK(ns.samples == s);

    const SummaryLayout layout;
    Normalizer n{Eigen::VectorXd::LinSpaced(35, -1.0, 1.0), Eigen::VectorXd::Constant(35, 0.3), 1000};
    write(dir / "n.json", to_json(n, layout).dump(2));
    const Normalizer nb = read_normalizer(dir / "n.json", layout);
    CHECK(nb.mean == n.mean);
    CHECK(nb.std == n.std);
    CHECK(nb.pilot_count == 1000);
    SummaryLayout other;
    other.lags = {5};
    CHECK_THROWS_AS(read_normalizer(dir / "n.json", other), FormatError);

    MdnArchitecture arch;
    arch.hidden = 8;
    arch.components = 2;
    Engine eng = RngStream{1, 0}.engine();
    const MdnModel model(arch, eng);
    const PriorBox box = PriorBox::vehicle_default();
    write(dir / "m.json", to_json(model, box, normalizer_hash(n, layout)).dump());
    const LoadedModel lm = read_model(dir / "m.json");
    CHECK(lm.model.weights() == model.weights());
    CHECK(lm.model.architecture() == arch);
    CHECK(lm.box == box);
    CHECK(lm.normalizer_hash == normalizer_hash(n, layout));

    write(dir / "v.json", R"({"version": 99})");
    CHECK_THROWS_AS(read_model(dir / "v.json"), FormatError);
    write(dir / "junk.json", "not json");
    CHECK_THROWS_AS(read_model(dir / "junk.json"), FormatError);
    std::filesystem::remove_all(dir);
}

TEST_CASE("table layout")
{
    PosteriorTable t(1);
    t[0] = {"l_f", 1.5, 1.46, 0.03, 1.0, 1.5};
    const std::string csv = table_csv(t);
    CHECK(csv.rfind("parameter,real,mean,std,prior_lower,prior_upper\n", 0) == 0);
    CHECK_THAT(csv, ContainsSubstring("l_f,"));
    CHECK_THAT(table_text(t), ContainsSubstring("l_f"));
}

TEST_CASE("Fisher report serialization")
{
    FisherReport r;
    r.theta_star = Eigen::VectorXd::Zero(2);
    r.fd_steps = Eigen::VectorXd::Constant(2, 0.01);
    r.fisher = Eigen::MatrixXd::Identity(2, 2);
    r.fisher(1, 1) = 0.0;
    analyze_spectrum(r);
    const Json j = to_json(r, {"a", "b"});
    CHECK(j.at("condition_number") == "inf");
    CHECK(j.at("singular") == true);
}
