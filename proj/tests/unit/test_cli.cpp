#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "shelab/coefficients.hpp"
#include "shelab/config.hpp"
#include "shelab/errors.hpp"
#include "shelab/experiments.hpp"
#include "shelab/io.hpp"
#include "shelab/noise.hpp"

using namespace shelab;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const auto p = fs::temp_directory_path() / ("shelab_test_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

int run_cli(const std::string& args) {
    const std::string cmd = std::string(SHELAB_CLI) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WEXITSTATUS(status);
}

}  // namespace

TEST(ConfigFile, ParsesCommentsAndLists) {
    const auto f = ConfigFile::parse("# header\nexperiment = holder  # trailing\n\nlist = 1, 2,3\nflag = true\nname = a b\n");
    EXPECT_EQ(f.get_string("experiment", ""), "holder");
    EXPECT_EQ(f.get_ints("list", {}), (std::vector<int>{1, 2, 3}));
    EXPECT_TRUE(f.get_bool("flag", false));
    EXPECT_EQ(f.get_string("name", ""), "a b");
    EXPECT_EQ(f.get_double("missing", 2.5), 2.5);
    EXPECT_NO_THROW(f.require_all_used());
}

TEST(ConfigFile, RejectsMalformedInput) {
    EXPECT_THROW(ConfigFile::parse("a = 1\na = 2\n"), ConfigError);
    EXPECT_THROW(ConfigFile::parse("no equals sign\n"), ConfigError);
    EXPECT_THROW(ConfigFile::parse("bad key! = 1\n"), ConfigError);
    const auto f = ConfigFile::parse("x = abc\ny = 1.5\nz = maybe\n");
    EXPECT_THROW(f.get_double("x", 0), ConfigError);
    EXPECT_THROW(f.get_int("y", 0), ConfigError);
    EXPECT_THROW(f.get_bool("z", false), ConfigError);
    EXPECT_THROW(ConfigFile::load("/nonexistent/she.conf"), ConfigError);
}

TEST(ConfigFile, UnusedKeysAreReported) {
    const auto f = ConfigFile::parse("used = 1\ntypo.key = 2\n");
    f.get_int("used", 0);
    try {
        f.require_all_used();
        FAIL();
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("typo.key"), std::string::npos);
    }
}

TEST(ExperimentConfig, SeedsAndOutput) {
    unsetenv("OUTPUT_DIR");
    auto cfg = make_experiment_config(ConfigFile::parse("experiment = moments\nseeds.base = 10\nseeds.count = 3\n"));
    EXPECT_EQ(cfg.experiment, Experiment::moments);
    EXPECT_EQ(cfg.seeds, (std::vector<std::uint64_t>{10, 11, 12}));
    EXPECT_EQ(cfg.output_dir, fs::path("she-lab-out"));
    EXPECT_EQ(cfg.lattice.n_space(), 401u);

    cfg = make_experiment_config(ConfigFile::parse("seeds.list = 5, 9\noutput.dir = a\n"), Experiment::holder);
    EXPECT_EQ(cfg.seeds, (std::vector<std::uint64_t>{5, 9}));
    EXPECT_EQ(cfg.output_dir, fs::path("a"));

    setenv("OUTPUT_DIR", "from-env", 1);
    cfg = make_experiment_config(ConfigFile::parse("output.dir = a\n"), Experiment::holder);
    EXPECT_EQ(cfg.output_dir, fs::path("from-env"));
    cfg = make_experiment_config(ConfigFile::parse("output.dir = a\n"), Experiment::holder, 4, fs::path("cli"));
    EXPECT_EQ(cfg.output_dir, fs::path("cli"));
    EXPECT_EQ(cfg.seeds.size(), 4u);
    unsetenv("OUTPUT_DIR");

    EXPECT_THROW(make_experiment_config(ConfigFile::parse("experiment = moments\n"), Experiment::holder), ConfigError);
    EXPECT_THROW(make_experiment_config(ConfigFile::parse("seeds.count = 2\n")), ConfigError);
    EXPECT_THROW(make_experiment_config(ConfigFile::parse("seeds.count = 0\n"), Experiment::holder), ConfigError);
    EXPECT_THROW(make_experiment_config(ConfigFile::parse("experiment = nope\n")), ConfigError);
    EXPECT_THROW(make_experiment_config(ConfigFile::parse("lattice.dt = 0.01\n"), Experiment::holder),
                 ConfigError);
}

TEST(ExperimentConfig, InitialData) {
    const auto lat = Lattice::build(2, 0.1, 0.005, 1);
    EXPECT_EQ(resolve_initial("zero", lat)[7], 0.0);
    EXPECT_EQ(resolve_initial("const:1.5", lat)[7], 1.5);
    EXPECT_NEAR(resolve_initial("gauss:2", lat)[15], std::exp(-2 * 0.25), 1e-12);
    EXPECT_NEAR(resolve_initial("delta", lat)[20], 10.0, 1e-9);
    EXPECT_THROW(resolve_initial("spike", lat), ConfigError);
}

TEST(TrajectoryIo, BinaryRoundTripAndCsv) {
    const auto dir = scratch("io");
    const auto lat = Lattice::build(1, 0.25, 0.02, 0.1);
    const NoiseSheet noise(lat, 4);
    const auto traj = simulate({lat, 1e9, 2, false, {}}, Field::constant(lat, 1.0), linear_coefficient(1.0),
                               zero_coefficient(), noise, "const:1");
    write_trajectory_binary(traj, dir / "t.bin");
    const auto back = read_trajectory_binary(dir / "t.bin");
    EXPECT_EQ(back.times, traj.times);
    EXPECT_TRUE(back.lattice() == lat);
    EXPECT_EQ(back.provenance.seed, 4u);
    EXPECT_EQ(back.provenance.sigma, "linear:1");
    for (std::size_t k = 0; k < traj.fields.size(); ++k) {
        EXPECT_TRUE(std::equal(back.fields[k].values().begin(), back.fields[k].values().end(),
                               traj.fields[k].values().begin()));
    }
    write_trajectory_csv(traj, dir / "t.csv");
    std::ifstream in(dir / "t.csv");
    std::string line;
    std::getline(in, line);
    EXPECT_EQ(line, "t,x,u");
    std::size_t rows = 0;
    while (std::getline(in, line)) ++rows;
    EXPECT_EQ(rows, traj.times.size() * lat.n_space());
}

TEST(Reports, DeterministicAndComplete) {
    const auto text = "experiment = consistency\nlattice.L = 10\nlattice.T = 0.5\nconsistency.dxs = 0.2, 0.1, 0.05\n";
    const auto cfg = make_experiment_config(ConfigFile::parse(text));
    const auto a = run_experiment(cfg);
    const auto b = run_experiment(make_experiment_config(ConfigFile::parse(text)));
    EXPECT_EQ(report_text(a), report_text(b));
    const auto& doc = a.document;
    for (const char* key : {"schema_version", "scheme_version", "rng", "config", "parameters", "per_seed",
                            "aggregates", "verdicts", "series"}) {
        EXPECT_TRUE(doc.contains(key)) << key;
    }
    EXPECT_EQ(doc["config"]["consistency.dxs"], "0.2, 0.1, 0.05");
    for (const auto& v : a.verdicts) EXPECT_EQ(v.criterion, "AC-8");
    EXPECT_TRUE(a.all_passed());

    const auto dir = scratch("report");
    const auto path = write_report(a, dir);
    EXPECT_EQ(slurp(path), report_text(a));
    EXPECT_TRUE(fs::exists(dir / "consistency.sup_error.csv"));
    EXPECT_TRUE(fs::exists(dir / "consistency.timing.json"));
    const auto svgs = plot_report(path);
    ASSERT_EQ(svgs.size(), 1u);
    EXPECT_NE(slurp(svgs[0]).find("<polyline"), std::string::npos);
}

TEST(Reports, ComparisonWithEqualDriftsHasNoViolation) {
    const auto cfg = make_experiment_config(ConfigFile::parse(
        "experiment = comparison\nlattice.L = 2\nlattice.dx = 0.1\nlattice.dt = 0.005\nlattice.T = 0.2\n"
        "seeds.count = 3\ncomparison.drift_low = const:1\ncomparison.drift_high = const:1\n"
        "comparison.control_seeds = 0\ncomparison.refine = false\n"));
    const auto r = run_comparison(cfg);
    for (const auto& label : {"linear:1", "power_sigma:0.8"}) {
        EXPECT_EQ(r.document["aggregates"][label]["worst_violation"], 0.0);
    }
    EXPECT_TRUE(r.all_passed());
}

TEST(Reports, MisorderedConfigFailsBeforeSimulation) {
    const auto cfg = make_experiment_config(
        ConfigFile::parse("experiment = comparison\ncomparison.drift_low = const:1\ncomparison.drift_high = zero\n"));
    EXPECT_THROW(run_comparison(cfg), ConfigError);
    const auto typo = make_experiment_config(ConfigFile::parse("experiment = moments\nmoments.lamda = 1\n"));
    EXPECT_THROW(run_moments(typo), ConfigError);
}

TEST(Reports, ZeroSolutionHasZeroMoments) {
    const auto cfg = make_experiment_config(ConfigFile::parse(
        "experiment = moments\nlattice.L = 2\nlattice.dx = 0.1\nlattice.dt = 0.005\nlattice.T = 0.2\n"
        "seeds.count = 2\nmoments.sigma = power_sigma:0.8\nmoments.drift = power_drift:0.9\nmoments.initial = zero\n"));
    const auto r = run_moments(cfg);
    EXPECT_EQ(r.document["aggregates"]["estimate_base"], 0.0);
    EXPECT_EQ(r.document["aggregates"]["estimate_refined"], 0.0);
}

TEST(Cli, ExitCodes) {
    const auto dir = scratch("cli");
    auto write = [&](const std::string& name, const std::string& body) {
        std::ofstream(dir / name) << body;
        return (dir / name).string();
    };
    const auto pass = write("pass.conf", "lattice.T = 0.5\nconsistency.dxs = 0.2, 0.1, 0.05\n");
    const auto fail = write("fail.conf", "lattice.T = 0.5\nconsistency.dxs = 0.2, 0.1, 0.05\nconsistency.min_order = 3\n");
    const auto bad = write("bad.conf", "lattice.T = 0.5\nconsistency.dx = 0.2\n");
    const auto blow = write("blow.conf",
                            "lattice.L = 2\nlattice.dx = 0.1\nlattice.dt = 0.005\nseeds.count = 1\n"
                            "moments.drift = linear:40\nmoments.initial = const:1\n");
    const auto out = (dir / "out").string();
    EXPECT_EQ(run_cli("consistency --config " + pass + " --out " + out), 0);
    EXPECT_TRUE(fs::exists(dir / "out" / "consistency.json"));
    EXPECT_EQ(run_cli("plot --report " + (dir / "out" / "consistency.json").string()), 0);
    EXPECT_EQ(run_cli("consistency --config " + fail + " --out " + out), 2);
    EXPECT_EQ(run_cli("consistency --config " + bad + " --out " + out), 3);
    EXPECT_EQ(run_cli("holder --config " + pass + " --out " + out), 3);
    EXPECT_EQ(run_cli("moments --config " + blow + " --out " + out), 4);
    EXPECT_EQ(run_cli("nonsense"), 3);
}
