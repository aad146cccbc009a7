// she-lab: command-line driver for the stochastic heat equation experiments.

#include <cstdio>
#include <iostream>
#include <optional>

#include <CLI11.hpp>
#include <fmt/core.h>

#include "shelab/coefficients.hpp"
#include "shelab/config.hpp"
#include "shelab/errors.hpp"
#include "shelab/experiments.hpp"
#include "shelab/io.hpp"
#include "shelab/noise.hpp"
#include "shelab/solver.hpp"

namespace {

constexpr int kExitPass = 0;
constexpr int kExitVerdict = 2;
constexpr int kExitConfig = 3;
constexpr int kExitNumerical = 4;

int run_one(shelab::Experiment experiment, const std::string& config_path, std::optional<std::size_t> seeds,
            std::optional<std::string> out) {
    auto cfg = shelab::make_experiment_config(shelab::ConfigFile::load(config_path), experiment, seeds,
                                              out ? std::optional<std::filesystem::path>(*out) : std::nullopt);
    const auto report = shelab::run_experiment(cfg);
    const auto path = shelab::write_report(report, cfg.output_dir);
    for (const auto& v : report.verdicts) {
        fmt::print("{} {:<5} {}: {}\n", v.passed ? "PASS" : "FAIL", v.criterion, v.check, v.detail);
    }
    fmt::print("report: {} ({:.1f} s)\n", path.string(), report.wall_seconds);
    return report.all_passed() ? kExitPass : kExitVerdict;
}

// Single trajectory export, keys under simulate.*.
int run_simulate(const std::string& config_path, std::optional<std::string> out) {
    auto file = shelab::ConfigFile::load(config_path);
    const auto lattice = shelab::lattice_from(file);
    const auto sigma = shelab::resolve_coefficient(file.get_string("simulate.sigma", "const:1"));
    const auto drift = shelab::resolve_coefficient(file.get_string("simulate.drift", "zero"));
    const auto init = file.get_string("simulate.initial", "zero");
    const auto seed = file.get_int("simulate.seed", 1);
    const auto every = file.get_int("simulate.record_every", 10);
    const auto format = file.get_string("simulate.format", "csv");
    std::filesystem::path dir = file.get_string("output.dir", "she-lab-out");
    if (const char* env = std::getenv("OUTPUT_DIR"); env && *env) dir = env;
    if (out) dir = *out;
    file.get_string("experiment", "");
    if (seed < 0 || every < 1) throw shelab::ConfigError("simulate.seed must be >= 0 and record_every >= 1");
    if (format != "csv" && format != "binary") throw shelab::ConfigError("simulate.format is csv or binary");
    file.require_all_used();

    shelab::SolverConfig sc{lattice, 1e9, std::size_t(every), false, {}};
    shelab::NoiseStream noise(lattice, std::uint64_t(seed));
    const auto traj = shelab::simulate(sc, shelab::resolve_initial(init, lattice), sigma, drift, noise, init);
    std::filesystem::create_directories(dir);
    const auto path = dir / fmt::format("trajectory.{}", format == "csv" ? "csv" : "bin");
    if (format == "csv") {
        shelab::write_trajectory_csv(traj, path);
    } else {
        shelab::write_trajectory_binary(traj, path);
    }
    fmt::print("trajectory: {}\n", path.string());
    return kExitPass;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Simulation and verification lab for the stochastic heat equation"};
    app.require_subcommand(1);

    std::string config;
    std::optional<std::size_t> seeds;
    std::optional<std::string> out;
    std::string report_path;

    std::vector<std::pair<CLI::App*, shelab::Experiment>> experiments;
    for (auto e : shelab::all_experiments()) {
        auto* sub = app.add_subcommand(std::string(shelab::to_string(e)), fmt::format("run the {} experiment", shelab::to_string(e)));
        sub->add_option("--config", config, "experiment config file")->required()->check(CLI::ExistingFile);
        sub->add_option("--seeds", seeds, "override the seed count (seeds base..base+N-1)")->check(CLI::PositiveNumber);
        sub->add_option("--out", out, "output directory");
        experiments.emplace_back(sub, e);
    }
    auto* plot = app.add_subcommand("plot", "render the CSV series of a report as SVG");
    plot->add_option("--report", report_path, "report JSON")->required();
    auto* sim = app.add_subcommand("simulate", "run one trajectory and export it");
    sim->add_option("--config", config, "config file with lattice.* and simulate.* keys")->required()->check(CLI::ExistingFile);
    sim->add_option("--out", out, "output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : kExitConfig;
    }

    try {
        if (plot->parsed()) {
            for (const auto& p : shelab::plot_report(report_path)) fmt::print("plot: {}\n", p.string());
            return kExitPass;
        }
        if (sim->parsed()) return run_simulate(config, out);
        for (const auto& [sub, e] : experiments) {
            if (sub->parsed()) return run_one(e, config, seeds, out);
        }
    } catch (const shelab::InputError& e) {
        fmt::print(stderr, "configuration error: {}\n", e.what());
        return kExitConfig;
    } catch (const shelab::NumericalAbort& e) {
        fmt::print(stderr, "numerical abort: {}\n", e.what());
        return kExitNumerical;
    } catch (const shelab::Error& e) {
        fmt::print(stderr, "error: {}\n", e.what());
        return kExitConfig;
    }
    return kExitConfig;
}
