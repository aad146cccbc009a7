#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "shelab/config.hpp"

namespace shelab {

inline constexpr int kReportSchemaVersion = 1;

struct Verdict {
    /// Acceptance criterion id, "AC-1" .. "AC-9".
    std::string criterion;
    std::string check;
    bool passed;
    std::string detail;
};

/// A small table exported as CSV next to the report; the plot subcommand draws y against x.
struct Series {
    std::string name;
    std::vector<std::string> columns;
    std::vector<std::vector<double>> rows;
    std::string x;
    std::vector<std::string> y;
    bool log_x = false;
    bool log_y = false;
};

struct Report {
    Experiment experiment;
    /// Complete report document; deterministic given the config.
    nlohmann::ordered_json document;
    std::vector<Verdict> verdicts;
    std::vector<Series> series;
    /// Kept out of the document so that reports stay byte-stable.
    double wall_seconds = 0.0;

    bool all_passed() const;
};

Report run_experiment(const ExperimentConfig& cfg);

Report run_comparison(const ExperimentConfig& cfg);
Report run_uniqueness_ladder(const ExperimentConfig& cfg);
Report run_moments(const ExperimentConfig& cfg);
Report run_holder(const ExperimentConfig& cfg);
Report run_girsanov(const ExperimentConfig& cfg);
Report run_kernel_audit(const ExperimentConfig& cfg);
Report run_consistency(const ExperimentConfig& cfg);

/// The exact bytes written as <experiment>.json.
std::string report_text(const Report& report);

/// Writes <experiment>.json, one <experiment>.<series>.csv per series and <experiment>.timing.json.
/// Returns the report path.
std::filesystem::path write_report(const Report& report, const std::filesystem::path& dir);

/// Renders every series listed in a written report as <experiment>.<series>.svg beside it.
std::vector<std::filesystem::path> plot_report(const std::filesystem::path& report_path);

}  // namespace shelab
