#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "shelab/lattice.hpp"

namespace shelab {

enum class Experiment { comparison, uniqueness_ladder, moments, holder, girsanov, kernel_audit, consistency };

std::string_view to_string(Experiment e);
/// ConfigError for unknown names.
Experiment parse_experiment(std::string_view name);
const std::vector<Experiment>& all_experiments();

/**
 * Flat `key.path = value` file. '#' starts a comment; blank lines are ignored;
 * lists are comma separated. Every key read through a getter is marked used so
 * that leftovers (typos) can be rejected before any numerics run.
 */
class ConfigFile {
public:
    static ConfigFile parse(std::string_view text, std::string origin = "<string>");
    static ConfigFile load(const std::filesystem::path& path);

    bool has(const std::string& key) const { return entries_.count(key) != 0; }
    void set(const std::string& key, std::string value) { entries_[key] = std::move(value); }
    void erase(const std::string& key) { entries_.erase(key); }

    std::string get_string(const std::string& key, const std::string& fallback) const;
    double get_double(const std::string& key, double fallback) const;
    long get_int(const std::string& key, long fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;
    std::vector<std::string> get_strings(const std::string& key, const std::vector<std::string>& fallback) const;
    std::vector<double> get_doubles(const std::string& key, const std::vector<double>& fallback) const;
    std::vector<int> get_ints(const std::string& key, const std::vector<int>& fallback) const;

    /// ConfigError listing keys never read.
    void require_all_used() const;

    const std::map<std::string, std::string>& entries() const noexcept { return entries_; }
    const std::string& origin() const noexcept { return origin_; }

private:
    const std::string* find(const std::string& key) const;

    std::map<std::string, std::string> entries_;
    mutable std::set<std::string> used_;
    std::string origin_;
};

struct ExperimentConfig {
    Experiment experiment;
    Lattice lattice;
    std::vector<std::uint64_t> seeds;
    std::filesystem::path output_dir;
    ConfigFile file;
};

/**
 * Resolves the common keys (experiment, lattice.*, seeds.*, output.dir).
 * Output directory precedence: out_override, then $OUTPUT_DIR, then output.dir, then "she-lab-out".
 */
ExperimentConfig make_experiment_config(ConfigFile file, std::optional<Experiment> expected = std::nullopt,
                                        std::optional<std::size_t> seed_count = std::nullopt,
                                        std::optional<std::filesystem::path> out_override = std::nullopt);

/// Lattice from lattice.{L,dx,dt,T,boundary} with desk-scale defaults.
Lattice lattice_from(const ConfigFile& file, const std::string& prefix = "lattice");

/// "zero", "const:c", "gauss:a" (exp(-a x^2)), "delta" or "delta:x0". ConfigError otherwise.
Field resolve_initial(std::string_view label, const Lattice& lattice);

}  // namespace shelab
