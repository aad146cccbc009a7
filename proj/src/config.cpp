#include "shelab/config.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include <fmt/core.h>

#include "shelab/errors.hpp"

namespace shelab {

namespace {

std::string_view trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(std::string_view s) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (start <= s.size()) {
        const auto pos = s.find(',', start);
        const auto item = trim(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
        if (!item.empty()) out.emplace_back(item);
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

double to_double(const std::string& s, const std::string& key) {
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(s, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used == 0 || used != s.size() || !std::isfinite(v)) {
        throw ConfigError(fmt::format("{}: '{}' is not a finite number", key, s));
    }
    return v;
}

long to_long(const std::string& s, const std::string& key) {
    std::size_t used = 0;
    long v = 0;
    try {
        v = std::stol(s, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used == 0 || used != s.size()) throw ConfigError(fmt::format("{}: '{}' is not an integer", key, s));
    return v;
}

}  // namespace

std::string_view to_string(Experiment e) {
    switch (e) {
        case Experiment::comparison: return "comparison";
        case Experiment::uniqueness_ladder: return "uniqueness_ladder";
        case Experiment::moments: return "moments";
        case Experiment::holder: return "holder";
        case Experiment::girsanov: return "girsanov";
        case Experiment::kernel_audit: return "kernel_audit";
        case Experiment::consistency: return "consistency";
    }
    return "unknown";
}

const std::vector<Experiment>& all_experiments() {
    static const std::vector<Experiment> all{Experiment::comparison, Experiment::uniqueness_ladder,
                                             Experiment::moments,    Experiment::holder,
                                             Experiment::girsanov,   Experiment::kernel_audit,
                                             Experiment::consistency};
    return all;
}

Experiment parse_experiment(std::string_view name) {
    for (Experiment e : all_experiments()) {
        if (to_string(e) == name) return e;
    }
    throw ConfigError(fmt::format("unknown experiment '{}'", name));
}

ConfigFile ConfigFile::parse(std::string_view text, std::string origin) {
    ConfigFile cfg;
    cfg.origin_ = std::move(origin);
    std::size_t line_no = 0;
    std::size_t start = 0;
    while (start <= text.size()) {
        const auto end = text.find('\n', start);
        std::string_view line = text.substr(start, end == std::string_view::npos ? std::string_view::npos : end - start);
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        line = trim(line);
        if (!line.empty()) {
            const auto eq = line.find('=');
            if (eq == std::string_view::npos) {
                throw ConfigError(fmt::format("{}:{}: expected 'key = value'", cfg.origin_, line_no));
            }
            const std::string key(trim(line.substr(0, eq)));
            const std::string value(trim(line.substr(eq + 1)));
            const bool key_ok = !key.empty() && key.find_first_not_of("abcdefghijklmnopqrstuvwxyz"
                                                                      "ABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789_.") ==
                                                    std::string::npos;
            if (!key_ok) throw ConfigError(fmt::format("{}:{}: bad key '{}'", cfg.origin_, line_no, key));
            if (!cfg.entries_.emplace(key, value).second) {
                throw ConfigError(fmt::format("{}:{}: duplicate key '{}'", cfg.origin_, line_no, key));
            }
        }
        if (end == std::string_view::npos) break;
        start = end + 1;
    }
    return cfg;
}

ConfigFile ConfigFile::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError(fmt::format("cannot read config '{}'", path.string()));
    std::stringstream ss;
    ss << in.rdbuf();
    return parse(ss.str(), path.string());
}

const std::string* ConfigFile::find(const std::string& key) const {
    used_.insert(key);
    const auto it = entries_.find(key);
    return it == entries_.end() ? nullptr : &it->second;
}

std::string ConfigFile::get_string(const std::string& key, const std::string& fallback) const {
    const auto* v = find(key);
    return v ? *v : fallback;
}

double ConfigFile::get_double(const std::string& key, double fallback) const {
    const auto* v = find(key);
    return v ? to_double(*v, key) : fallback;
}

long ConfigFile::get_int(const std::string& key, long fallback) const {
    const auto* v = find(key);
    return v ? to_long(*v, key) : fallback;
}

bool ConfigFile::get_bool(const std::string& key, bool fallback) const {
    const auto* v = find(key);
    if (!v) return fallback;
    if (*v == "true" || *v == "1" || *v == "yes") return true;
    if (*v == "false" || *v == "0" || *v == "no") return false;
    throw ConfigError(fmt::format("{}: '{}' is not a boolean", key, *v));
}

std::vector<std::string> ConfigFile::get_strings(const std::string& key,
                                                 const std::vector<std::string>& fallback) const {
    const auto* v = find(key);
    return v ? split_list(*v) : fallback;
}

std::vector<double> ConfigFile::get_doubles(const std::string& key, const std::vector<double>& fallback) const {
    const auto* v = find(key);
    if (!v) return fallback;
    std::vector<double> out;
    for (const auto& item : split_list(*v)) out.push_back(to_double(item, key));
    return out;
}

std::vector<int> ConfigFile::get_ints(const std::string& key, const std::vector<int>& fallback) const {
    const auto* v = find(key);
    if (!v) return fallback;
    std::vector<int> out;
    for (const auto& item : split_list(*v)) out.push_back(static_cast<int>(to_long(item, key)));
    return out;
}

void ConfigFile::require_all_used() const {
    std::string unused;
    for (const auto& [key, value] : entries_) {
        if (!used_.count(key)) unused += (unused.empty() ? "" : ", ") + key;
    }
    if (!unused.empty()) throw ConfigError(fmt::format("{}: unknown keys: {}", origin_, unused));
}

Lattice lattice_from(const ConfigFile& file, const std::string& prefix) {
    try {
        return Lattice::build(file.get_double(prefix + ".L", 10.0), file.get_double(prefix + ".dx", 0.05),
                              file.get_double(prefix + ".dt", 1e-3), file.get_double(prefix + ".T", 1.0),
                              parse_boundary(file.get_string(prefix + ".boundary", "dirichlet_zero")));
    } catch (const ConfigError&) {
        throw;
    } catch (const InputError& e) {
        throw ConfigError(fmt::format("{}: {}", prefix, e.what()));
    }
}

ExperimentConfig make_experiment_config(ConfigFile file, std::optional<Experiment> expected,
                                        std::optional<std::size_t> seed_count,
                                        std::optional<std::filesystem::path> out_override) {
    std::optional<Experiment> named;
    if (file.has("experiment")) named = parse_experiment(file.get_string("experiment", ""));
    if (expected && named && *expected != *named) {
        throw ConfigError(fmt::format("config is for '{}', not '{}'", to_string(*named), to_string(*expected)));
    }
    if (!expected && !named) throw ConfigError("no experiment named in config");
    const Experiment experiment = expected ? *expected : *named;

    if (seed_count) {
        file.erase("seeds.list");
        file.set("seeds.count", std::to_string(*seed_count));
    }
    std::vector<std::uint64_t> seeds;
    if (file.has("seeds.list")) {
        if (file.has("seeds.count") || file.has("seeds.base")) {
            throw ConfigError("give either seeds.list or seeds.base/seeds.count, not both");
        }
        for (int s : file.get_ints("seeds.list", {})) {
            if (s < 0) throw ConfigError("seeds must be non-negative");
            seeds.push_back(static_cast<std::uint64_t>(s));
        }
    } else {
        const long base = file.get_int("seeds.base", 1);
        const long count = file.get_int("seeds.count", 1);
        if (base < 0) throw ConfigError("seeds.base must be non-negative");
        if (count < 1) throw ConfigError("seeds.count must be at least 1");
        for (long k = 0; k < count; ++k) seeds.push_back(static_cast<std::uint64_t>(base + k));
    }
    if (seeds.empty()) throw ConfigError("seed list is empty");

    std::filesystem::path out = file.get_string("output.dir", "she-lab-out");
    if (const char* env = std::getenv("OUTPUT_DIR"); env && *env) out = env;
    if (out_override) out = *out_override;

    Lattice lattice = lattice_from(file);
    return {experiment, std::move(lattice), std::move(seeds), std::move(out), std::move(file)};
}

Field resolve_initial(std::string_view label, const Lattice& lattice) {
    const std::string s(label);
    const auto colon = s.find(':');
    const std::string kind = s.substr(0, colon);
    const bool has_arg = colon != std::string::npos;
    const std::string arg = has_arg ? s.substr(colon + 1) : std::string{};
    if (kind == "zero" && !has_arg) return Field::constant(lattice, 0.0);
    if (kind == "const" && has_arg) return Field::constant(lattice, to_double(arg, s));
    if (kind == "gauss" && has_arg) {
        const double a = to_double(arg, s);
        return Field::from_function(lattice, [a](double x) { return std::exp(-a * x * x); });
    }
    if (kind == "delta") return Field::delta(lattice, has_arg ? to_double(arg, s) : 0.0);
    throw ConfigError(fmt::format("unknown initial condition '{}'", label));
}

}  // namespace shelab
