#include "shelab/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>

#include <fmt/core.h>
#include <fmt/os.h>
#include <tbb/parallel_for.h>

#include "shelab/coefficients.hpp"
#include "shelab/errors.hpp"
#include "shelab/girsanov.hpp"
#include "shelab/kernel.hpp"
#include "shelab/noise.hpp"
#include "shelab/solver.hpp"

namespace shelab {

namespace {

using json = nlohmann::ordered_json;

struct Builder {
    const ExperimentConfig& cfg;
    json parameters = json::object();
    json per_seed = json::array();
    json aggregates = json::object();
    json diagnostics = json::object();
    std::vector<Verdict> verdicts;
    std::vector<Series> series;

    void verdict(std::string criterion, std::string check, bool passed, std::string detail) {
        verdicts.push_back({std::move(criterion), std::move(check), passed, std::move(detail)});
    }
};

template <class F>
auto map_seeds(std::span<const std::uint64_t> seeds, F&& f) {
    using R = decltype(f(seeds[0]));
    std::vector<R> out(seeds.size());
    tbb::parallel_for(std::size_t{0}, seeds.size(), [&](std::size_t k) { out[k] = f(seeds[k]); });
    return out;
}

std::vector<double> linspace(double lo, double hi, std::size_t n) {
    std::vector<double> v(n);
    for (std::size_t k = 0; k < n; ++k) v[k] = n == 1 ? lo : lo + (hi - lo) * double(k) / double(n - 1);
    return v;
}

SolverConfig solver_config(const Lattice& lat) { return {lat, 1e9, 1, false, {}}; }

json lattice_json(const Lattice& lat) {
    return {{"L", lat.half_width()},
            {"dx", lat.dx()},
            {"dt", lat.dt()},
            {"T", lat.horizon()},
            {"boundary", std::string(to_string(lat.boundary()))}};
}

std::size_t fraction_needed(double fraction, std::size_t n) {
    return static_cast<std::size_t>(std::ceil(fraction * double(n) - 1e-9));
}

Report finish(Builder&& b) {
    const ExperimentConfig& cfg = b.cfg;
    Report r;
    r.experiment = cfg.experiment;
    json config = json::object();
    for (const auto& [key, value] : cfg.file.entries()) {
        if (key != "output.dir") config[key] = value;
    }
    json doc;
    doc["schema_version"] = kReportSchemaVersion;
    doc["experiment"] = std::string(to_string(cfg.experiment));
    doc["scheme_version"] = std::string(kSchemeVersion);
    doc["rng"] = {{"generator", std::string(kNoiseGenerator)}};
    doc["config"] = std::move(config);
    doc["seeds"] = {{"count", cfg.seeds.size()}, {"first", cfg.seeds.front()}, {"last", cfg.seeds.back()}};
    doc["lattice"] = lattice_json(cfg.lattice);
    doc["parameters"] = std::move(b.parameters);
    doc["per_seed"] = std::move(b.per_seed);
    doc["aggregates"] = std::move(b.aggregates);
    doc["diagnostics"] = std::move(b.diagnostics);
    json verdicts = json::array();
    bool all = true;
    for (const auto& v : b.verdicts) {
        verdicts.push_back({{"criterion", v.criterion}, {"check", v.check}, {"passed", v.passed}, {"detail", v.detail}});
        all = all && v.passed;
    }
    doc["verdicts"] = std::move(verdicts);
    json series = json::array();
    for (const auto& s : b.series) {
        series.push_back({{"name", s.name},
                          {"file", fmt::format("{}.{}.csv", to_string(cfg.experiment), s.name)},
                          {"columns", s.columns},
                          {"x", s.x},
                          {"y", s.y},
                          {"log_x", s.log_x},
                          {"log_y", s.log_y}});
    }
    doc["series"] = std::move(series);
    doc["passed"] = all;
    r.document = std::move(doc);
    r.verdicts = std::move(b.verdicts);
    r.series = std::move(b.series);
    return r;
}

// ---------------------------------------------------------------------------

struct OrderStats {
    /// max over the grid of u1 - u2, floored at 0.
    double worst = 0.0;
    std::size_t violations = 0;
};

OrderStats order_stats(const Trajectory& lo, const Trajectory& hi, double slack) {
    OrderStats s;
    for (std::size_t k = 0; k < lo.fields.size(); ++k) {
        const Field& a = lo.fields[k];
        const Field& c = hi.fields[k];
        for (std::size_t j = 0; j < a.size(); ++j) {
            const double d = a[j] - c[j];
            s.worst = std::max(s.worst, d);
            if (d > slack) ++s.violations;
        }
    }
    return s;
}

void check_drift_order(const Coefficient& lo, const Coefficient& hi, const Lattice& lat) {
    for (double t : {0.0, lat.horizon()}) {
        for (double x : {-lat.half_width(), 0.0, lat.half_width()}) {
            for (double u : linspace(-20.0, 20.0, 401)) {
                if (lo(t, x, u) > hi(t, x, u)) {
                    throw ConfigError(fmt::format("drifts are not ordered: {} > {} at u = {}", lo.label(), hi.label(), u));
                }
            }
        }
    }
}

void check_initial_order(const Field& lo, const Field& hi) {
    for (std::size_t j = 0; j < lo.size(); ++j) {
        if (lo[j] > hi[j]) throw ConfigError(fmt::format("initial data are not ordered at node {}", j));
    }
}

}  // namespace

bool Report::all_passed() const {
    return std::all_of(verdicts.begin(), verdicts.end(), [](const Verdict& v) { return v.passed; });
}

Report run_comparison(const ExperimentConfig& cfg) {
    const ConfigFile& f = cfg.file;
    const auto sigma_labels = f.get_strings("comparison.sigmas", {"linear:1", "power_sigma:0.8"});
    const Coefficient b_low = resolve_coefficient(f.get_string("comparison.drift_low", "zero"));
    const Coefficient b_high = resolve_coefficient(f.get_string("comparison.drift_high", "const:1"));
    const std::string init_low = f.get_string("comparison.initial_low", "const:1");
    const std::string init_high = f.get_string("comparison.initial_high", "const:1");
    const double slack_dx = f.get_double("comparison.slack_dx", 10.0);
    const double min_clean = f.get_double("comparison.min_clean_fraction", 0.95);
    const bool refine = f.get_bool("comparison.refine", true);
    const long refine_seeds = f.get_int("comparison.refine_seeds", 0);
    const long control_seeds = f.get_int("comparison.control_seeds", 10);
    const long widen_seeds = f.get_int("comparison.widen_seeds", 5);
    std::vector<Coefficient> sigmas;
    for (const auto& l : sigma_labels) sigmas.push_back(resolve_coefficient(l));
    if (sigmas.empty()) throw ConfigError("comparison.sigmas is empty");
    check_drift_order(b_low, b_high, cfg.lattice);
    check_initial_order(resolve_initial(init_low, cfg.lattice), resolve_initial(init_high, cfg.lattice));
    f.require_all_used();

    Builder b{cfg, {}, json::array(), {}, {}, {}, {}};
    b.parameters = {{"sigmas", sigma_labels},
                    {"drift_low", b_low.label()},
                    {"drift_high", b_high.label()},
                    {"initial_low", init_low},
                    {"initial_high", init_high},
                    {"slack_dx", slack_dx},
                    {"min_clean_fraction", min_clean}};

    // stats[sigma] for one seed on one lattice, drifts in the given order.
    auto run_pair = [&](const Lattice& lat, std::uint64_t seed, const Coefficient& first, const Coefficient& second) {
        const NoiseSheet noise(lat, seed);
        const Field u1 = resolve_initial(init_low, lat);
        const Field u2 = resolve_initial(init_high, lat);
        std::vector<OrderStats> out;
        for (const auto& sigma : sigmas) {
            const auto [a, c] = simulate_coupled(solver_config(lat), u1, u2, sigma, first, second, noise);
            out.push_back(order_stats(a, c, slack_dx * lat.dx()));
        }
        return out;
    };

    const auto base = map_seeds(cfg.seeds, [&](std::uint64_t s) { return run_pair(cfg.lattice, s, b_low, b_high); });
    const std::size_t n_ref = refine ? (refine_seeds > 0 ? std::min<std::size_t>(refine_seeds, cfg.seeds.size())
                                                         : cfg.seeds.size())
                                     : 0;
    const Lattice fine = cfg.lattice.refined();
    const std::span<const std::uint64_t> ref_seeds(cfg.seeds.data(), n_ref);
    const auto refined = map_seeds(ref_seeds, [&](std::uint64_t s) { return run_pair(fine, s, b_low, b_high); });
    const std::size_t n_ctl = std::min<std::size_t>(std::max(control_seeds, 0L), cfg.seeds.size());
    const auto control = map_seeds(std::span<const std::uint64_t>(cfg.seeds.data(), n_ctl),
                                   [&](std::uint64_t s) { return run_pair(cfg.lattice, s, b_high, b_low); });
    const std::size_t n_wide = std::min<std::size_t>(std::max(widen_seeds, 0L), cfg.seeds.size());
    const Lattice wide = cfg.lattice.widened();
    const auto widened = map_seeds(std::span<const std::uint64_t>(cfg.seeds.data(), n_wide),
                                   [&](std::uint64_t s) { return run_pair(wide, s, b_low, b_high); });

    Series viol{"worst_violation", {"seed"}, {}, "seed", {}, false, false};
    for (const auto& l : sigma_labels) {
        viol.columns.push_back("worst_" + l);
        viol.y.push_back("worst_" + l);
    }
    for (std::size_t k = 0; k < cfg.seeds.size(); ++k) {
        json results = json::array();
        std::vector<double> row{double(cfg.seeds[k])};
        for (std::size_t s = 0; s < sigmas.size(); ++s) {
            results.push_back({{"sigma", sigma_labels[s]},
                               {"worst_violation", base[k][s].worst},
                               {"violating_points", base[k][s].violations},
                               {"clean", base[k][s].violations == 0}});
            row.push_back(base[k][s].worst);
        }
        json entry{{"seed", cfg.seeds[k]}, {"base", std::move(results)}};
        if (k < n_ref) {
            json fine_results = json::array();
            for (std::size_t s = 0; s < sigmas.size(); ++s) {
                fine_results.push_back({{"sigma", sigma_labels[s]},
                                        {"worst_violation", refined[k][s].worst},
                                        {"violating_points", refined[k][s].violations}});
            }
            entry["refined"] = std::move(fine_results);
        }
        b.per_seed.push_back(std::move(entry));
        viol.rows.push_back(std::move(row));
    }
    b.series.push_back(std::move(viol));

    for (std::size_t s = 0; s < sigmas.size(); ++s) {
        const std::string& label = sigma_labels[s];
        std::size_t clean = 0;
        double worst_base = 0.0;
        double worst_base_ref_subset = 0.0;
        for (std::size_t k = 0; k < base.size(); ++k) {
            clean += base[k][s].violations == 0;
            worst_base = std::max(worst_base, base[k][s].worst);
            if (k < n_ref) worst_base_ref_subset = std::max(worst_base_ref_subset, base[k][s].worst);
        }
        double worst_fine = 0.0;
        for (const auto& r : refined) worst_fine = std::max(worst_fine, r[s].worst);
        std::size_t ctl_flagged = 0;
        for (const auto& c : control) ctl_flagged += c[s].violations > 0;
        double worst_wide = 0.0;
        for (const auto& w : widened) worst_wide = std::max(worst_wide, w[s].worst);

        const std::size_t need = fraction_needed(min_clean, cfg.seeds.size());
        b.aggregates[label] = {{"clean_seeds", clean},
                               {"seeds", cfg.seeds.size()},
                               {"worst_violation", worst_base},
                               {"worst_violation_refined", worst_fine},
                               {"refined_seeds", n_ref},
                               {"control_seeds_with_violations", ctl_flagged},
                               {"control_seeds", n_ctl}};
        b.diagnostics[label] = {{"widened_seeds", n_wide}, {"worst_violation_widened", worst_wide}};
        b.verdict("AC-1", fmt::format("ordering [{}]", label), clean >= need,
                  fmt::format("{} of {} seeds free of violations beyond {} dx (need {})", clean, cfg.seeds.size(),
                              slack_dx, need));
        if (refine) {
            const bool shrinks = worst_fine <= worst_base_ref_subset &&
                                 (worst_base_ref_subset == 0.0 || worst_fine < worst_base_ref_subset);
            b.verdict("AC-1", fmt::format("refinement [{}]", label), shrinks,
                      fmt::format("worst violation {} on the base grid, {} on the refined grid ({} seeds)",
                                  worst_base_ref_subset, worst_fine, n_ref));
        }
        if (n_ctl > 0) {
            b.verdict("AC-1", fmt::format("control [{}]", label), ctl_flagged == n_ctl,
                      ctl_flagged == n_ctl
                          ? fmt::format("hypothesis-violated control: expected failure observed in {} of {} seeds",
                                        ctl_flagged, n_ctl)
                          : fmt::format("control with reversed drifts flagged only {} of {} seeds", ctl_flagged,
                                        n_ctl));
        }
    }
    return finish(std::move(b));
}

Report run_uniqueness_ladder(const ExperimentConfig& cfg) {
    const ConfigFile& f = cfg.file;
    const Coefficient sigma = resolve_coefficient(f.get_string("ladder.sigma", "power_sigma:0.8"));
    const Coefficient drift = resolve_coefficient(f.get_string("ladder.drift", "power_drift:0.9"));
    const std::string init = f.get_string("ladder.initial", "const:1");
    const std::vector<int> levels = f.get_ints("ladder.levels", {4, 8, 12, 16});
    const int k_max = static_cast<int>(f.get_int("ladder.k_max", 24));
    const double slack_dx = f.get_double("ladder.slack_dx", 10.0);
    const double ordering_fraction = f.get_double("ladder.ordering_fraction", 0.9);
    const double cauchy_fraction = f.get_double("ladder.cauchy_fraction", 0.8);
    const double p = f.get_double("reconstruction.p", 0.8);
    const double q = f.get_double("reconstruction.q", 1.0);
    const long recon_seeds = f.get_int("reconstruction.seeds", 5);
    const double recon_tol = f.get_double("reconstruction.tol", 1e-12);
    const double z_tol = f.get_double("reconstruction.z_rel_tol", 1e-13);
    const std::string recon_init = f.get_string("reconstruction.initial", "const:1");
    if (levels.size() < 2) throw ConfigError("ladder.levels needs at least two levels");
    for (std::size_t k = 0; k < levels.size(); ++k) {
        if (levels[k] < 1 || (k > 0 && levels[k] <= levels[k - 1])) {
            throw ConfigError("ladder.levels must be positive and strictly increasing");
        }
    }
    if (k_max < levels.back() || k_max > MollifierLadder::kMaxLevel) throw ConfigError("ladder.k_max out of range");
    PowerLawPair pair = [&] {
        try {
            return power_law_pair(p, q);
        } catch (const ParameterOutOfRegime& e) {
            throw ConfigError(e.what());
        }
    }();
    const Field u0 = resolve_initial(init, cfg.lattice);
    const Field recon_u0 = resolve_initial(recon_init, cfg.lattice);
    f.require_all_used();

    Builder b{cfg, {}, json::array(), {}, {}, {}, {}};
    b.parameters = {{"sigma", sigma.label()}, {"drift", drift.label()},     {"initial", init},
                    {"levels", levels},       {"k_max", k_max},             {"slack_dx", slack_dx},
                    {"reconstruction", {{"p", p}, {"q", q}, {"tol", recon_tol}, {"z_rel_tol", z_tol}}}};

    const MollifierLadder ladder(drift);
    const double slack = slack_dx * cfg.lattice.dx();
    struct LadderSeed {
        std::vector<double> pair_worst;  // max(u_n - u_n') for consecutive levels
        std::vector<double> distances;   // sup |u_n' - u_n|
        bool ordered = false;
        bool cauchy = false;
    };
    const auto results = map_seeds(cfg.seeds, [&](std::uint64_t seed) {
        const NoiseSheet noise(cfg.lattice, seed);
        const auto trajs =
            ladder_solution_sequence(solver_config(cfg.lattice), u0, sigma, ladder, noise, levels, k_max, init);
        LadderSeed r;
        for (std::size_t a = 0; a + 1 < trajs.size(); ++a) {
            double worst = -INFINITY;
            double dist = 0.0;
            for (std::size_t k = 0; k < trajs[a].fields.size(); ++k) {
                const Field& lo = trajs[a].fields[k];
                const Field& hi = trajs[a + 1].fields[k];
                for (std::size_t j = 0; j < lo.size(); ++j) {
                    worst = std::max(worst, lo[j] - hi[j]);
                    dist = std::max(dist, std::abs(hi[j] - lo[j]));
                }
            }
            r.pair_worst.push_back(worst);
            r.distances.push_back(dist);
        }
        r.ordered = std::all_of(r.pair_worst.begin(), r.pair_worst.end(), [&](double w) { return w <= slack; });
        r.cauchy = true;
        for (std::size_t a = 0; a + 1 < r.distances.size(); ++a) r.cauchy = r.cauchy && r.distances[a + 1] < r.distances[a];
        return r;
    });

    Series dist{"sup_distances", {"seed"}, {}, "seed", {}, false, true};
    for (std::size_t a = 0; a + 1 < levels.size(); ++a) {
        const std::string name = fmt::format("d_{}_{}", levels[a], levels[a + 1]);
        dist.columns.push_back(name);
        dist.y.push_back(name);
    }
    std::size_t ordered = 0, cauchy = 0;
    std::vector<double> mean_dist(levels.size() - 1, 0.0);
    for (std::size_t k = 0; k < results.size(); ++k) {
        const auto& r = results[k];
        ordered += r.ordered;
        cauchy += r.cauchy;
        b.per_seed.push_back({{"seed", cfg.seeds[k]},
                              {"max_lower_minus_upper", r.pair_worst},
                              {"sup_distances", r.distances},
                              {"ordered", r.ordered},
                              {"distances_decreasing", r.cauchy}});
        std::vector<double> row{double(cfg.seeds[k])};
        for (std::size_t a = 0; a < r.distances.size(); ++a) {
            row.push_back(r.distances[a]);
            mean_dist[a] += r.distances[a] / double(results.size());
        }
        dist.rows.push_back(std::move(row));
    }
    b.series.push_back(std::move(dist));

    const auto us = linspace(-4.0, 4.0, 81);
    const double gap = ladder.convergence_gap(levels.front(), k_max, us);
    b.diagnostics["truncation_gap"] = {{"n", levels.front()}, {"k", k_max}, {"k_minus_4_gap", gap}};

    // Drift reconstruction b = -Z sigma under shared noise.
    const Coefficient recomposed = product(pair.ratio, pair.sigma, true);
    struct ReconSeed {
        double sup_distance = 0.0;
        double z_rel_error = 0.0;
        bool z_sign = true;
    };
    const std::size_t n_recon = std::min<std::size_t>(std::max(recon_seeds, 1L), cfg.seeds.size());
    const auto recon = map_seeds(std::span<const std::uint64_t>(cfg.seeds.data(), n_recon), [&](std::uint64_t seed) {
        const NoiseSheet noise(cfg.lattice, seed);
        const auto direct = simulate(solver_config(cfg.lattice), recon_u0, pair.sigma, pair.drift, noise, recon_init);
        const auto rebuilt = simulate(solver_config(cfg.lattice), recon_u0, pair.sigma, recomposed, noise, recon_init);
        ReconSeed r;
        for (std::size_t k = 0; k < direct.fields.size(); ++k) {
            for (std::size_t j = 0; j < direct.fields[k].size(); ++j) {
                r.sup_distance = std::max(r.sup_distance, std::abs(direct.fields[k][j] - rebuilt.fields[k][j]));
            }
        }
        const GridField z = z_field(pair.drift, pair.sigma, direct);
        const double expo = q - p;
        for (std::size_t k = 0; k < z.rows(); ++k) {
            for (std::size_t j = 0; j < cfg.lattice.n_space(); ++j) {
                const double expect = std::pow(std::abs(direct.fields[k][j]), expo);
                const double got = z.at(k, j);
                if (got > 0.0) r.z_sign = false;
                const double err = std::abs(std::abs(got) - expect);
                r.z_rel_error = std::max(r.z_rel_error, expect > 0.0 ? err / expect : err);
            }
        }
        return r;
    });
    double recon_sup = 0.0, z_err = 0.0;
    bool z_sign = true;
    json recon_seeds_json = json::array();
    for (std::size_t k = 0; k < recon.size(); ++k) {
        recon_sup = std::max(recon_sup, recon[k].sup_distance);
        z_err = std::max(z_err, recon[k].z_rel_error);
        z_sign = z_sign && recon[k].z_sign;
        recon_seeds_json.push_back({{"seed", cfg.seeds[k]},
                                    {"sup_distance", recon[k].sup_distance},
                                    {"z_rel_error", recon[k].z_rel_error}});
    }

    const std::size_t need_order = fraction_needed(ordering_fraction, cfg.seeds.size());
    const std::size_t need_cauchy = fraction_needed(cauchy_fraction, cfg.seeds.size());
    b.aggregates = {{"ordered_seeds", ordered},
                    {"decreasing_seeds", cauchy},
                    {"seeds", cfg.seeds.size()},
                    {"mean_sup_distances", mean_dist},
                    {"reconstruction",
                     {{"seeds", recon_seeds_json},
                      {"max_sup_distance", recon_sup},
                      {"max_z_rel_error", z_err},
                      {"z_nonpositive", z_sign}}}};
    b.verdict("AC-2", "min-ordering", ordered >= need_order,
              fmt::format("{} of {} seeds ordered within {} dx (need {})", ordered, cfg.seeds.size(), slack_dx,
                          need_order));
    b.verdict("AC-2", "cauchy", cauchy >= need_cauchy,
              fmt::format("{} of {} seeds with strictly decreasing sup-distances (need {})", cauchy, cfg.seeds.size(),
                          need_cauchy));
    b.verdict("AC-3", "drift reconstruction", recon_sup <= recon_tol,
              fmt::format("sup |u_b - u_(-Z sigma)| = {} over {} seeds (tol {})", recon_sup, n_recon, recon_tol));
    b.verdict("AC-3", "z_field power law", z_err <= z_tol && z_sign,
              fmt::format("max relative error of |Z| against |u|^{:g} is {} (tol {}); Z <= 0: {}", q - p, z_err, z_tol,
                          z_sign));
    return finish(std::move(b));
}

Report run_moments(const ExperimentConfig& cfg) {
    const ConfigFile& f = cfg.file;
    const Coefficient sigma = resolve_coefficient(f.get_string("moments.sigma", "const:1"));
    const Coefficient drift = resolve_coefficient(f.get_string("moments.drift", "zero"));
    const std::string init = f.get_string("moments.initial", "zero");
    const double p = f.get_double("moments.p", 2.0);
    const double lambda = f.get_double("moments.lambda", 1.0);
    const double control_lambda = f.get_double("moments.control_lambda", 0.0);
    const double max_change = f.get_double("moments.max_change", 0.3);
    resolve_initial(init, cfg.lattice);
    f.require_all_used();

    Builder b{cfg, {}, json::array(), {}, {}, {}, {}};
    b.parameters = {{"sigma", sigma.label()}, {"drift", drift.label()}, {"initial", init},        {"p", p},
                    {"lambda", lambda},       {"control_lambda", control_lambda}, {"max_change", max_change}};

    const std::array<double, 2> lambdas{lambda, control_lambda};
    auto stat = [&](const Lattice& lat, std::uint64_t seed) {
        NoiseStream noise(lat, seed);
        const auto traj = simulate(solver_config(lat), resolve_initial(init, lat), sigma, drift, noise, init);
        std::array<double, 2> sup{0.0, 0.0};
        for (const Field& u : traj.fields) {
            for (std::size_t j = 0; j < u.size(); ++j) {
                const double m = std::pow(std::abs(u[j]), p);
                const double ax = std::abs(lat.x(j));
                for (std::size_t l = 0; l < 2; ++l) sup[l] = std::max(sup[l], m * std::exp(-lambdas[l] * ax));
            }
        }
        return sup;
    };
    struct MomentSeed {
        std::array<double, 2> base{}, refined{}, widened{};
    };
    const Lattice fine = cfg.lattice.refined();
    const Lattice wide = cfg.lattice.widened();
    const auto results = map_seeds(cfg.seeds, [&](std::uint64_t seed) {
        return MomentSeed{stat(cfg.lattice, seed), stat(fine, seed), stat(wide, seed)};
    });

    std::array<double, 2> base{}, refined{}, widened{};
    const double n = double(results.size());
    Series s{"per_seed_sup", {"seed", "base", "refined", "widened"}, {}, "seed", {"base", "refined", "widened"},
             false, true};
    for (std::size_t k = 0; k < results.size(); ++k) {
        const auto& r = results[k];
        for (std::size_t l = 0; l < 2; ++l) {
            base[l] += r.base[l] / n;
            refined[l] += r.refined[l] / n;
            widened[l] += r.widened[l] / n;
        }
        b.per_seed.push_back({{"seed", cfg.seeds[k]},
                              {"base", r.base[0]},
                              {"refined", r.refined[0]},
                              {"widened", r.widened[0]},
                              {"control_base", r.base[1]},
                              {"control_widened", r.widened[1]}});
        s.rows.push_back({double(cfg.seeds[k]), r.base[0], r.refined[0], r.widened[0]});
    }
    b.series.push_back(std::move(s));
    const double change_ref = std::abs(refined[0] - base[0]) / base[0];
    const double change_wide = std::abs(widened[0] - base[0]) / base[0];
    b.aggregates = {{"estimate_base", base[0]},
                    {"estimate_refined", refined[0]},
                    {"estimate_widened", widened[0]},
                    {"relative_change_refined", change_ref},
                    {"relative_change_widened", change_wide},
                    {"control_estimate_base", base[1]},
                    {"control_estimate_widened", widened[1]}};
    b.diagnostics = {{"refined_lattice", lattice_json(fine)}, {"widened_lattice", lattice_json(wide)}};
    b.verdict("AC-4", "grid refinement", change_ref <= max_change,
              fmt::format("E[sup |u|^{} e^(-{}|x|)] {} -> {} under refinement, change {:.4f} (max {})", p, lambda,
                          base[0], refined[0], change_ref, max_change));
    b.verdict("AC-4", "domain doubling", change_wide <= max_change,
              fmt::format("estimate {} -> {} when L doubles, change {:.4f} (max {})", base[0], widened[0], change_wide,
                          max_change));
    const bool grows = widened[1] > base[1];
    b.verdict("AC-4", fmt::format("control lambda={}", control_lambda), grows,
              grows ? fmt::format("expected-unbounded control: estimate grows {} -> {} when L doubles", base[1],
                                  widened[1])
                    : fmt::format("control estimate did not grow with L ({} -> {})", base[1], widened[1]));
    return finish(std::move(b));
}

Report run_holder(const ExperimentConfig& cfg) {
    const ConfigFile& f = cfg.file;
    const Coefficient sigma = resolve_coefficient(f.get_string("holder.sigma", "const:1"));
    const Coefficient drift = resolve_coefficient(f.get_string("holder.drift", "zero"));
    const std::string init = f.get_string("holder.initial", "zero");
    const auto time_lags = f.get_ints("holder.time_lags", {4, 128});
    const auto space_lags = f.get_ints("holder.space_lags", {1, 32});
    const long n_lags = f.get_int("holder.n_lags", 8);
    const double margin = f.get_double("holder.margin", 2.0);
    const double start_fraction = f.get_double("holder.start_fraction", 0.5);
    const auto time_window = f.get_doubles("holder.time_window", {0.2, 0.3});
    const auto space_window = f.get_doubles("holder.space_window", {0.4, 0.6});
    const bool ci_inside = f.get_bool("holder.require_ci_inside", true);
    const std::string nl_sigma_label = f.get_string("holder.nonlinear.sigma", "power_sigma:0.8");
    const std::string nl_drift_label = f.get_string("holder.nonlinear.drift", "power_drift:0.9");
    const std::string nl_init = f.get_string("holder.nonlinear.initial", "const:1");
    const long nl_seeds = f.get_int("holder.nonlinear.seeds", 5);
    const std::string control_init = f.get_string("holder.control.initial", "gauss:1");
    if (time_lags.size() != 2 || space_lags.size() != 2 || time_window.size() != 2 || space_window.size() != 2) {
        throw ConfigError("holder lag ranges and windows take two values");
    }
    for (int l : {time_lags[0], time_lags[1], space_lags[0], space_lags[1]}) {
        if (l < 1) throw ConfigError("holder lags must be at least 1");
    }
    const Coefficient nl_sigma = resolve_coefficient(nl_sigma_label);
    const Coefficient nl_drift = resolve_coefficient(nl_drift_label);
    resolve_initial(init, cfg.lattice);
    resolve_initial(nl_init, cfg.lattice);
    resolve_initial(control_init, cfg.lattice);
    f.require_all_used();

    HolderOptions topt;
    topt.min_lag = std::size_t(time_lags[0]);
    topt.max_lag = std::size_t(time_lags[1]);
    topt.n_lags = std::size_t(n_lags);
    topt.margin = margin;
    topt.start_fraction = start_fraction;
    HolderOptions sopt = topt;
    sopt.min_lag = std::size_t(space_lags[0]);
    sopt.max_lag = std::size_t(space_lags[1]);

    Builder b{cfg, {}, json::array(), {}, {}, {}, {}};
    b.parameters = {{"sigma", sigma.label()},
                    {"drift", drift.label()},
                    {"initial", init},
                    {"time_lags", time_lags},
                    {"space_lags", space_lags},
                    {"n_lags", n_lags},
                    {"margin", margin},
                    {"start_fraction", start_fraction},
                    {"time_window", time_window},
                    {"space_window", space_window},
                    {"require_ci_inside", ci_inside}};

    struct Pair {
        HolderEstimate time{}, space{};
        bool ok = false;
        std::string error;
    };
    auto estimate = [&](const Coefficient& s, const Coefficient& d, const std::string& u0, std::uint64_t seed) {
        NoiseStream noise(cfg.lattice, seed);
        const auto traj = simulate(solver_config(cfg.lattice), resolve_initial(u0, cfg.lattice), s, d, noise, u0);
        Pair r;
        try {
            r.time = holder_exponent_estimate(traj, HolderAxis::time, topt);
            r.space = holder_exponent_estimate(traj, HolderAxis::space, sopt);
            r.ok = true;
        } catch (const DegenerateTrajectory& e) {
            r.error = e.what();
        }
        return r;
    };
    const auto results = map_seeds(cfg.seeds, [&](std::uint64_t s) { return estimate(sigma, drift, init, s); });

    std::vector<double> te, se;
    std::vector<double> mean_t, mean_s;
    std::size_t ok_count = 0;
    for (std::size_t k = 0; k < results.size(); ++k) {
        const auto& r = results[k];
        if (!r.ok) {
            b.per_seed.push_back({{"seed", cfg.seeds[k]}, {"degenerate", r.error}});
            continue;
        }
        ++ok_count;
        te.push_back(r.time.exponent);
        se.push_back(r.space.exponent);
        if (mean_t.empty()) {
            mean_t.assign(r.time.medians.size(), 0.0);
            mean_s.assign(r.space.medians.size(), 0.0);
        }
        for (std::size_t a = 0; a < mean_t.size(); ++a) mean_t[a] += std::log(r.time.medians[a]);
        for (std::size_t a = 0; a < mean_s.size(); ++a) mean_s[a] += std::log(r.space.medians[a]);
        b.per_seed.push_back({{"seed", cfg.seeds[k]},
                              {"time_exponent", r.time.exponent},
                              {"time_ci", {r.time.ci_low, r.time.ci_high}},
                              {"space_exponent", r.space.exponent},
                              {"space_ci", {r.space.ci_low, r.space.ci_high}}});
    }
    auto add_series = [&](const char* name, const std::vector<double>& lags, const std::vector<double>& sums) {
        Series s{name, {"lag", "median_increment"}, {}, "lag", {"median_increment"}, true, true};
        for (std::size_t a = 0; a < sums.size(); ++a) s.rows.push_back({lags[a], std::exp(sums[a] / double(ok_count))});
        b.series.push_back(std::move(s));
    };
    if (ok_count > 0) {
        const auto& first = *std::find_if(results.begin(), results.end(), [](const Pair& p) { return p.ok; });
        add_series("time_increments", first.time.lags, mean_t);
        add_series("space_increments", first.space.lags, mean_s);
    }

    auto judge = [&](const char* axis, const std::vector<double>& xs, const std::vector<double>& window) {
        if (xs.size() < 2 || ok_count != results.size()) {
            b.verdict("AC-5", fmt::format("{} exponent", axis), false,
                      fmt::format("{} of {} seeds gave usable estimates", ok_count, results.size()));
            b.aggregates[axis] = nullptr;
            return;
        }
        const SampleSummary s = summarize(xs);
        const bool mean_in = s.mean >= window[0] && s.mean <= window[1];
        const bool ci_in = s.ci_low >= window[0] && s.ci_high <= window[1];
        b.aggregates[axis] = {{"mean", s.mean}, {"stddev", s.stddev}, {"ci95", {s.ci_low, s.ci_high}}, {"n", s.n}};
        b.verdict("AC-5", fmt::format("{} exponent", axis), ci_inside ? (mean_in && ci_in) : mean_in,
                  fmt::format("mean {:.4f}, 95% CI [{:.4f}, {:.4f}] over {} seeds; window [{}, {}]", s.mean, s.ci_low,
                              s.ci_high, s.n, window[0], window[1]));
    };
    judge("time", te, time_window);
    judge("space", se, space_window);

    // Nonlinear case and a smooth control, reported only.
    const std::size_t n_nl = std::min<std::size_t>(std::max(nl_seeds, 0L), cfg.seeds.size());
    const auto nl = map_seeds(std::span<const std::uint64_t>(cfg.seeds.data(), n_nl),
                              [&](std::uint64_t s) { return estimate(nl_sigma, nl_drift, nl_init, s); });
    json nl_json = json::array();
    for (std::size_t k = 0; k < nl.size(); ++k) {
        if (nl[k].ok) {
            nl_json.push_back(
                {{"seed", cfg.seeds[k]}, {"time_exponent", nl[k].time.exponent}, {"space_exponent", nl[k].space.exponent}});
        } else {
            nl_json.push_back({{"seed", cfg.seeds[k]}, {"degenerate", nl[k].error}});
        }
    }
    b.diagnostics["nonlinear"] = {{"sigma", nl_sigma.label()}, {"drift", nl_drift.label()}, {"seeds", nl_json}};
    const auto control = estimate(zero_coefficient(), zero_coefficient(), control_init, cfg.seeds.front());
    b.diagnostics["smooth_control"] = {{"initial", control_init},
                                       {"rejected", !control.ok},
                                       {"reason", control.ok ? std::string("accepted") : control.error}};
    return finish(std::move(b));
}

Report run_girsanov(const ExperimentConfig& cfg) {
    const ConfigFile& f = cfg.file;
    const double z_const = f.get_double("girsanov.z", 0.1);
    const auto K_list = f.get_doubles("girsanov.K", {0.01, 0.02, 0.04, 0.08});
    const double p = f.get_double("girsanov.power.p", 0.8);
    const double q = f.get_double("girsanov.power.q", 1.0);
    const long power_seeds = f.get_int("girsanov.power.seeds", 100);
    const std::string init_low = f.get_string("girsanov.power.initial_low", "const:0.5");
    const std::string init_high = f.get_string("girsanov.power.initial_high", "const:1");
    const auto power_K = f.get_doubles("girsanov.power.K", {1.0, 2.0, 4.0, 8.0});
    const double heavy_z = f.get_double("girsanov.heavy.z", std::sqrt(2.0));
    const long heavy_seeds = f.get_int("girsanov.heavy.seeds", 200);
    for (double K : K_list) {
        if (!(K > 0.0)) throw ConfigError("girsanov.K entries must be positive");
    }
    for (double K : power_K) {
        if (!(K > 0.0)) throw ConfigError("girsanov.power.K entries must be positive");
    }
    PowerLawPair pair = [&] {
        try {
            return power_law_pair(p, q);
        } catch (const ParameterOutOfRegime& e) {
            throw ConfigError(e.what());
        }
    }();
    const Field v0_low = resolve_initial(init_low, cfg.lattice);
    const Field v0_high = resolve_initial(init_high, cfg.lattice);
    check_initial_order(v0_low, v0_high);
    f.require_all_used();
    if (cfg.seeds.size() < kMinWeightEnsemble) {
        throw ConfigError(fmt::format("girsanov needs at least {} seeds", kMinWeightEnsemble));
    }

    Builder b{cfg, {}, json::array(), {}, {}, {}, {}};
    b.parameters = {{"z", z_const},
                    {"K", K_list},
                    {"power", {{"p", p}, {"q", q}, {"seeds", power_seeds}, {"K", power_K}}},
                    {"heavy", {{"z", heavy_z}, {"seeds", heavy_seeds}}}};

    auto monotone = [](const std::vector<std::optional<double>>& tk) {
        for (std::size_t a = 0; a + 1 < tk.size(); ++a) {
            const double x = tk[a].value_or(INFINITY), y = tk[a + 1].value_or(INFINITY);
            if (y < x) return false;
        }
        return true;
    };
    auto sorted = [](std::vector<double> ks) {
        std::sort(ks.begin(), ks.end());
        return ks;
    };
    const auto Ks = sorted(K_list);
    const auto PKs = sorted(power_K);

    struct WeightSeed {
        double log_LT = 0.0;
        double qv = 0.0;
        bool monotone = true;
    };
    const GridField z = GridField::constant(cfg.lattice, z_const);
    auto weight_run = [&](const GridField& zf, std::uint64_t seed, const std::vector<double>& ks) {
        NoiseStream noise(cfg.lattice, seed);
        const GirsanovWeight w = log_weight(zf, noise);
        WeightSeed r{w.log_LT(), w.quad_var_T(), true};
        std::vector<std::optional<double>> tk;
        for (double K : ks) tk.push_back(stopping_time(w.times, w.quad_var, w.quad_var, K).T_K);
        r.monotone = monotone(tk);
        return r;
    };
    const auto main = map_seeds(cfg.seeds, [&](std::uint64_t s) { return weight_run(z, s, Ks); });
    std::vector<double> log_LT, qv;
    std::size_t main_monotone = 0;
    for (const auto& r : main) {
        log_LT.push_back(r.log_LT);
        qv.push_back(r.qv);
        main_monotone += r.monotone;
    }
    const MeanWeightTest test = mean_weight_test(log_LT, qv);
    const NovikovEstimate nov = novikov_estimate(qv);
    double mean_log = 0.0, var_log = 0.0;
    for (double l : log_LT) mean_log += l / double(log_LT.size());
    for (double l : log_LT) var_log += (l - mean_log) * (l - mean_log) / double(log_LT.size() - 1);

    // Ensemble of power-law solution pairs sharing noise.
    struct PowerSeed {
        double qv1 = 0.0, qv2 = 0.0;
        std::vector<std::optional<double>> tk;
        bool monotone = true;
    };
    const std::size_t n_pow = std::min<std::size_t>(std::max(power_seeds, 0L), cfg.seeds.size());
    const auto power = map_seeds(std::span<const std::uint64_t>(cfg.seeds.data(), n_pow), [&](std::uint64_t seed) {
        const NoiseSheet noise(cfg.lattice, seed);
        const auto [v1, v2] =
            simulate_coupled(solver_config(cfg.lattice), v0_low, v0_high, pair.sigma, pair.drift, pair.drift, noise);
        const auto w1 = log_weight(z_field(pair.drift, pair.sigma, v1), noise);
        const auto w2 = log_weight(z_field(pair.drift, pair.sigma, v2), noise);
        PowerSeed r{w1.quad_var_T(), w2.quad_var_T(), {}, true};
        for (double K : PKs) r.tk.push_back(stopping_time(w1.times, w1.quad_var, w2.quad_var, K).T_K);
        r.monotone = monotone(r.tk);
        return r;
    });
    std::size_t power_monotone = 0;
    std::vector<double> power_qv;
    Series tk_series{"stopping_times", {"K", "mean_T_K", "reached_fraction"}, {}, "K", {"mean_T_K"}, true, false};
    std::vector<double> tk_sum(PKs.size(), 0.0);
    std::vector<std::size_t> tk_hits(PKs.size(), 0);
    for (std::size_t k = 0; k < power.size(); ++k) {
        const auto& r = power[k];
        power_monotone += r.monotone;
        power_qv.push_back(std::max(r.qv1, r.qv2));
        json tk = json::array();
        for (std::size_t a = 0; a < r.tk.size(); ++a) {
            if (r.tk[a]) {
                tk.push_back(*r.tk[a]);
                tk_sum[a] += *r.tk[a];
                ++tk_hits[a];
            } else {
                tk.push_back(nullptr);
            }
        }
        b.per_seed.push_back({{"seed", cfg.seeds[k]},
                              {"log_LT", main[k].log_LT},
                              {"power_quad_var", {r.qv1, r.qv2}},
                              {"power_T_K", std::move(tk)},
                              {"T_K_monotone", r.monotone && main[k].monotone}});
    }
    for (std::size_t a = 0; a < PKs.size(); ++a) {
        tk_series.rows.push_back({PKs[a], tk_hits[a] ? tk_sum[a] / double(tk_hits[a]) : NAN,
                                  n_pow ? double(tk_hits[a]) / double(n_pow) : 0.0});
    }
    b.series.push_back(std::move(tk_series));
    json power_novikov = nullptr;
    json novikov_halves = nullptr;
    if (!power_qv.empty()) {
        const auto est = novikov_estimate(power_qv);
        power_novikov = {{"mean_quad_var", est.quad_var_total}, {"exp_moment", est.exp_moment ? json(*est.exp_moment) : json("overflow")}};
        if (power_qv.size() >= 2) {
            const std::size_t h = power_qv.size() / 2;
            const auto a = novikov_estimate(std::span<const double>(power_qv.data(), h));
            const auto c = novikov_estimate(std::span<const double>(power_qv.data() + h, power_qv.size() - h));
            if (a.exp_moment && c.exp_moment) {
                novikov_halves = {{"first_half", *a.exp_moment},
                                  {"second_half", *c.exp_moment},
                                  {"ratio", std::max(*a.exp_moment, *c.exp_moment) / std::min(*a.exp_moment, *c.exp_moment)}};
            }
        }
    }

    // Heavy-tailed regime: reported, not asserted.
    const std::size_t n_heavy = std::min<std::size_t>(std::max(heavy_seeds, 0L), cfg.seeds.size());
    json heavy = nullptr;
    if (n_heavy >= kMinWeightEnsemble) {
        const GridField zh = GridField::constant(cfg.lattice, heavy_z);
        const auto hv = map_seeds(std::span<const std::uint64_t>(cfg.seeds.data(), n_heavy),
                                  [&](std::uint64_t s) { return weight_run(zh, s, {}); });
        std::vector<double> hl, hq;
        for (const auto& r : hv) {
            hl.push_back(r.log_LT);
            hq.push_back(r.qv);
        }
        const auto ht = mean_weight_test(hl, hq);
        heavy = {{"z", heavy_z},          {"seeds", n_heavy},       {"mean_LT", ht.mean_LT},
                 {"stderr", ht.stderr_LT}, {"quad_var", ht.mean_quad_var}, {"within_3_stderr", ht.passed},
                 {"high_variance", ht.high_variance}};
    }

    b.aggregates = {{"n_seeds", test.n},
                    {"mean_LT", test.mean_LT},
                    {"stderr", test.stderr_LT},
                    {"quad_var_stats", {{"mean", test.mean_quad_var}, {"max", test.max_quad_var}}},
                    {"log_LT_mean", mean_log},
                    {"log_LT_variance", var_log},
                    {"pass", test.passed},
                    {"high_variance", test.high_variance}};
    b.diagnostics = {{"novikov_constant_z",
                      {{"quad_var_total", nov.quad_var_total},
                       {"exp_moment", nov.exp_moment ? json(*nov.exp_moment) : json("overflow")}}},
                     {"novikov_power_law", power_novikov},
                     {"novikov_power_law_halves", novikov_halves},
                     {"heavy_tail", heavy}};
    b.verdict("AC-6", "mean weight", test.passed,
              fmt::format("mean L_T = {:.6f} +- {:.6f} (3 stderr band), quad-var {:.6f}, {} seeds", test.mean_LT,
                          test.stderr_LT, test.mean_quad_var, test.n));
    b.verdict("AC-6", "T_K monotone [constant Z]", main_monotone == main.size(),
              fmt::format("{} of {} seeds monotone over K = {}", main_monotone, main.size(), fmt::join(Ks, ", ")));
    if (n_pow > 0) {
        b.verdict("AC-6", "T_K monotone [power law]", power_monotone == n_pow,
                  fmt::format("{} of {} seeds monotone over K = {}", power_monotone, n_pow, fmt::join(PKs, ", ")));
    }
    return finish(std::move(b));
}

Report run_kernel_audit(const ExperimentConfig& cfg) {
    const ConfigFile& f = cfg.file;
    const long pw_n = f.get_int("kernel.pointwise_n", 50);
    const long pw_fine = f.get_int("kernel.pointwise_fine_n", 100);
    const long l2_n = f.get_int("kernel.l2_n", 20);
    const long l2_fine = f.get_int("kernel.l2_fine_n", 40);
    const double lambda = f.get_double("kernel.lambda", 1.0);
    const double c_prime = f.get_double("kernel.c_prime", kDefaultCPrime);
    const double max_change = f.get_double("kernel.max_change", 0.2);
    const double closed_tol = f.get_double("kernel.closed_form_tol", 0.01);
    const long degenerate_n = f.get_int("kernel.degenerate_n", 10);
    for (long n : {pw_n, pw_fine, l2_n, l2_fine, degenerate_n}) {
        if (n < 2) throw ConfigError("kernel sweep sizes must be at least 2");
    }
    f.require_all_used();

    Builder b{cfg, {}, json::array(), {}, {}, {}, {}};
    b.parameters = {{"pointwise_n", {pw_n, pw_fine}}, {"l2_n", {l2_n, l2_fine}}, {"lambda", lambda},
                    {"c_prime", c_prime},             {"max_change", max_change}, {"closed_form_tol", closed_tol}};

    auto audit = [&](KernelLemma lemma, std::size_t n) {
        const auto sweep = lemma == KernelLemma::pointwise_increment ? pointwise_increment_sweep(n)
                                                                     : l2_increment_sweep(n, lambda);
        return audit_kernel_bounds(lemma, sweep, c_prime);
    };
    auto describe = [](const KernelAuditReport& r) {
        const auto& c = r.cases.at(r.argmax);
        return json{{"cases", r.cases.size()},
                    {"excluded", r.excluded},
                    {"max_ratio", r.max_ratio},
                    {"all_finite", r.all_finite},
                    {"argmax", {{"t", c.at.t}, {"t_prime", c.at.t_prime}, {"x", c.at.x}, {"x_prime", c.at.x_prime}}}};
    };
    const auto pw_c = audit(KernelLemma::pointwise_increment, std::size_t(pw_n));
    const auto pw_f = audit(KernelLemma::pointwise_increment, std::size_t(pw_fine));
    const auto l2_c = audit(KernelLemma::l2_increment, std::size_t(l2_n));
    const auto l2_f = audit(KernelLemma::l2_increment, std::size_t(l2_fine));
    const auto pw_v = compare_refinement(pw_c, pw_f, max_change);
    const auto l2_v = compare_refinement(l2_c, l2_f, max_change);

    // Degenerate cases: equal arguments must give exactly zero.
    bool degenerate_zero = true;
    std::size_t degenerate_count = 0;
    for (const auto& c : pw_c.cases) {
        if (c.at.x == c.at.x_prime) {
            ++degenerate_count;
            degenerate_zero = degenerate_zero && c.lhs == 0.0;
        }
    }
    for (double t : linspace(0.05, 1.0, std::size_t(degenerate_n))) {
        for (double x : linspace(-2.0, 2.0, std::size_t(degenerate_n))) {
            ++degenerate_count;
            degenerate_zero = degenerate_zero && kernel_l2_increment(t, t, x, x, lambda) == 0.0;
        }
    }
    const double closed = kernel_l2_increment(1.0, 0.0, 0.0, 0.0, 0.0);
    const double exact = 1.0 / std::sqrt(M_PI);
    const double closed_err = std::abs(closed - exact) / exact;

    b.aggregates = {{"pointwise", {{"coarse", describe(pw_c)}, {"fine", describe(pw_f)}, {"relative_change", pw_v.relative_change}}},
                    {"l2", {{"coarse", describe(l2_c)}, {"fine", describe(l2_f)}, {"relative_change", l2_v.relative_change}}},
                    {"degenerate", {{"cases", degenerate_count}, {"all_zero", degenerate_zero}}},
                    {"closed_form", {{"value", closed}, {"exact", exact}, {"relative_error", closed_err}}}};
    b.verdict("AC-7", "pointwise increment constant", pw_v.stable,
              fmt::format("max ratio {} -> {} under refinement, change {:.4f} (max {}), finite: {}", pw_v.coarse_max,
                          pw_v.fine_max, pw_v.relative_change, max_change, pw_v.bounded));
    b.verdict("AC-7", "l2 increment constant", l2_v.stable,
              fmt::format("max ratio {} -> {} under refinement, change {:.4f} (max {}), finite: {}", l2_v.coarse_max,
                          l2_v.fine_max, l2_v.relative_change, max_change, l2_v.bounded));
    b.verdict("AC-7", "degenerate cases", degenerate_zero,
              fmt::format("{} equal-argument cases, all exactly zero: {}", degenerate_count, degenerate_zero));
    b.verdict("AC-7", "closed form", closed_err <= closed_tol,
              fmt::format("int_0^1 int G_s(y)^2 dy ds = {} vs 1/sqrt(pi) = {}, relative error {:.2e}", closed, exact,
                          closed_err));
    return finish(std::move(b));
}

Report run_consistency(const ExperimentConfig& cfg) {
    const ConfigFile& f = cfg.file;
    const auto dxs = f.get_doubles("consistency.dxs", {0.1, 0.05, 0.025, 0.0125});
    const double ratio = f.get_double("consistency.ratio", 0.25);
    const double min_order = f.get_double("consistency.min_order", 1.8);
    if (dxs.size() < 2) throw ConfigError("consistency.dxs needs at least two spacings");
    if (!(ratio > 0.0 && ratio <= 0.5)) throw ConfigError("consistency.ratio must lie in (0, 1/2]");
    f.require_all_used();

    Builder b{cfg, {}, json::array(), {}, {}, {}, {}};
    b.parameters = {{"dxs", dxs}, {"ratio", ratio}, {"min_order", min_order}};
    const auto rows = [&] {
        try {
            return consistency_study(cfg.lattice.half_width(), cfg.lattice.horizon(), dxs, ratio);
        } catch (const GeometryError& e) {
            throw ConfigError(e.what());
        }
    }();
    Series s{"sup_error", {"dx", "dt", "sup_error"}, {}, "dx", {"sup_error"}, true, true};
    json table = json::array();
    double worst_order = INFINITY;
    for (const auto& r : rows) {
        table.push_back({{"dx", r.dx}, {"dt", r.dt}, {"sup_error", r.sup_error}, {"order", std::isnan(r.order) ? json(nullptr) : json(r.order)}});
        s.rows.push_back({r.dx, r.dt, r.sup_error});
        if (!std::isnan(r.order)) worst_order = std::min(worst_order, r.order);
    }
    b.series.push_back(std::move(s));
    b.aggregates = {{"rows", table}, {"min_order", worst_order}};
    std::vector<double> orders;
    for (std::size_t k = 1; k < rows.size(); ++k) orders.push_back(rows[k].order);
    b.verdict("AC-8", "observed order", worst_order >= min_order,
              fmt::format("observed orders {:.3f} (need >= {})", fmt::join(orders, ", "), min_order));
    return finish(std::move(b));
}

Report run_experiment(const ExperimentConfig& cfg) {
    const auto start = std::chrono::steady_clock::now();
    Report r = [&] {
        switch (cfg.experiment) {
            case Experiment::comparison: return run_comparison(cfg);
            case Experiment::uniqueness_ladder: return run_uniqueness_ladder(cfg);
            case Experiment::moments: return run_moments(cfg);
            case Experiment::holder: return run_holder(cfg);
            case Experiment::girsanov: return run_girsanov(cfg);
            case Experiment::kernel_audit: return run_kernel_audit(cfg);
            case Experiment::consistency: return run_consistency(cfg);
        }
        throw ConfigError("unknown experiment");
    }();
    r.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return r;
}

std::string report_text(const Report& report) { return report.document.dump(2) + "\n"; }

std::filesystem::path write_report(const Report& report, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    const std::string stem(to_string(report.experiment));
    const auto path = dir / (stem + ".json");
    {
        std::ofstream os(path, std::ios::binary);
        if (!os) throw Error(fmt::format("cannot write '{}'", path.string()));
        os << report_text(report);
    }
    for (const auto& s : report.series) {
        auto out = fmt::output_file((dir / fmt::format("{}.{}.csv", stem, s.name)).string());
        out.print("{}\n", fmt::join(s.columns, ","));
        for (const auto& row : s.rows) out.print("{}\n", fmt::join(row, ","));
    }
    {
        std::ofstream os(dir / (stem + ".timing.json"));
        os << json{{"experiment", stem}, {"wall_seconds", report.wall_seconds}}.dump(2) << "\n";
    }
    return path;
}

// ---------------------------------------------------------------------------

namespace {

struct Table {
    std::vector<std::string> columns;
    std::vector<std::vector<double>> rows;
};

Table read_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(fmt::format("cannot read '{}'", path.string()));
    Table t;
    std::string line;
    auto cells = [](const std::string& l) {
        std::vector<std::string> out;
        std::stringstream ss(l);
        std::string c;
        while (std::getline(ss, c, ',')) out.push_back(c);
        return out;
    };
    if (std::getline(in, line)) t.columns = cells(line);
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<double> row;
        for (const auto& c : cells(line)) row.push_back(c == "nan" ? NAN : std::stod(c));
        t.rows.push_back(std::move(row));
    }
    return t;
}

std::string render_svg(const Table& t, const json& spec) {
    constexpr double W = 640, H = 420, ML = 70, MR = 20, MT = 30, MB = 50;
    const bool lx = spec.at("log_x"), ly = spec.at("log_y");
    auto col = [&](const std::string& name) {
        const auto it = std::find(t.columns.begin(), t.columns.end(), name);
        if (it == t.columns.end()) throw Error(fmt::format("series column '{}' missing", name));
        return std::size_t(it - t.columns.begin());
    };
    const std::size_t xc = col(spec.at("x"));
    std::vector<std::size_t> ycs;
    for (const auto& y : spec.at("y")) ycs.push_back(col(y));
    auto tx = [&](double v) { return lx ? std::log10(v) : v; };
    auto ty = [&](double v) { return ly ? std::log10(v) : v; };
    double x0 = INFINITY, x1 = -INFINITY, y0 = INFINITY, y1 = -INFINITY;
    for (const auto& r : t.rows) {
        const double x = tx(r[xc]);
        if (!std::isfinite(x)) continue;
        x0 = std::min(x0, x), x1 = std::max(x1, x);
        for (auto c : ycs) {
            const double y = ty(r[c]);
            if (std::isfinite(y)) y0 = std::min(y0, y), y1 = std::max(y1, y);
        }
    }
    if (!(x1 > x0)) x1 = x0 + 1.0;
    if (!(y1 > y0)) y1 = y0 + 1.0;
    auto px = [&](double x) { return ML + (tx(x) - x0) / (x1 - x0) * (W - ML - MR); };
    auto py = [&](double y) { return H - MB - (ty(y) - y0) / (y1 - y0) * (H - MT - MB); };
    static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};
    std::string svg = fmt::format(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{}\">\n"
        "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
        "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n"
        "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n",
        W, H, ML, H - MB, W - MR, H - MB, ML, MT, ML, H - MB);
    svg += fmt::format("<text x=\"{}\" y=\"{}\" font-size=\"12\">{}{}</text>\n", W / 2, H - 12,
                       spec.at("x").get<std::string>(), lx ? " (log10)" : "");
    svg += fmt::format("<text x=\"12\" y=\"{}\" font-size=\"12\">{}: [{:.3g}, {:.3g}]</text>\n", MT - 10,
                       ly ? "log10 y" : "y", y0, y1);
    svg += fmt::format("<text x=\"{}\" y=\"{}\" font-size=\"11\">[{:.3g}, {:.3g}]</text>\n", ML, H - MB + 16, x0, x1);
    for (std::size_t k = 0; k < ycs.size(); ++k) {
        std::string pts;
        for (const auto& r : t.rows) {
            if (std::isfinite(tx(r[xc])) && std::isfinite(ty(r[ycs[k]]))) {
                pts += fmt::format("{:.2f},{:.2f} ", px(r[xc]), py(r[ycs[k]]));
            }
        }
        const char* c = colors[k % 6];
        svg += fmt::format("<polyline fill=\"none\" stroke=\"{}\" stroke-width=\"1.5\" points=\"{}\"/>\n", c, pts);
        svg += fmt::format("<text x=\"{}\" y=\"{}\" font-size=\"11\" fill=\"{}\">{}</text>\n", W - 200,
                           MT + 14 * double(k + 1), c, t.columns[ycs[k]]);
    }
    svg += "</svg>\n";
    return svg;
}

}  // namespace

std::vector<std::filesystem::path> plot_report(const std::filesystem::path& report_path) {
    std::ifstream in(report_path);
    if (!in) throw ConfigError(fmt::format("cannot read report '{}'", report_path.string()));
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::exception& e) {
        throw ConfigError(fmt::format("'{}' is not a report: {}", report_path.string(), e.what()));
    }
    if (!doc.contains("series")) throw ConfigError("report lists no series");
    const auto dir = report_path.parent_path();
    std::vector<std::filesystem::path> written;
    for (const auto& spec : doc.at("series")) {
        const std::filesystem::path csv = dir / spec.at("file").get<std::string>();
        const Table t = read_csv(csv);
        auto svg_path = csv;
        svg_path.replace_extension(".svg");
        std::ofstream os(svg_path);
        os << render_svg(t, spec);
        written.push_back(svg_path);
    }
    return written;
}

}  // namespace shelab
