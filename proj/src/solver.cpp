#include "shelab/solver.hpp"

#include <algorithm>
#include <cmath>

#include <boost/math/distributions/students_t.hpp>
#include <fmt/core.h>
#include <tbb/parallel_for.h>

#include "shelab/errors.hpp"
#include "shelab/kernel.hpp"

namespace shelab {

namespace {

std::size_t level_index(double t, double dt) { return static_cast<std::size_t>(std::llround(t / dt)); }

// out <- one explicit step of u. Dirichlet pins both end nodes to zero; periodic
// treats node n_cells as a copy of node 0. Node j reads noise cell j.
void step_into(std::span<const double> u, std::span<double> out, std::span<const double> xi,
               const Coefficient& sigma, const Coefficient& b, double t, const Lattice& lat) {
    const std::size_t cells = lat.n_cells();
    const double dt = lat.dt();
    const double diff = dt / (2.0 * lat.dx() * lat.dx());
    const double inv_dx = 1.0 / lat.dx();
    auto update = [&](std::size_t j, double left, double right) {
        const double x = lat.x(j);
        const double uj = u[j];
        return uj + diff * (right - 2.0 * uj + left) + dt * b(t, x, uj) + sigma(t, x, uj) * xi[j] * inv_dx;
    };
    if (lat.boundary() == Boundary::dirichlet_zero) {
        out[0] = 0.0;
        out[cells] = 0.0;
        for (std::size_t j = 1; j < cells; ++j) out[j] = update(j, u[j - 1], u[j + 1]);
    } else {
        for (std::size_t j = 0; j < cells; ++j) {
            out[j] = update(j, u[j == 0 ? cells - 1 : j - 1], u[j + 1 == cells ? 0 : j + 1]);
        }
        out[cells] = out[0];
    }
}

void check_lattice(const Lattice& a, const Lattice& b, const char* what) {
    if (!(a == b)) throw LatticeMismatch(fmt::format("{}: lattices differ", what));
}

// Advances every state in `states` with its own drift but the same row per step.
template <class RowSource>
std::vector<Trajectory> run(const SolverConfig& cfg, std::vector<Field> initial, const Coefficient& sigma,
                            const std::vector<const Coefficient*>& drifts, RowSource&& row_of,
                            std::vector<Provenance> provenance) {
    const Lattice& lat = cfg.lattice;
    if (!(cfg.clamp_threshold > 0.0)) throw InputError("clamp_threshold must be positive");
    if (cfg.record_every < 1) throw InputError("record_every must be at least 1");
    const std::size_t n = lat.n_space();
    const std::size_t steps = lat.n_time();
    const std::size_t k = initial.size();

    std::vector<Trajectory> out(k);
    std::vector<std::vector<double>> cur(k), next(k, std::vector<double>(n));
    for (std::size_t s = 0; s < k; ++s) {
        check_lattice(initial[s].lattice(), lat, "initial field vs solver lattice");
        cur[s].assign(initial[s].values().begin(), initial[s].values().end());
        out[s].provenance = std::move(provenance[s]);
        out[s].provenance.positive_projection = cfg.project_positive;
        out[s].times.push_back(0.0);
        out[s].fields.push_back(std::move(initial[s]));
    }

    for (std::size_t i = 0; i < steps; ++i) {
        const std::span<const double> xi = row_of(i);
        const double t = lat.t(i);
        for (std::size_t s = 0; s < k; ++s) {
            if (cfg.on_row) cfg.on_row(i, xi);
            step_into(cur[s], next[s], xi, sigma, *drifts[s], t, lat);
            double sup = 0.0;
            for (double& v : next[s]) {
                if (cfg.project_positive) v = std::max(v, 0.0);
                sup = std::max(sup, std::abs(v));
                if (!std::isfinite(v)) sup = INFINITY;
            }
            if (!(sup <= cfg.clamp_threshold)) {
                throw BlowUp(fmt::format("sup|u| = {} exceeds {} at t = {}", sup, cfg.clamp_threshold, lat.t(i + 1)),
                             i + 1);
            }
            std::swap(cur[s], next[s]);
            if ((i + 1) % cfg.record_every == 0 || i + 1 == steps) {
                out[s].times.push_back(lat.t(i + 1));
                out[s].fields.emplace_back(lat, cur[s]);
            }
        }
    }
    return out;
}

Provenance make_provenance(std::uint64_t seed, const Coefficient& sigma, const Coefficient& b, std::string init) {
    Provenance p;
    p.seed = seed;
    p.sigma = sigma.label();
    p.drift = b.label();
    p.initial = std::move(init);
    return p;
}

std::vector<double> log_spaced_lags(std::size_t lo, std::size_t hi, std::size_t n) {
    std::vector<double> lags;
    for (std::size_t k = 0; k < n; ++k) {
        const double f = n == 1 ? 0.0 : double(k) / double(n - 1);
        const double v = std::round(std::exp(std::log(double(lo)) + f * (std::log(double(hi)) - std::log(double(lo)))));
        if (lags.empty() || v > lags.back()) lags.push_back(v);
    }
    return lags;
}

double median_of(std::vector<double>& v) {
    const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
    std::nth_element(v.begin(), mid, v.end());
    double m = *mid;
    if (v.size() % 2 == 0) m = 0.5 * (m + *std::max_element(v.begin(), mid));
    return m;
}

double t_quantile(std::size_t dof) {
    const boost::math::students_t dist(static_cast<double>(dof));
    return boost::math::quantile(boost::math::complement(dist, 0.025));
}

}  // namespace

Field em_step(const Field& u, std::span<const double> row, const Coefficient& sigma, const Coefficient& b, double t,
              const Lattice& lattice) {
    check_lattice(u.lattice(), lattice, "em_step");
    if (row.size() != lattice.n_cells()) {
        throw LatticeMismatch(fmt::format("noise row has {} cells, lattice has {}", row.size(), lattice.n_cells()));
    }
    std::vector<double> out(lattice.n_space());
    step_into(u.values(), out, row, sigma, b, t, lattice);
    for (std::size_t j = 0; j < out.size(); ++j) {
        if (!std::isfinite(out[j])) throw BlowUp(fmt::format("non-finite value at node {}", j), 1);
    }
    return Field(lattice, std::move(out));
}

Trajectory simulate(const SolverConfig& cfg, const Field& u0, const Coefficient& sigma, const Coefficient& b,
                    const NoiseSheet& noise, std::string initial_label) {
    check_lattice(noise.lattice(), cfg.lattice, "noise vs solver lattice");
    auto runs = run(cfg, {u0}, sigma, {&b}, [&](std::size_t i) { return noise.row(i); },
                    {make_provenance(noise.seed(), sigma, b, std::move(initial_label))});
    return std::move(runs.front());
}

Trajectory simulate(const SolverConfig& cfg, const Field& u0, const Coefficient& sigma, const Coefficient& b,
                    NoiseStream& noise, std::string initial_label) {
    check_lattice(noise.lattice(), cfg.lattice, "noise vs solver lattice");
    auto runs = run(cfg, {u0}, sigma, {&b}, [&](std::size_t i) { return noise.row(i); },
                    {make_provenance(noise.seed(), sigma, b, std::move(initial_label))});
    return std::move(runs.front());
}

std::pair<Trajectory, Trajectory> simulate_coupled(const SolverConfig& cfg, const Field& u0_1, const Field& u0_2,
                                                   const Coefficient& sigma, const Coefficient& b1,
                                                   const Coefficient& b2, const NoiseSheet& noise) {
    check_lattice(noise.lattice(), cfg.lattice, "noise vs solver lattice");
    check_lattice(u0_1.lattice(), u0_2.lattice(), "coupled initial fields");
    for (std::size_t j = 0; j < u0_1.size(); ++j) {
        if (u0_1[j] > u0_2[j]) {
            throw InitialOrderViolation(
                fmt::format("u0_1 > u0_2 at x = {} ({} > {})", cfg.lattice.x(j), u0_1[j], u0_2[j]));
        }
    }
    auto runs = run(cfg, {u0_1, u0_2}, sigma, {&b1, &b2}, [&](std::size_t i) { return noise.row(i); },
                    {make_provenance(noise.seed(), sigma, b1, "u0_1"), make_provenance(noise.seed(), sigma, b2, "u0_2")});
    return {std::move(runs[0]), std::move(runs[1])};
}

std::vector<double> mild_residual(const Trajectory& traj, const Field& phi, const NoiseSheet& noise,
                                  const Coefficient& sigma, const Coefficient& b) {
    if (traj.fields.empty()) throw EmptyInput("mild_residual on an empty trajectory");
    const Lattice& lat = traj.lattice();
    check_lattice(phi.lattice(), lat, "test function vs trajectory");
    check_lattice(noise.lattice(), lat, "noise vs trajectory");
    const double reach = lat.half_width() - 6.0 * std::sqrt(lat.horizon());
    for (std::size_t j = 0; j < phi.size(); ++j) {
        if (phi[j] != 0.0 && std::abs(lat.x(j)) > reach + 1e-12) {
            throw SupportViolation(
                fmt::format("test function is nonzero at x = {}, outside |x| <= L - 6 sqrt(T) = {}", lat.x(j), reach));
        }
    }

    const std::size_t n = lat.n_space();
    const double dx = lat.dx();
    std::vector<double> half_lap(n, 0.0);
    for (std::size_t j = 2; j + 2 < n; ++j) {
        half_lap[j] = 0.5 * (-phi[j + 2] + 16.0 * phi[j + 1] - 30.0 * phi[j] + 16.0 * phi[j - 1] - phi[j - 2]) /
                      (12.0 * dx * dx);
    }
    auto pair_terms = [&](std::size_t k) {
        const Field& u = traj.fields[k];
        const double t = traj.times[k];
        double lap = 0.0, drift = 0.0;
        for (std::size_t j = 0; j < lat.n_cells(); ++j) {
            lap += u[j] * half_lap[j];
            if (phi[j] != 0.0) drift += b(t, lat.x(j), u[j]) * phi[j];
        }
        return std::pair{lap * dx, drift * dx};
    };

    const double start = traj.fields[0].inner(phi);
    std::vector<double> residual{0.0};
    auto [lap_prev, drift_prev] = pair_terms(0);
    double integral = 0.0;
    double stochastic = 0.0;
    for (std::size_t k = 1; k < traj.fields.size(); ++k) {
        const std::size_t i0 = level_index(traj.times[k - 1], lat.dt());
        const std::size_t i1 = level_index(traj.times[k], lat.dt());
        const Field& u_left = traj.fields[k - 1];
        for (std::size_t i = i0; i < i1; ++i) {
            const auto xi = noise.row(i);
            const double t = lat.t(i);
            for (std::size_t j = 0; j < xi.size(); ++j) {
                if (phi[j] != 0.0) stochastic += sigma(t, lat.x(j), u_left[j]) * phi[j] * xi[j];
            }
        }
        const auto [lap, drift] = pair_terms(k);
        const double h = traj.times[k] - traj.times[k - 1];
        integral += 0.5 * h * (lap_prev + lap + drift_prev + drift);
        lap_prev = lap;
        drift_prev = drift;
        residual.push_back(std::abs(traj.fields[k].inner(phi) - start - integral - stochastic));
    }
    return residual;
}

std::vector<Trajectory> ladder_solution_sequence(const SolverConfig& cfg, const Field& u0, const Coefficient& sigma,
                                                 const MollifierLadder& ladder, const NoiseSheet& noise,
                                                 std::span<const int> n_list, int k_max, std::string initial_label) {
    if (n_list.empty()) throw EmptyInput("ladder sequence needs at least one n");
    for (std::size_t a = 0; a < n_list.size(); ++a) {
        if (n_list[a] < 1 || (a > 0 && n_list[a] <= n_list[a - 1])) {
            throw ParameterOutOfRegime("ladder levels must be positive and strictly increasing");
        }
    }
    if (k_max < n_list.back()) throw ParameterOutOfRegime("K_max must be at least the largest ladder level");
    check_lattice(noise.lattice(), cfg.lattice, "noise vs solver lattice");

    // Build drifts (and their tables) up front so the parallel region only reads.
    std::vector<Coefficient> drifts;
    for (int n : n_list) drifts.push_back(ladder.drift(n, k_max));
    std::vector<Trajectory> out(n_list.size());
    tbb::parallel_for(std::size_t{0}, n_list.size(), [&](std::size_t a) {
        out[a] = simulate(cfg, u0, sigma, drifts[a], noise, initial_label);
    });
    return out;
}

HolderEstimate holder_exponent_estimate(const Trajectory& traj, HolderAxis axis, const HolderOptions& opts) {
    if (traj.fields.size() < 2) throw EmptyInput("Hoelder estimate needs at least two recorded times");
    const Lattice& lat = traj.lattice();
    const double h_t = traj.times[1] - traj.times[0];
    std::size_t levels = 1;
    while (levels < traj.times.size() &&
           std::abs(traj.times[levels] - static_cast<double>(levels) * h_t) <= 1e-9 * h_t * double(levels)) {
        ++levels;
    }
    const double reach = lat.half_width() - opts.margin;
    std::vector<std::size_t> nodes;
    for (std::size_t j = 0; j < lat.n_space(); ++j) {
        if (std::abs(lat.x(j)) <= reach) nodes.push_back(j);
    }
    if (nodes.empty()) throw GeometryError("Hoelder margin leaves no interior points");

    HolderEstimate est{};
    const double step = axis == HolderAxis::time ? h_t : lat.dx();
    std::vector<double> incs;
    for (double lag_d : log_spaced_lags(opts.min_lag, opts.max_lag, opts.n_lags)) {
        const auto lag = static_cast<std::size_t>(lag_d);
        incs.clear();
        if (axis == HolderAxis::time) {
            for (std::size_t k = 0; k + lag < levels; ++k) {
                const Field& a = traj.fields[k];
                const Field& c = traj.fields[k + lag];
                for (std::size_t j : nodes) incs.push_back(std::abs(c[j] - a[j]));
            }
        } else {
            const auto first = static_cast<std::size_t>(std::ceil(opts.start_fraction * double(levels - 1)));
            for (std::size_t k = std::max<std::size_t>(first, 1); k < levels; ++k) {
                const Field& f = traj.fields[k];
                for (std::size_t j : nodes) {
                    if (j + lag <= nodes.back()) incs.push_back(std::abs(f[j + lag] - f[j]));
                }
            }
        }
        if (incs.empty()) continue;
        const double med = median_of(incs);
        if (!(med > 0.0)) throw DegenerateTrajectory(fmt::format("median increment is zero at lag {}", lag), NAN);
        est.lags.push_back(lag_d * step);
        est.medians.push_back(med);
    }
    const std::size_t m = est.lags.size();
    if (m < 3) throw DegenerateTrajectory("fewer than three usable lags", NAN);

    double mx = 0.0, my = 0.0;
    for (std::size_t k = 0; k < m; ++k) {
        mx += std::log(est.lags[k]);
        my += std::log(est.medians[k]);
    }
    mx /= double(m);
    my /= double(m);
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t k = 0; k < m; ++k) {
        const double dxl = std::log(est.lags[k]) - mx;
        sxx += dxl * dxl;
        sxy += dxl * (std::log(est.medians[k]) - my);
    }
    const double slope = sxy / sxx;
    double ssr = 0.0;
    for (std::size_t k = 0; k < m; ++k) {
        const double r = std::log(est.medians[k]) - (my + slope * (std::log(est.lags[k]) - mx));
        ssr += r * r;
    }
    const double se = std::sqrt(ssr / double(m - 2) / sxx);
    const double half = t_quantile(m - 2) * se;
    if (slope >= opts.smooth_slope) {
        throw DegenerateTrajectory(fmt::format("slope {} indicates a smooth path", slope), slope);
    }
    est.exponent = slope;
    est.ci_low = slope - half;
    est.ci_high = slope + half;
    return est;
}

SampleSummary summarize(std::span<const double> xs) {
    if (xs.size() < 2) throw InsufficientEnsemble("summary needs at least two samples");
    double mean = 0.0;
    for (double x : xs) mean += x;
    mean /= double(xs.size());
    double var = 0.0;
    for (double x : xs) var += (x - mean) * (x - mean);
    var /= double(xs.size() - 1);
    const double sd = std::sqrt(var);
    const double half = t_quantile(xs.size() - 1) * sd / std::sqrt(double(xs.size()));
    return {mean, sd, mean - half, mean + half, xs.size()};
}

std::vector<ConsistencyRow> consistency_study(double half_width, double horizon, std::span<const double> dxs,
                                              double ratio) {
    if (dxs.empty()) throw EmptyInput("consistency study needs at least one dx");
    std::vector<ConsistencyRow> rows;
    const Coefficient zero = zero_coefficient();
    for (double dx : dxs) {
        const Lattice lat = Lattice::build(half_width, dx, ratio * dx * dx, horizon);
        SolverConfig cfg{lat, 1e9, lat.n_time(), false, {}};
        const Field u0 = Field::from_function(lat, [](double x) { return std::exp(-x * x); });
        const std::vector<double> silent(lat.n_cells(), 0.0);
        auto runs = run(cfg, {u0}, zero, {&zero}, [&](std::size_t) { return std::span<const double>(silent); },
                        {Provenance{}});
        const Field& final_field = runs.front().fields.back();
        const Field exact = semigroup_apply(u0, horizon);
        const double reach = half_width - 6.0 * std::sqrt(horizon);
        double err = 0.0;
        for (std::size_t j = 0; j < lat.n_space(); ++j) {
            if (std::abs(lat.x(j)) <= reach) err = std::max(err, std::abs(final_field[j] - exact[j]));
        }
        const double order = rows.empty() ? NAN : std::log2(rows.back().sup_error / err);
        rows.push_back({dx, lat.dt(), err, order});
    }
    return rows;
}

}  // namespace shelab
