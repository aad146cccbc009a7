#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "shelab/coefficients.hpp"
#include "shelab/lattice.hpp"
#include "shelab/noise.hpp"

namespace shelab {

inline constexpr std::string_view kSchemeVersion = "explicit-euler-maruyama/central-3pt/v1";

struct SolverConfig {
    Lattice lattice;
    /// Abort with BlowUp once sup|u| exceeds this.
    double clamp_threshold = 1e9;
    /// Store every record_every-th time level (the final level is always stored).
    std::size_t record_every = 1;
    /// Replace u by max(u, 0) after each step; recorded in provenance.
    bool project_positive = false;
    /// Called with (row index, row) each time a solution consumes a noise row.
    std::function<void(std::size_t, std::span<const double>)> on_row;
};

struct Provenance {
    std::uint64_t seed = 0;
    std::string sigma;
    std::string drift;
    std::string initial;
    std::string scheme{kSchemeVersion};
    bool positive_projection = false;
};

struct Trajectory {
    std::vector<double> times;
    std::vector<Field> fields;
    Provenance provenance;

    const Lattice& lattice() const { return fields.front().lattice(); }
};

/// One explicit step: u + dt (half discrete Laplacian + b) + sigma xi / dx, boundary per lattice.
Field em_step(const Field& u, std::span<const double> row, const Coefficient& sigma, const Coefficient& b, double t,
              const Lattice& lattice);

/// The label travels into provenance; it is not interpreted.
Trajectory simulate(const SolverConfig& cfg, const Field& u0, const Coefficient& sigma, const Coefficient& b,
                    const NoiseSheet& noise, std::string initial_label = "custom");
/// Same values as the sheet overload, generating rows on demand.
Trajectory simulate(const SolverConfig& cfg, const Field& u0, const Coefficient& sigma, const Coefficient& b,
                    NoiseStream& noise, std::string initial_label = "custom");

/// Both solutions advance in lockstep and read the very same row for each step.
std::pair<Trajectory, Trajectory> simulate_coupled(const SolverConfig& cfg, const Field& u0_1, const Field& u0_2,
                                                   const Coefficient& sigma, const Coefficient& b1,
                                                   const Coefficient& b2, const NoiseSheet& noise);

/**
 * |R(t)| at every recorded time, where
 *   R(t) = <u(t),phi> - <u0,phi> - int_0^t <u,phi''/2> ds - int_0^t <b(u),phi> ds - sum sigma(u) phi xi.
 * Time integrals of the deterministic terms use the trapezoid rule over the
 * recorded times and a fourth-order stencil for phi''; the noise sum is the
 * Ito (left-endpoint) sum with the latest recorded field.
 * phi must vanish outside |x| <= L - 6 sqrt(T), else SupportViolation.
 */
std::vector<double> mild_residual(const Trajectory& traj, const Field& phi, const NoiseSheet& noise,
                                  const Coefficient& sigma, const Coefficient& b);

/// One trajectory per n, each driven by the ladder drift min_{m=n..k_max} b_m and the same noise.
std::vector<Trajectory> ladder_solution_sequence(const SolverConfig& cfg, const Field& u0, const Coefficient& sigma,
                                                 const MollifierLadder& ladder, const NoiseSheet& noise,
                                                 std::span<const int> n_list, int k_max,
                                                 std::string initial_label = "custom");

enum class HolderAxis { time, space };

struct HolderOptions {
    /// Lags in grid steps along the axis, log-spaced and deduplicated.
    std::size_t min_lag = 1;
    std::size_t max_lag = 32;
    std::size_t n_lags = 8;
    /// Space: ignore points within this distance of the boundary. Time: only these points are used too.
    double margin = 2.0;
    /// Space: only times t >= start_fraction * T contribute.
    double start_fraction = 0.5;
    /// Slopes at or above this are smooth (non-rough) paths.
    double smooth_slope = 0.9;
};

struct HolderEstimate {
    double exponent;
    double ci_low;
    double ci_high;
    std::vector<double> lags;
    std::vector<double> medians;
};

/// Log-log regression of median |increment| against lag; 95% CI from the regression's t-interval.
HolderEstimate holder_exponent_estimate(const Trajectory& traj, HolderAxis axis, const HolderOptions& opts = {});

struct SampleSummary {
    double mean;
    double stddev;
    double ci_low;
    double ci_high;
    std::size_t n;
};

/// Mean with a two-sided 95% Student-t interval. Needs at least two samples.
SampleSummary summarize(std::span<const double> xs);

struct ConsistencyRow {
    double dx;
    double dt;
    double sup_error;
    /// log2(previous error / this error); NaN on the first row.
    double order;
};

/**
 * Heat flow (sigma = b = 0) from u0 = exp(-x^2) on [-L, L] to time T, compared in sup norm
 * against semigroup_apply on |x| <= L - 6 sqrt(T), for each dx with dt = ratio dx^2.
 */
std::vector<ConsistencyRow> consistency_study(double half_width, double horizon, std::span<const double> dxs,
                                              double ratio = 0.25);

}  // namespace shelab
