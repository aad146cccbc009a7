#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "shelab/coefficients.hpp"
#include "shelab/lattice.hpp"
#include "shelab/noise.hpp"
#include "shelab/solver.hpp"

namespace shelab {

/// Values on (recorded time) x (grid point); row r belongs to times[r].
struct GridField {
    Lattice lattice;
    std::vector<double> times;
    std::vector<double> values;

    std::size_t rows() const noexcept { return times.size(); }
    double at(std::size_t r, std::size_t j) const noexcept { return values[r * lattice.n_space() + j]; }

    /// The same value c at every level t_0..t_N of the lattice.
    static GridField constant(const Lattice& lattice, double c);
};

inline constexpr double kAssumptionAtol = 1e-12;

/// Z = b / sigma along the trajectory; 0 where both vanish (|b| <= atol). AssumptionAViolation otherwise.
GridField z_field(const Coefficient& b, const Coefficient& sigma, const Trajectory& traj,
                  double atol = kAssumptionAtol);

struct GirsanovWeight {
    /// Lattice times t_0..t_N.
    std::vector<double> times;
    /// log L at each time.
    std::vector<double> log_L;
    /// Running sum of Z^2 dt dx.
    std::vector<double> quad_var;
    std::uint64_t seed = 0;

    double log_LT() const { return log_L.back(); }
    double quad_var_T() const { return quad_var.back(); }
};

/**
 * log L_{t_i} = sum_{s < t_i} sum_j Z(s, x_j) xi_{s,j} - 1/2 sum Z^2 dt dx.
 * Z is read at the last recorded time not after s (left endpoint, predictable).
 */
GirsanovWeight log_weight(const GridField& z, const NoiseSheet& noise);
GirsanovWeight log_weight(const GridField& z, NoiseStream& noise);

struct NovikovEstimate {
    /// For a single field its quad-var; for an ensemble the mean quad-var.
    double quad_var_total = 0.0;
    /// exp(quad_var / 2), or its ensemble mean; empty on overflow.
    std::optional<double> exp_moment;
    /// Some exponent quad_var / 2 exceeded 700.
    bool overflow = false;
};

NovikovEstimate novikov_estimate(const GridField& z);
/// Ensemble version over per-realization quad_var totals.
NovikovEstimate novikov_estimate(std::span<const double> quad_var_totals);

struct StoppingState {
    double K;
    /// First time max(acc1, acc2) > K; empty if never within the horizon.
    std::optional<double> T_K;
    std::vector<double> acc1;
    std::vector<double> acc2;
};

/// Throws NonMonotoneAccumulator if an accumulator decreases, ParameterOutOfRegime unless K > 0.
StoppingState stopping_time(std::span<const double> times, std::span<const double> acc1,
                            std::span<const double> acc2, double K);

struct MeanWeightTest {
    std::size_t n = 0;
    double mean_LT = 0.0;
    double stderr_LT = 0.0;
    double mean_quad_var = 0.0;
    double max_quad_var = 0.0;
    /// |mean - 1| <= 3 stderr.
    bool passed = false;
    /// Mean quad-var above 1: L_T is heavy-tailed and the test is not meaningful.
    bool high_variance = false;
};

inline constexpr std::size_t kMinWeightEnsemble = 100;

/// Throws InsufficientEnsemble below kMinWeightEnsemble realizations.
MeanWeightTest mean_weight_test(std::span<const GirsanovWeight> ensemble);
/// Same test from the terminal values log L_T and quad_var(T) of each realization.
MeanWeightTest mean_weight_test(std::span<const double> log_LT, std::span<const double> quad_var_T);

}  // namespace shelab
