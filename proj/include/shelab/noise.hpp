#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string_view>
#include <vector>

#include "shelab/lattice.hpp"

namespace shelab {

/// Identifier of the (seed, row, cell) -> Normal(0, dt dx) mapping; recorded in run metadata.
inline constexpr std::string_view kNoiseGenerator = "splitmix64-counter/box-muller/v1";

/**
 * Fills `out` with row `row` of the white-noise sheet for `seed`.
 *
 * Entry k is a Normal(0, 1) draw scaled by `scale`. The value depends only on
 * (seed, row, k), so rows can be produced in any order, by any thread, and a
 * streamed row equals the corresponding row of a materialized sheet bit for bit.
 */
void fill_noise_row(std::uint64_t seed, std::size_t row, double scale, std::span<double> out);

/**
 * Discrete space-time white noise: xi[i][j] = W([t_i, t_{i+1}) x [x_j, x_{j+1})),
 * iid Normal(0, dt*dx), for i < n_time and j < n_cells.
 */
class NoiseSheet {
public:
    NoiseSheet(Lattice lattice, std::uint64_t seed);

    const Lattice& lattice() const noexcept { return lattice_; }
    std::uint64_t seed() const noexcept { return seed_; }
    std::size_t rows() const noexcept { return lattice_.n_time(); }
    std::size_t cols() const noexcept { return lattice_.n_cells(); }

    std::span<const double> row(std::size_t i) const noexcept {
        return {increments_.data() + i * cols(), cols()};
    }
    std::span<const double> increments() const noexcept { return increments_; }

    /// Binary dump: magic, seed, L, dx, dt, T, then row-major float64 payload.
    void save(const std::filesystem::path& path) const;
    static NoiseSheet load(const std::filesystem::path& path, Boundary boundary = Boundary::dirichlet_zero);

private:
    NoiseSheet(Lattice lattice, std::uint64_t seed, std::vector<double> increments)
        : lattice_(std::move(lattice)), seed_(seed), increments_(std::move(increments)) {}

    Lattice lattice_;
    std::uint64_t seed_;
    std::vector<double> increments_;
};

/// Row-by-row producer of the same values as NoiseSheet, holding one row at a time.
class NoiseStream {
public:
    NoiseStream(Lattice lattice, std::uint64_t seed);

    const Lattice& lattice() const noexcept { return lattice_; }
    std::uint64_t seed() const noexcept { return seed_; }

    /// The returned span is valid until the next call.
    std::span<const double> row(std::size_t i);

private:
    Lattice lattice_;
    std::uint64_t seed_;
    double scale_;
    std::vector<double> buffer_;
};

NoiseSheet sample_noise(const Lattice& lattice, std::uint64_t seed);

/// sum over t_i < t_end, j < n_cells of phi(t_i, x_j) xi[i][j].
double integrate_test_function(const NoiseSheet& sheet, const std::function<double(double, double)>& phi,
                               double t_end);

/// Signed rectangle sum W(t, x) over [0, t] x [0, x] (negated over [x, 0] for x < 0).
double brownian_sheet_value(const NoiseSheet& sheet, double t, double x);

}  // namespace shelab
