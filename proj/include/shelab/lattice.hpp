#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

namespace shelab {

enum class Boundary { dirichlet_zero, periodic };

std::string_view to_string(Boundary b);
Boundary parse_boundary(std::string_view s);

/**
 * Truncated space-time grid: space [-L, L] with spacing dx, time [0, T] with step dt.
 *
 * Grid points are x_j = -L + j*dx for j = 0..n_space-1 and t_i = i*dt for
 * i = 0..n_time. Spatial integrals use the n_cells = n_space-1 cells
 * [x_j, x_{j+1}) with the left endpoint as the sampling point; this is the
 * same cell layout the noise sheet uses.
 *
 * Immutable after construction.
 */
class Lattice {
public:
    /// Validates divisibility of 2L by dx and T by dt, and dt <= dx^2/2.
    static Lattice build(double half_width, double dx, double dt, double horizon,
                         Boundary boundary = Boundary::dirichlet_zero);

    double half_width() const noexcept { return half_width_; }
    double dx() const noexcept { return dx_; }
    double dt() const noexcept { return dt_; }
    double horizon() const noexcept { return horizon_; }
    Boundary boundary() const noexcept { return boundary_; }
    std::size_t n_space() const noexcept { return n_space_; }
    std::size_t n_cells() const noexcept { return n_space_ - 1; }
    std::size_t n_time() const noexcept { return n_time_; }

    double x(std::size_t j) const noexcept { return -half_width_ + static_cast<double>(j) * dx_; }
    double t(std::size_t i) const noexcept { return static_cast<double>(i) * dt_; }

    /// Same geometry with dx halved and dt quartered (dt/dx^2 preserved).
    Lattice refined() const;
    /// Same spacings on [-2L, 2L].
    Lattice widened() const;
    Lattice with_boundary(Boundary b) const;

    friend bool operator==(const Lattice&, const Lattice&) = default;

private:
    Lattice(double L, double dx, double dt, double T, Boundary b, std::size_t ns, std::size_t nt)
        : half_width_(L), dx_(dx), dt_(dt), horizon_(T), boundary_(b), n_space_(ns), n_time_(nt) {}

    double half_width_;
    double dx_;
    double dt_;
    double horizon_;
    Boundary boundary_;
    std::size_t n_space_;
    std::size_t n_time_;
};

/// Grid-valued function u(t, .) on a lattice. Every entry is finite.
class Field {
public:
    /// Throws NonFiniteField naming the first bad index, LatticeMismatch on a size mismatch.
    Field(Lattice lattice, std::vector<double> values);

    static Field constant(const Lattice& lattice, double c);
    static Field from_function(const Lattice& lattice, const std::function<double(double)>& f);
    /// Unit-mass spike at the grid point nearest to x0 (value 1/dx there, 0 elsewhere).
    static Field delta(const Lattice& lattice, double x0 = 0.0);

    const Lattice& lattice() const noexcept { return lattice_; }
    std::span<const double> values() const noexcept { return values_; }
    std::size_t size() const noexcept { return values_.size(); }
    double operator[](std::size_t j) const noexcept { return values_[j]; }

    /// Sum over cells of f(x_j) g(x_j) dx.
    double inner(const Field& other) const;

    Field operator+(const Field& other) const;
    Field scaled(double alpha) const;

private:
    Lattice lattice_;
    std::vector<double> values_;
};

/// max_j |f(x_j)| e^{-lambda |x_j|}; lambda > 0 gives tempered norms, lambda < 0 rapid-decay norms.
double weighted_sup_norm(const Field& f, double lambda);

/// Weighted norms sampled at every grid point of a recorded path, for several weights.
struct CtemRow {
    double lambda;
    double sup_norm;
};

struct Trajectory;
std::vector<CtemRow> ctem_profile(const Trajectory& traj, std::span<const double> lambdas);

}  // namespace shelab
