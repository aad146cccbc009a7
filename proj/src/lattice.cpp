#include "shelab/lattice.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/core.h>

#include "shelab/errors.hpp"
#include "shelab/solver.hpp"

namespace shelab {

namespace {

// Relative slack for "a divides b": float spacings like 0.1 never divide exactly.
constexpr double kDivisibilityTol = 1e-9;

std::size_t checked_ratio(double num, double den, const char* what) {
    const double q = num / den;
    const double r = std::round(q);
    if (r < 1.0 || std::abs(q - r) > kDivisibilityTol * std::max(1.0, r)) {
        throw GeometryError(fmt::format("{}: {} / {} = {} is not a positive integer", what, num, den, q));
    }
    return static_cast<std::size_t>(r);
}

}  // namespace

std::string_view to_string(Boundary b) {
    switch (b) {
        case Boundary::dirichlet_zero: return "dirichlet_zero";
        case Boundary::periodic: return "periodic";
    }
    return "unknown";
}

Boundary parse_boundary(std::string_view s) {
    if (s == "dirichlet_zero" || s == "dirichlet") return Boundary::dirichlet_zero;
    if (s == "periodic") return Boundary::periodic;
    throw GeometryError(fmt::format("unknown boundary rule '{}'", s));
}

Lattice Lattice::build(double L, double dx, double dt, double T, Boundary boundary) {
    for (auto [name, v] : {std::pair{"half_width", L}, {"dx", dx}, {"dt", dt}, {"horizon", T}}) {
        if (!(v > 0.0) || !std::isfinite(v)) {
            throw GeometryError(fmt::format("{} must be positive and finite, got {}", name, v));
        }
    }
    const std::size_t cells = checked_ratio(2.0 * L, dx, "2L/dx");
    const std::size_t steps = checked_ratio(T, dt, "T/dt");
    if (cells + 1 < 3) {
        throw GeometryError(fmt::format("need at least 3 grid points, got {}", cells + 1));
    }
    if (dt > 0.5 * dx * dx * (1.0 + 1e-12)) {
        throw StabilityViolation(
            fmt::format("dt = {} exceeds the explicit-scheme bound dx^2/2 = {}", dt, 0.5 * dx * dx));
    }
    return Lattice(L, dx, dt, T, boundary, cells + 1, steps);
}

Lattice Lattice::refined() const {
    return build(half_width_, dx_ / 2.0, dt_ / 4.0, horizon_, boundary_);
}

Lattice Lattice::widened() const {
    return build(2.0 * half_width_, dx_, dt_, horizon_, boundary_);
}

Lattice Lattice::with_boundary(Boundary b) const {
    Lattice copy = *this;
    copy.boundary_ = b;
    return copy;
}

Field::Field(Lattice lattice, std::vector<double> values)
    : lattice_(std::move(lattice)), values_(std::move(values)) {
    if (values_.size() != lattice_.n_space()) {
        throw LatticeMismatch(
            fmt::format("field has {} values, lattice has {} points", values_.size(), lattice_.n_space()));
    }
    for (std::size_t j = 0; j < values_.size(); ++j) {
        if (!std::isfinite(values_[j])) {
            throw NonFiniteField(fmt::format("non-finite field value {} at index {}", values_[j], j), j);
        }
    }
}

Field Field::constant(const Lattice& lattice, double c) {
    return Field(lattice, std::vector<double>(lattice.n_space(), c));
}

Field Field::from_function(const Lattice& lattice, const std::function<double(double)>& f) {
    std::vector<double> v(lattice.n_space());
    for (std::size_t j = 0; j < v.size(); ++j) v[j] = f(lattice.x(j));
    return Field(lattice, std::move(v));
}

Field Field::delta(const Lattice& lattice, double x0) {
    std::vector<double> v(lattice.n_space(), 0.0);
    const double pos = (x0 + lattice.half_width()) / lattice.dx();
    const auto j = static_cast<std::size_t>(std::clamp(std::round(pos), 0.0, double(v.size() - 1)));
    v[j] = 1.0 / lattice.dx();
    return Field(lattice, std::move(v));
}

double Field::inner(const Field& other) const {
    if (!(lattice_ == other.lattice_)) throw LatticeMismatch("inner product of fields on different lattices");
    double acc = 0.0;
    for (std::size_t j = 0; j < lattice_.n_cells(); ++j) acc += values_[j] * other.values_[j];
    return acc * lattice_.dx();
}

Field Field::operator+(const Field& other) const {
    if (!(lattice_ == other.lattice_)) throw LatticeMismatch("sum of fields on different lattices");
    std::vector<double> v(values_);
    for (std::size_t j = 0; j < v.size(); ++j) v[j] += other.values_[j];
    return Field(lattice_, std::move(v));
}

Field Field::scaled(double alpha) const {
    std::vector<double> v(values_);
    for (double& e : v) e *= alpha;
    return Field(lattice_, std::move(v));
}

double weighted_sup_norm(const Field& f, double lambda) {
    const Lattice& lat = f.lattice();
    double best = 0.0;
    for (std::size_t j = 0; j < f.size(); ++j) {
        best = std::max(best, std::abs(f[j]) * std::exp(-lambda * std::abs(lat.x(j))));
    }
    return best;
}

std::vector<CtemRow> ctem_profile(const Trajectory& traj, std::span<const double> lambdas) {
    if (lambdas.empty()) throw EmptyInput("ctem_profile needs at least one weight exponent");
    if (traj.fields.empty()) throw EmptyInput("ctem_profile on an empty trajectory");
    std::vector<CtemRow> rows;
    rows.reserve(lambdas.size());
    for (double lambda : lambdas) {
        double sup = 0.0;
        for (const Field& f : traj.fields) sup = std::max(sup, weighted_sup_norm(f, lambda));
        rows.push_back({lambda, sup});
    }
    return rows;
}

}  // namespace shelab
