#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "shelab/lattice.hpp"

namespace shelab {

/// Gaussian density G_t(x) = exp(-x^2 / 2t) / sqrt(2 pi t). Throws NonPositiveTime for t <= 0.
double heat_kernel(double t, double x);

/// (G_t f)(x_i) as a Riemann sum over the lattice, honouring its boundary rule
/// (zero extension for dirichlet_zero, periodic images for periodic).
Field semigroup_apply(const Field& f, double t);

struct QuadratureEstimate {
    double value;
    double error;
};

/**
 * int_0^{t v t'} int_R e^{lambda |y|} (G_{t'-s}(x'-y) - G_{t-s}(x-y))^2 dy ds, with G_s = 0 for s <= 0.
 *
 * The y-integral is evaluated in closed form (products of Gaussians against
 * e^{lambda|y|} reduce to normal CDFs); the s-integral is adaptive
 * Gauss-Kronrod after the substitution s = s_end - tau^2, which removes the
 * (s_end - s)^{-1/2} endpoint singularities.
 */
QuadratureEstimate kernel_l2_increment_estimate(double t, double t_prime, double x, double x_prime, double lambda);

/// Value of kernel_l2_increment_estimate; QuadratureFailure if the error estimate exceeds 1% of it.
double kernel_l2_increment(double t, double t_prime, double x, double x_prime, double lambda);

enum class KernelLemma {
    /// |G_t(x) - G_t(y)| against |x-y| t^{-1} (e^{-C' x^2/t} + e^{-C' y^2/t}).
    pointwise_increment,
    /// kernel_l2_increment against e^{lambda|x|} e^{lambda|x-x'|} (|t'-t|^{1/2} + |x'-x|).
    l2_increment,
};

std::string_view to_string(KernelLemma lemma);

/// One audit point. For pointwise_increment, (t, x, x_prime) play the roles of (t, x, y).
struct KernelCase {
    double t;
    double t_prime;
    double x;
    double x_prime;
    double lambda;
};

struct KernelAuditCase {
    KernelCase at;
    double lhs;
    double rhs_shape;
    double ratio;
};

struct KernelAuditReport {
    KernelLemma lemma;
    double c_prime;
    std::vector<KernelAuditCase> cases;
    double max_ratio = 0.0;
    std::size_t argmax = 0;
    /// Cases with a time below kMinAuditTime (kernel blow-up region), skipped.
    std::size_t excluded = 0;
    /// False if some non-degenerate case produced a non-finite or non-positive ratio.
    bool all_finite = true;
};

inline constexpr double kMinAuditTime = 1e-4;
inline constexpr double kDefaultCPrime = 0.25;

/// Evaluates every case; parallel over cases. Throws EmptySweep.
KernelAuditReport audit_kernel_bounds(KernelLemma lemma, std::span<const KernelCase> sweep,
                                      double c_prime = kDefaultCPrime);

/// n^3 cases: t in [0.01, 1], x, y in [-5, 5].
std::vector<KernelCase> pointwise_increment_sweep(std::size_t n);

/// n^4 cases: t, t' in [T/20, T], x in [-2, 2], x' - x in [-max_dx, max_dx].
std::vector<KernelCase> l2_increment_sweep(std::size_t n, double lambda, double horizon = 1.0,
                                           double max_dx = 1.0);

struct RefinementVerdict {
    double coarse_max;
    double fine_max;
    double relative_change;
    /// fine_max <= 10 * coarse_max.
    bool bounded;
    /// relative_change <= tolerance.
    bool stable;
};

RefinementVerdict compare_refinement(const KernelAuditReport& coarse, const KernelAuditReport& fine,
                                     double tolerance = 0.2);

}  // namespace shelab
