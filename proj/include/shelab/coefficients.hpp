#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace shelab {

class NoiseSheet;

/// Declared regularity of a coefficient. Unset fields mean "not claimed".
struct CoefficientMeta {
    std::string label;
    /// C in |c(t,x,u)| <= C (1 + |u|).
    std::optional<double> growth_constant;
    /// Hoelder index in u; when declared it must lie in (3/4, 1].
    std::optional<double> holder_index;
    /// B in |c(t,x,u) - c(t,x,u')| <= B |u - u'|.
    std::optional<double> lipschitz_constant;
    /// Depends on u only; lets the ladder tabulate it.
    bool autonomous = false;
};

/// A real function of (t, x, u) with regularity metadata. Evaluation is reentrant.
class Coefficient {
public:
    using Fn = std::function<double(double t, double x, double u)>;

    Coefficient(Fn fn, CoefficientMeta meta);

    double operator()(double t, double x, double u) const { return fn_(t, x, u); }
    const CoefficientMeta& meta() const noexcept { return meta_; }
    const std::string& label() const noexcept { return meta_.label; }

private:
    Fn fn_;
    CoefficientMeta meta_;
};

Coefficient zero_coefficient();
Coefficient constant_coefficient(double c);
/// u -> a u
Coefficient linear_coefficient(double a);
/// u -> |u|^p
Coefficient power_sigma(double p);
/// u -> -|u|^q + shift
Coefficient power_drift(double q, double shift = 0.0);
/// u -> sqrt(max(u, 0))
Coefficient sqrt_plus();
/// (t, x, u) -> c(t, x, u) 1{t <= t_stop}
Coefficient truncated_in_time(const Coefficient& c, double t_stop);
/// (t, x, u) -> c1(t, x, u) * c2(t, x, u), optionally negated.
Coefficient product(const Coefficient& c1, const Coefficient& c2, bool negate = false, std::string label = {});

/**
 * Random drift base(t, x, u) + amplitude * tanh(W(t_i, x_j)), where t_i is the
 * last grid time not after t and x_j the nearest grid point to x. W(t_i, .)
 * only involves noise rows before t_i, so the drift is predictable.
 */
Coefficient predictable_drift(const Coefficient& base, std::shared_ptr<const NoiseSheet> noise, double amplitude);

/**
 * Registry lookup by label:
 *   "zero", "const:c", "linear:a", "power_sigma:p", "power_drift:q[:shift]", "sqrt".
 * Throws ConfigError for anything else.
 */
Coefficient resolve_coefficient(std::string_view label);

// ---------------------------------------------------------------------------
// Mollification

/// Smooth symmetric cutoff: 1 on [-n, n], 0 outside (-n-2, n+2), quintic smoothstep between.
double cutoff(int n, double x);

struct MollifyOptions {
    /// Integration half-width in standard deviations of G_{2^{-m}}.
    double support_sds = 8.0;
    /// Node count of the reported rule; the error estimate uses half as many.
    std::size_t nodes = 128;
    double rel_tol = 1e-4;
    /// Absolute floor of the accepted error; tail-only integrals are ~1e-30.
    double abs_tol = 1e-12;
};

/// b_m(t,x,u) = int b(t,x,u') G_{2^{-m}}(u - u') cutoff(m, u') du'. Throws QuadratureFailure.
double mollify_drift(const Coefficient& b, int m, double t, double x, double u, const MollifyOptions& opts = {});

/// Tabulation of b_m on a u-grid for autonomous drifts; lookups outside the grid fall back to quadrature.
struct LadderCachePolicy {
    bool tabulate = true;
    double u_min = -16.0;
    double u_max = 16.0;
    double step = 1.0 / 512.0;
};

/**
 * Running minima of mollified drifts: eval(n, k) = min_{m=n..k} b_m.
 *
 * Copies share one immutable base and one lazily built per-m table cache;
 * the cache is filled under std::call_once and is safe for concurrent readers.
 */
class MollifierLadder {
public:
    explicit MollifierLadder(Coefficient base, MollifyOptions quadrature = {}, LadderCachePolicy cache = {});

    const Coefficient& base() const;
    const MollifyOptions& quadrature() const;
    const LadderCachePolicy& cache_policy() const;

    /// b_m by direct quadrature.
    double mollified(int m, double t, double x, double u) const;
    /// min over m in [n, k] of b_m, by direct quadrature. Requires 1 <= n <= k.
    double eval(int n, int k, double t, double x, double u) const;
    /// Coefficient for min_{m=n..k} b_m; linear interpolation of a pre-minimized table when tabulated.
    Coefficient drift(int n, int k) const;
    /// max over us of |eval(n, k) - eval(n, k - 4)|; the truncation check for k standing in for infinity.
    double convergence_gap(int n, int k, std::span<const double> us, double t = 0.0, double x = 0.0) const;

    static constexpr int kMaxLevel = 62;

private:
    struct State;
    std::shared_ptr<State> state_;
};

double ladder_eval(const MollifierLadder& ladder, int n, int k, double t, double x, double u);

// ---------------------------------------------------------------------------
// Regularity checkers

/// Deterministic sample grid plus seeded random samples.
struct SampleSpec {
    double t_max = 1.0;
    std::size_t n_t = 3;
    double x_max = 5.0;
    std::size_t n_x = 5;
    /// |u| log-spaced over [u_min_mag, u_max_mag], both signs, plus u = 0.
    double u_min_mag = 1e-6;
    double u_max_mag = 1e6;
    std::size_t n_u = 49;
    /// Offsets |u - u'| probed around every grid u.
    std::vector<double> gaps = {1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-8, 1e-10, 1e-12};
    std::size_t n_random = 2000;
    double random_u_max = 100.0;
    std::uint64_t seed = 20240917;
};

struct Witness {
    double t;
    double x;
    double u;
    double u_prime;
    double lhs;
    double rhs;
};

struct ConditionReport {
    std::string condition;
    bool passed = true;
    /// max lhs / rhs over the samples.
    double worst_ratio = 0.0;
    std::optional<Witness> worst;
    std::optional<Witness> first_violation;
    std::size_t n_checked = 0;
};

/// |c(t,x,u)| <= C (1 + |u|).
ConditionReport check_growth(const Coefficient& c, double C, const SampleSpec& samples = {});
/// |s(t,x,u) - s(t,x,u')| <= R0 e^{R1|x|} (1 + |u| + |u'|)^{R2} |u - u'|^gamma.
ConditionReport check_holder_sigma(const Coefficient& sigma, double gamma, double R0, double R1, double R2,
                                   const SampleSpec& samples = {});
/// |b(t,x,u) - b(t,x,u')| <= B |u - u'|.
ConditionReport check_lipschitz(const Coefficient& b, double B, const SampleSpec& samples = {});

/// sigma = |u|^p, b = -|u|^q and the ratio Z = |u|^{q-p}, so that b = -Z sigma.
struct PowerLawPair {
    Coefficient sigma;
    Coefficient drift;
    Coefficient ratio;
};

/// Requires 3/4 < p < q <= 1; ParameterOutOfRegime otherwise.
PowerLawPair power_law_pair(double p, double q);

}  // namespace shelab
