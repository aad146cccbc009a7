#include "shelab/kernel.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <fmt/core.h>
#include <tbb/parallel_for.h>

#include "shelab/errors.hpp"

namespace shelab {

namespace {

constexpr double kInvSqrt2Pi = 0.3989422804014327;  // 1/sqrt(2 pi)

double kernel_unchecked(double t, double x) { return kInvSqrt2Pi / std::sqrt(t) * std::exp(-x * x / (2.0 * t)); }

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

// E[e^{lambda |Y|}] for Y ~ Normal(m, v).
double abs_exp_moment(double m, double v, double lambda) {
    if (lambda == 0.0) return 1.0;
    const double sd = std::sqrt(v);
    const double base = 0.5 * lambda * lambda * v;
    return std::exp(base + lambda * m) * normal_cdf((m + lambda * v) / sd) +
           std::exp(base - lambda * m) * normal_cdf((-m + lambda * v) / sd);
}

// int e^{lambda|y|} (G_b(x'-y) - G_a(x-y))^2 dy for kernel ages a, b (<= 0 means absent).
double weighted_square_difference(double a, double b, double x, double xp, double lambda) {
    double acc = 0.0;
    if (a > 0.0) acc += kernel_unchecked(2.0 * a, 0.0) * abs_exp_moment(x, 0.5 * a, lambda);
    if (b > 0.0) acc += kernel_unchecked(2.0 * b, 0.0) * abs_exp_moment(xp, 0.5 * b, lambda);
    if (a > 0.0 && b > 0.0) {
        const double m = (b * x + a * xp) / (a + b);
        const double v = a * b / (a + b);
        acc -= 2.0 * kernel_unchecked(a + b, x - xp) * abs_exp_moment(m, v, lambda);
    }
    return std::max(acc, 0.0);
}

template <class F>
QuadratureEstimate integrate(F&& f, double lo, double hi) {
    if (!(hi > lo)) return {0.0, 0.0};
    double err = 0.0;
    const double v = boost::math::quadrature::gauss_kronrod<double, 21>::integrate(f, lo, hi, 12, 1e-9, &err);
    return {v, err};
}

}  // namespace

double heat_kernel(double t, double x) {
    if (!(t > 0.0)) throw NonPositiveTime(fmt::format("heat kernel needs t > 0, got {}", t));
    return kernel_unchecked(t, x);
}

Field semigroup_apply(const Field& f, double t) {
    if (!(t > 0.0)) throw NonPositiveTime(fmt::format("semigroup time must be positive, got {}", t));
    const Lattice& lat = f.lattice();
    const std::size_t n = lat.n_space();
    const double dx = lat.dx();
    // Beyond 40 standard deviations the kernel underflows relative to any O(1) field.
    const double reach = 40.0 * std::sqrt(t);
    std::vector<double> out(n, 0.0);

    if (lat.boundary() == Boundary::dirichlet_zero) {
        for (std::size_t i = 0; i < n; ++i) {
            double acc = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
                const double d = lat.x(i) - lat.x(j);
                if (std::abs(d) > reach || f[j] == 0.0) continue;
                const double w = (j == 0 || j == n - 1) ? 0.5 : 1.0;
                acc += w * kernel_unchecked(t, d) * f[j];
            }
            out[i] = acc * dx;
        }
    } else {
        const std::size_t cells = lat.n_cells();
        const double period = 2.0 * lat.half_width();
        const auto images = static_cast<long>(std::ceil(reach / period)) + 1;
        for (std::size_t i = 0; i < cells; ++i) {
            double acc = 0.0;
            for (std::size_t j = 0; j < cells; ++j) {
                if (f[j] == 0.0) continue;
                double k_sum = 0.0;
                for (long k = -images; k <= images; ++k) {
                    const double d = lat.x(i) - lat.x(j) + static_cast<double>(k) * period;
                    if (std::abs(d) <= reach) k_sum += kernel_unchecked(t, d);
                }
                acc += k_sum * f[j];
            }
            out[i] = acc * dx;
        }
        out[n - 1] = out[0];
    }
    return Field(lat, std::move(out));
}

QuadratureEstimate kernel_l2_increment_estimate(double t, double tp, double x, double xp, double lambda) {
    if (!(t >= 0.0) || !(tp >= 0.0) || !std::isfinite(t) || !std::isfinite(tp) || !std::isfinite(x) ||
        !std::isfinite(xp) || !(lambda >= 0.0)) {
        throw InvalidTimes(fmt::format("invalid kernel increment arguments t={} t'={} x={} x'={} lambda={}", t, tp,
                                       x, xp, lambda));
    }
    if (t == tp && x == xp) return {0.0, 0.0};
    const double t_min = std::min(t, tp);
    const double t_max = std::max(t, tp);

    // s in [0, t_min]: both kernels alive, ages (t - t_min) + tau^2 and (t' - t_min) + tau^2.
    auto both = [&](double tau) {
        const double tau2 = tau * tau;
        return 2.0 * tau * weighted_square_difference((t - t_min) + tau2, (tp - t_min) + tau2, x, xp, lambda);
    };
    // s in [t_min, t_max]: only the later kernel, age tau^2.
    const double x_late = (t > tp) ? x : xp;
    auto later = [&](double tau) {
        const double c = tau * tau;
        return 2.0 * tau * kernel_unchecked(2.0 * c, 0.0) * abs_exp_moment(x_late, 0.5 * c, lambda);
    };
    const auto first = integrate(both, 0.0, std::sqrt(t_min));
    const auto second = integrate(later, 0.0, std::sqrt(t_max - t_min));
    return {first.value + second.value, first.error + second.error};
}

double kernel_l2_increment(double t, double tp, double x, double xp, double lambda) {
    const auto est = kernel_l2_increment_estimate(t, tp, x, xp, lambda);
    if (est.error > 0.01 * est.value) {
        throw QuadratureFailure(fmt::format("kernel increment quadrature error {} exceeds 1% of {}", est.error,
                                            est.value));
    }
    return est.value;
}

std::string_view to_string(KernelLemma lemma) {
    switch (lemma) {
        case KernelLemma::pointwise_increment: return "pointwise_increment";
        case KernelLemma::l2_increment: return "l2_increment";
    }
    return "unknown";
}

KernelAuditReport audit_kernel_bounds(KernelLemma lemma, std::span<const KernelCase> sweep, double c_prime) {
    if (sweep.empty()) throw EmptySweep("kernel audit needs at least one case");
    KernelAuditReport report{lemma, c_prime, {}, 0.0, 0, 0, true};

    std::vector<KernelCase> kept;
    kept.reserve(sweep.size());
    for (const auto& c : sweep) {
        const bool tiny = lemma == KernelLemma::pointwise_increment
                              ? c.t < kMinAuditTime
                              : (c.t < kMinAuditTime || c.t_prime < kMinAuditTime);
        if (tiny) {
            ++report.excluded;
        } else {
            kept.push_back(c);
        }
    }
    report.cases.resize(kept.size());

    tbb::parallel_for(std::size_t{0}, kept.size(), [&](std::size_t k) {
        const KernelCase& c = kept[k];
        double lhs = 0.0;
        double rhs = 0.0;
        if (lemma == KernelLemma::pointwise_increment) {
            lhs = std::abs(kernel_unchecked(c.t, c.x) - kernel_unchecked(c.t, c.x_prime));
            rhs = std::abs(c.x - c.x_prime) / c.t *
                  (std::exp(-c_prime * c.x * c.x / c.t) + std::exp(-c_prime * c.x_prime * c.x_prime / c.t));
        } else {
            lhs = kernel_l2_increment(c.t, c.t_prime, c.x, c.x_prime, c.lambda);
            rhs = std::exp(c.lambda * std::abs(c.x)) * std::exp(c.lambda * std::abs(c.x - c.x_prime)) *
                  (std::sqrt(std::abs(c.t_prime - c.t)) + std::abs(c.x_prime - c.x));
        }
        const double ratio = lhs == 0.0 ? 0.0 : lhs / rhs;
        report.cases[k] = {c, lhs, rhs, ratio};
    });

    for (std::size_t k = 0; k < report.cases.size(); ++k) {
        const auto& c = report.cases[k];
        if (c.lhs != 0.0 && !(std::isfinite(c.ratio) && c.ratio > 0.0)) report.all_finite = false;
        if (std::isfinite(c.ratio) && c.ratio > report.max_ratio) {
            report.max_ratio = c.ratio;
            report.argmax = k;
        }
    }
    return report;
}

namespace {

std::vector<double> linspace(double lo, double hi, std::size_t n) {
    std::vector<double> v(n);
    if (n == 1) {
        v[0] = lo;
        return v;
    }
    for (std::size_t k = 0; k < n; ++k) v[k] = lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(n - 1);
    return v;
}

}  // namespace

std::vector<KernelCase> pointwise_increment_sweep(std::size_t n) {
    const auto ts = linspace(0.01, 1.0, n);
    const auto xs = linspace(-5.0, 5.0, n);
    std::vector<KernelCase> out;
    out.reserve(n * n * n);
    for (double t : ts)
        for (double x : xs)
            for (double y : xs) out.push_back({t, t, x, y, 0.0});
    return out;
}

std::vector<KernelCase> l2_increment_sweep(std::size_t n, double lambda, double horizon, double max_dx) {
    const auto ts = linspace(horizon / 20.0, horizon, n);
    const auto xs = linspace(-2.0, 2.0, n);
    const auto ds = linspace(-max_dx, max_dx, n);
    std::vector<KernelCase> out;
    out.reserve(n * n * n * n);
    for (double t : ts)
        for (double tp : ts)
            for (double x : xs)
                for (double d : ds) out.push_back({t, tp, x, x + d, lambda});
    return out;
}

RefinementVerdict compare_refinement(const KernelAuditReport& coarse, const KernelAuditReport& fine,
                                     double tolerance) {
    RefinementVerdict v{};
    v.coarse_max = coarse.max_ratio;
    v.fine_max = fine.max_ratio;
    v.relative_change = coarse.max_ratio > 0.0 ? std::abs(fine.max_ratio - coarse.max_ratio) / coarse.max_ratio
                                               : (fine.max_ratio > 0.0 ? INFINITY : 0.0);
    v.bounded = coarse.all_finite && fine.all_finite && fine.max_ratio <= 10.0 * coarse.max_ratio;
    v.stable = v.bounded && v.relative_change <= tolerance;
    return v;
}

}  // namespace shelab
