#include "shelab/coefficients.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <mutex>
#include <random>

#include <boost/math/special_functions/legendre.hpp>
#include <fmt/core.h>
#include <tbb/parallel_for.h>
#include <tbb/task_arena.h>

#include "shelab/errors.hpp"
#include "shelab/noise.hpp"

namespace shelab {

Coefficient::Coefficient(Fn fn, CoefficientMeta meta) : fn_(std::move(fn)), meta_(std::move(meta)) {
    if (meta_.holder_index && !(*meta_.holder_index > 0.75 && *meta_.holder_index <= 1.0)) {
        throw ParameterOutOfRegime(
            fmt::format("coefficient '{}' declares Hoelder index {} outside (3/4, 1]", meta_.label, *meta_.holder_index));
    }
}

Coefficient zero_coefficient() {
    return {[](double, double, double) { return 0.0; }, {"zero", 0.0, 1.0, 0.0, true}};
}

Coefficient constant_coefficient(double c) {
    return {[c](double, double, double) { return c; },
            {fmt::format("const:{}", c), std::abs(c), 1.0, 0.0, true}};
}

Coefficient linear_coefficient(double a) {
    return {[a](double, double, double u) { return a * u; },
            {fmt::format("linear:{}", a), std::abs(a), 1.0, std::abs(a), true}};
}

Coefficient power_sigma(double p) {
    if (!(p > 0.0 && p <= 1.0)) throw ParameterOutOfRegime(fmt::format("power_sigma exponent {} not in (0, 1]", p));
    CoefficientMeta meta{fmt::format("power_sigma:{}", p), 1.0, std::nullopt, std::nullopt, true};
    if (p > 0.75) meta.holder_index = p;
    if (p == 1.0) meta.lipschitz_constant = 1.0;
    return {[p](double, double, double u) { return std::pow(std::abs(u), p); }, std::move(meta)};
}

Coefficient power_drift(double q, double shift) {
    if (!(q > 0.0 && q <= 1.0)) throw ParameterOutOfRegime(fmt::format("power_drift exponent {} not in (0, 1]", q));
    CoefficientMeta meta{shift == 0.0 ? fmt::format("power_drift:{}", q) : fmt::format("power_drift:{}:{}", q, shift),
                         1.0 + std::abs(shift), std::nullopt, std::nullopt, true};
    if (q == 1.0) meta.lipschitz_constant = 1.0;
    return {[q, shift](double, double, double u) { return shift - std::pow(std::abs(u), q); }, std::move(meta)};
}

Coefficient sqrt_plus() {
    return {[](double, double, double u) { return std::sqrt(std::max(u, 0.0)); },
            {"sqrt", 1.0, std::nullopt, std::nullopt, true}};
}

Coefficient truncated_in_time(const Coefficient& c, double t_stop) {
    CoefficientMeta meta = c.meta();
    meta.label = fmt::format("{}*1(t<={})", c.label(), t_stop);
    meta.autonomous = false;
    return {[c, t_stop](double t, double x, double u) { return t <= t_stop ? c(t, x, u) : 0.0; }, std::move(meta)};
}

Coefficient product(const Coefficient& c1, const Coefficient& c2, bool negate, std::string label) {
    CoefficientMeta meta;
    meta.label = label.empty() ? fmt::format("{}({})*({})", negate ? "-" : "", c1.label(), c2.label()) : std::move(label);
    meta.autonomous = c1.meta().autonomous && c2.meta().autonomous;
    const double sign = negate ? -1.0 : 1.0;
    return {[c1, c2, sign](double t, double x, double u) { return sign * (c1(t, x, u) * c2(t, x, u)); },
            std::move(meta)};
}

Coefficient predictable_drift(const Coefficient& base, std::shared_ptr<const NoiseSheet> noise, double amplitude) {
    const Lattice& lat = noise->lattice();
    const std::size_t ns = lat.n_space();
    const double origin_pos = lat.half_width() / lat.dx();
    if (std::abs(origin_pos - std::round(origin_pos)) > 1e-9 * origin_pos) {
        throw GeometryError("predictable drift needs x = 0 on the grid");
    }
    const auto origin = static_cast<std::size_t>(std::round(origin_pos));
    // sheet[i][j] = W(t_i, x_j), built from rows < i only.
    auto sheet = std::make_shared<std::vector<double>>((lat.n_time() + 1) * ns, 0.0);
    std::vector<double> col_acc(lat.n_cells(), 0.0);
    for (std::size_t i = 1; i <= lat.n_time(); ++i) {
        const auto xi = noise->row(i - 1);
        for (std::size_t j = 0; j < col_acc.size(); ++j) col_acc[j] += xi[j];
        double* w = sheet->data() + i * ns;
        for (std::size_t j = origin; j + 1 < ns; ++j) w[j + 1] = w[j] + col_acc[j];
        for (std::size_t j = origin; j > 0; --j) w[j - 1] = w[j] - col_acc[j - 1];
    }
    CoefficientMeta meta = base.meta();
    meta.label = fmt::format("{}+{}*tanh(W)", base.label(), amplitude);
    meta.autonomous = false;
    if (meta.growth_constant) meta.growth_constant = *meta.growth_constant + std::abs(amplitude);
    meta.holder_index.reset();
    return {[base, sheet, lat, amplitude, ns](double t, double x, double u) {
                const auto i = static_cast<std::size_t>(
                    std::clamp(std::floor(t / lat.dt() + 1e-9), 0.0, double(lat.n_time())));
                const auto j = static_cast<std::size_t>(
                    std::clamp(std::round((x + lat.half_width()) / lat.dx()), 0.0, double(ns - 1)));
                return base(t, x, u) + amplitude * std::tanh((*sheet)[i * ns + j]);
            },
            std::move(meta)};
}

namespace {

std::vector<std::string_view> split(std::string_view s, char sep) {
    std::vector<std::string_view> parts;
    std::size_t start = 0;
    while (true) {
        const auto pos = s.find(sep, start);
        parts.push_back(s.substr(start, pos - start));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return parts;
}

double parse_number(std::string_view s, std::string_view label) {
    const std::string text(s);
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(text, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used == 0 || used != text.size() || !std::isfinite(v)) {
        throw ConfigError(fmt::format("bad number '{}' in coefficient label '{}'", s, label));
    }
    return v;
}

}  // namespace

Coefficient resolve_coefficient(std::string_view label) {
    const auto parts = split(label, ':');
    const std::string_view kind = parts[0];
    auto arg = [&](std::size_t k) { return parse_number(parts.at(k), label); };
    try {
        if (kind == "zero" && parts.size() == 1) return zero_coefficient();
        if (kind == "sqrt" && parts.size() == 1) return sqrt_plus();
        if (kind == "const" && parts.size() == 2) return constant_coefficient(arg(1));
        if (kind == "linear" && parts.size() == 2) return linear_coefficient(arg(1));
        if (kind == "power_sigma" && parts.size() == 2) return power_sigma(arg(1));
        if (kind == "power_drift" && parts.size() == 2) return power_drift(arg(1));
        if (kind == "power_drift" && parts.size() == 3) return power_drift(arg(1), arg(2));
    } catch (const ParameterOutOfRegime& e) {
        throw ConfigError(fmt::format("coefficient '{}': {}", label, e.what()));
    }
    throw ConfigError(fmt::format("unknown coefficient label '{}'", label));
}

// ---------------------------------------------------------------------------

double cutoff(int n, double x) {
    const double a = std::abs(x);
    const double lo = static_cast<double>(n);
    if (a <= lo) return 1.0;
    if (a >= lo + 2.0) return 0.0;
    const double s = (a - lo) / 2.0;
    return 1.0 - s * s * s * (10.0 - 15.0 * s + 6.0 * s * s);
}

namespace {

struct GaussRule {
    std::vector<double> nodes;
    std::vector<double> weights;
};

GaussRule make_gauss_rule(int n) {
    GaussRule rule;
    for (double z : boost::math::legendre_p_zeros<double>(n)) {
        const double dp = boost::math::legendre_p_prime(n, z);
        const double w = 2.0 / ((1.0 - z * z) * dp * dp);
        rule.nodes.push_back(z);
        rule.weights.push_back(w);
        if (z != 0.0) {
            rule.nodes.push_back(-z);
            rule.weights.push_back(w);
        }
    }
    return rule;
}

const GaussRule& gauss_rule(int n) {
    static const GaussRule r8 = make_gauss_rule(8);
    static const GaussRule r16 = make_gauss_rule(16);
    return n == 8 ? r8 : r16;
}

struct PanelSums {
    double fine = 0.0;
    double coarse = 0.0;
    double fine_abs = 0.0;
};

// Composite Gauss-Legendre on [a, b] in the variable tau, u' = a + (b - a) s(tau) with s the
// quintic smoothstep: nodes cluster at both ends, which tames endpoint kinks at breakpoints.
template <class F>
void integrate_segment(F&& f, double a, double b, std::size_t panels, PanelSums& acc) {
    const GaussRule& g16 = gauss_rule(16);
    const GaussRule& g8 = gauss_rule(8);
    const double len = b - a;
    const double h = 1.0 / static_cast<double>(panels);
    auto mapped = [&](double tau) {
        const double s = tau * tau * tau * (10.0 - 15.0 * tau + 6.0 * tau * tau);
        const double ds = 30.0 * tau * tau * (1.0 - tau) * (1.0 - tau);
        return f(a + len * s) * len * ds;
    };
    for (std::size_t p = 0; p < panels; ++p) {
        const double mid = (static_cast<double>(p) + 0.5) * h;
        for (std::size_t k = 0; k < g16.nodes.size(); ++k) {
            const double v = mapped(mid + 0.5 * h * g16.nodes[k]) * g16.weights[k] * 0.5 * h;
            acc.fine += v;
            acc.fine_abs += std::abs(v);
        }
        for (std::size_t k = 0; k < g8.nodes.size(); ++k) {
            acc.coarse += mapped(mid + 0.5 * h * g8.nodes[k]) * g8.weights[k] * 0.5 * h;
        }
    }
}

}  // namespace

double mollify_drift(const Coefficient& b, int m, double t, double x, double u, const MollifyOptions& opts) {
    if (m < 1 || m > MollifierLadder::kMaxLevel) {
        throw ParameterOutOfRegime(fmt::format("mollification level {} outside [1, {}]", m, MollifierLadder::kMaxLevel));
    }
    const double var = std::ldexp(1.0, -m);
    const double sd = std::sqrt(var);
    const double edge = static_cast<double>(m) + 2.0;
    const double lo = std::max(u - opts.support_sds * sd, -edge);
    const double hi = std::min(u + opts.support_sds * sd, edge);
    if (!(hi > lo)) return 0.0;

    std::array<double, 7> cuts{};
    std::size_t n_cuts = 0;
    cuts[n_cuts++] = lo;
    for (double bp : {-edge, -static_cast<double>(m), 0.0, static_cast<double>(m), edge}) {
        if (bp > lo && bp < hi) cuts[n_cuts++] = bp;
    }
    cuts[n_cuts++] = hi;

    const double norm = 1.0 / std::sqrt(2.0 * M_PI * var);
    auto integrand = [&](double v) {
        const double d = u - v;
        return b(t, x, v) * norm * std::exp(-d * d / (2.0 * var)) * cutoff(m, v);
    };
    const std::size_t total_panels = std::max<std::size_t>(1, opts.nodes / 16);
    const double span_len = hi - lo;
    PanelSums sums;
    for (std::size_t s = 0; s + 1 < n_cuts; ++s) {
        const double frac = (cuts[s + 1] - cuts[s]) / span_len;
        const auto panels = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(frac * total_panels)));
        integrate_segment(integrand, cuts[s], cuts[s + 1], panels, sums);
    }
    const double err = std::abs(sums.fine - sums.coarse);
    if (err > opts.rel_tol * sums.fine_abs + opts.abs_tol) {
        throw QuadratureFailure(fmt::format("mollified drift b_{}({}, {}, {}): error estimate {} exceeds {} x {} + {}", m,
                                            t, x, u, err, opts.rel_tol, sums.fine_abs, opts.abs_tol));
    }
    return sums.fine;
}

// ---------------------------------------------------------------------------

struct MollifierLadder::State {
    Coefficient base;
    MollifyOptions quad;
    LadderCachePolicy cache;
    std::size_t n_grid = 0;
    std::array<std::once_flag, kMaxLevel + 1> once;
    std::array<std::vector<double>, kMaxLevel + 1> tables;

    State(Coefficient b, MollifyOptions q, LadderCachePolicy c) : base(std::move(b)), quad(q), cache(c) {
        if (tabulated()) {
            n_grid = static_cast<std::size_t>(std::floor((cache.u_max - cache.u_min) / cache.step + 1e-9)) + 1;
        }
    }

    bool tabulated() const { return cache.tabulate && base.meta().autonomous && cache.u_max > cache.u_min; }

    const std::vector<double>& table(int m) {
        std::call_once(once[static_cast<std::size_t>(m)], [&] {
            std::vector<double> values(n_grid);
            // Isolated so this thread cannot pick up an outer task that waits on the same flag.
            tbb::this_task_arena::isolate([&] {
                tbb::parallel_for(std::size_t{0}, n_grid, [&](std::size_t i) {
                    const double u = cache.u_min + static_cast<double>(i) * cache.step;
                    values[i] = mollify_drift(base, m, 0.0, 0.0, u, quad);
                });
            });
            tables[static_cast<std::size_t>(m)] = std::move(values);
        });
        return tables[static_cast<std::size_t>(m)];
    }
};

MollifierLadder::MollifierLadder(Coefficient base, MollifyOptions quadrature, LadderCachePolicy cache)
    : state_(std::make_shared<State>(std::move(base), quadrature, cache)) {}

const Coefficient& MollifierLadder::base() const { return state_->base; }
const MollifyOptions& MollifierLadder::quadrature() const { return state_->quad; }
const LadderCachePolicy& MollifierLadder::cache_policy() const { return state_->cache; }

double MollifierLadder::mollified(int m, double t, double x, double u) const {
    return mollify_drift(state_->base, m, t, x, u, state_->quad);
}

double MollifierLadder::eval(int n, int k, double t, double x, double u) const {
    if (n < 1 || k < n || k > kMaxLevel) {
        throw ParameterOutOfRegime(fmt::format("ladder indices need 1 <= n <= k <= {}, got n={} k={}", kMaxLevel, n, k));
    }
    double best = mollified(n, t, x, u);
    for (int m = n + 1; m <= k; ++m) best = std::min(best, mollified(m, t, x, u));
    return best;
}

Coefficient MollifierLadder::drift(int n, int k) const {
    if (n < 1 || k < n || k > kMaxLevel) {
        throw ParameterOutOfRegime(fmt::format("ladder indices need 1 <= n <= k <= {}, got n={} k={}", kMaxLevel, n, k));
    }
    CoefficientMeta meta;
    meta.label = fmt::format("ladder[{}]:{}:{}", state_->base.label(), n, k);
    meta.growth_constant = state_->base.meta().growth_constant;
    meta.autonomous = state_->base.meta().autonomous;
    MollifierLadder self = *this;
    if (!state_->tabulated()) {
        return {[self, n, k](double t, double x, double u) { return self.eval(n, k, t, x, u); }, std::move(meta)};
    }
    auto mins = std::make_shared<std::vector<double>>(state_->table(n));
    for (int m = n + 1; m <= k; ++m) {
        const auto& tab = state_->table(m);
        for (std::size_t i = 0; i < mins->size(); ++i) (*mins)[i] = std::min((*mins)[i], tab[i]);
    }
    const double u0 = state_->cache.u_min;
    const double h = state_->cache.step;
    const double last = static_cast<double>(mins->size() - 1);
    return {[self, mins, u0, h, last, n, k](double t, double x, double u) {
                const double pos = (u - u0) / h;
                if (!(pos >= 0.0 && pos <= last)) return self.eval(n, k, t, x, u);
                const double cell = std::min(std::floor(pos), last - 1.0);
                const double w = pos - cell;
                const auto i = static_cast<std::size_t>(cell);
                return (1.0 - w) * (*mins)[i] + w * (*mins)[i + 1];
            },
            std::move(meta)};
}

double MollifierLadder::convergence_gap(int n, int k, std::span<const double> us, double t, double x) const {
    if (k - 4 < n) throw ParameterOutOfRegime("convergence gap needs k - 4 >= n");
    double gap = 0.0;
    for (double u : us) gap = std::max(gap, std::abs(eval(n, k, t, x, u) - eval(n, k - 4, t, x, u)));
    return gap;
}

double ladder_eval(const MollifierLadder& ladder, int n, int k, double t, double x, double u) {
    return ladder.eval(n, k, t, x, u);
}

// ---------------------------------------------------------------------------

namespace {

std::vector<double> lin(double lo, double hi, std::size_t n) {
    std::vector<double> v;
    if (n <= 1) return {lo};
    for (std::size_t k = 0; k < n; ++k) v.push_back(lo + (hi - lo) * double(k) / double(n - 1));
    return v;
}

std::vector<double> u_grid(const SampleSpec& s) {
    std::vector<double> us{0.0};
    const double l0 = std::log(s.u_min_mag);
    const double l1 = std::log(s.u_max_mag);
    for (std::size_t k = 0; k < s.n_u; ++k) {
        const double mag = s.n_u == 1 ? s.u_min_mag : std::exp(l0 + (l1 - l0) * double(k) / double(s.n_u - 1));
        us.push_back(mag);
        us.push_back(-mag);
    }
    return us;
}

struct Recorder {
    ConditionReport report;

    void add(double t, double x, double u, double up, double lhs, double rhs) {
        ++report.n_checked;
        double ratio = 0.0;
        if (lhs > 0.0) ratio = rhs > 0.0 ? lhs / rhs : INFINITY;
        const Witness w{t, x, u, up, lhs, rhs};
        if (ratio > report.worst_ratio || (!report.worst && ratio >= 0.0)) {
            if (ratio >= report.worst_ratio) {
                report.worst_ratio = ratio;
                report.worst = w;
            }
        }
        if (lhs > rhs * (1.0 + 1e-9) + 1e-300) {
            if (report.passed) report.first_violation = w;
            report.passed = false;
        }
    }
};

template <class Pair>
void for_each_pair(const SampleSpec& s, Pair&& visit) {
    const auto ts = lin(0.0, s.t_max, s.n_t);
    const auto xs = lin(-s.x_max, s.x_max, s.n_x);
    const auto us = u_grid(s);
    for (double t : ts) {
        for (double x : xs) {
            for (double u : us) {
                for (double g : s.gaps) {
                    visit(t, x, u, u + g);
                    visit(t, x, u, u - g);
                }
            }
            for (std::size_t a = 0; a < us.size(); a += 3) {
                for (std::size_t b = a + 3; b < us.size(); b += 3) visit(t, x, us[a], us[b]);
            }
        }
    }
    std::mt19937_64 rng(s.seed);
    std::uniform_real_distribution<double> ut(0.0, s.t_max), ux(-s.x_max, s.x_max), uu(-s.random_u_max, s.random_u_max);
    for (std::size_t k = 0; k < s.n_random; ++k) {
        const double t = ut(rng), x = ux(rng), u = uu(rng), up = uu(rng);
        visit(t, x, u, up);
    }
}

}  // namespace

ConditionReport check_growth(const Coefficient& c, double C, const SampleSpec& s) {
    Recorder rec;
    rec.report.condition = fmt::format("growth |c| <= {} (1 + |u|)", C);
    const auto ts = lin(0.0, s.t_max, s.n_t);
    const auto xs = lin(-s.x_max, s.x_max, s.n_x);
    for (double t : ts)
        for (double x : xs)
            for (double u : u_grid(s)) rec.add(t, x, u, u, std::abs(c(t, x, u)), C * (1.0 + std::abs(u)));
    std::mt19937_64 rng(s.seed);
    std::uniform_real_distribution<double> ut(0.0, s.t_max), ux(-s.x_max, s.x_max), uu(-s.random_u_max, s.random_u_max);
    for (std::size_t k = 0; k < s.n_random; ++k) {
        const double t = ut(rng), x = ux(rng), u = uu(rng);
        rec.add(t, x, u, u, std::abs(c(t, x, u)), C * (1.0 + std::abs(u)));
    }
    return rec.report;
}

ConditionReport check_holder_sigma(const Coefficient& sigma, double gamma, double R0, double R1, double R2,
                                   const SampleSpec& s) {
    if (!(gamma > 0.0 && gamma <= 1.0)) {
        throw ParameterOutOfRegime(fmt::format("Hoelder index {} not in (0, 1]", gamma));
    }
    Recorder rec;
    rec.report.condition = fmt::format("hoelder gamma={} R0={} R1={} R2={}", gamma, R0, R1, R2);
    for_each_pair(s, [&](double t, double x, double u, double up) {
        const double gap = std::abs(u - up);
        const double lhs = std::abs(sigma(t, x, u) - sigma(t, x, up));
        const double rhs =
            R0 * std::exp(R1 * std::abs(x)) * std::pow(1.0 + std::abs(u) + std::abs(up), R2) * std::pow(gap, gamma);
        rec.add(t, x, u, up, lhs, rhs);
    });
    return rec.report;
}

ConditionReport check_lipschitz(const Coefficient& b, double B, const SampleSpec& s) {
    Recorder rec;
    rec.report.condition = fmt::format("lipschitz B={}", B);
    for_each_pair(s, [&](double t, double x, double u, double up) {
        rec.add(t, x, u, up, std::abs(b(t, x, u) - b(t, x, up)), B * std::abs(u - up));
    });
    return rec.report;
}

PowerLawPair power_law_pair(double p, double q) {
    if (!(p > 0.75 && p < q && q <= 1.0)) {
        throw ParameterOutOfRegime(fmt::format("power-law pair needs 3/4 < p < q <= 1, got p={} q={}", p, q));
    }
    const double r = q - p;
    Coefficient ratio{[r](double, double, double u) { return std::pow(std::abs(u), r); },
                      {fmt::format("power_ratio:{}", r), 1.0, std::nullopt, std::nullopt, true}};
    return {power_sigma(p), power_drift(q), std::move(ratio)};
}

}  // namespace shelab
