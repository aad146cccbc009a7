#include "shelab/girsanov.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/core.h>

#include "shelab/errors.hpp"

namespace shelab {

GridField GridField::constant(const Lattice& lattice, double c) {
    GridField z{lattice, {}, std::vector<double>((lattice.n_time() + 1) * lattice.n_space(), c)};
    for (std::size_t i = 0; i <= lattice.n_time(); ++i) z.times.push_back(lattice.t(i));
    return z;
}

GridField z_field(const Coefficient& b, const Coefficient& sigma, const Trajectory& traj, double atol) {
    if (traj.fields.empty()) throw EmptyInput("z_field on an empty trajectory");
    const Lattice& lat = traj.lattice();
    GridField z{lat, traj.times, {}};
    z.values.reserve(traj.fields.size() * lat.n_space());
    for (std::size_t r = 0; r < traj.fields.size(); ++r) {
        const double t = traj.times[r];
        const Field& u = traj.fields[r];
        for (std::size_t j = 0; j < lat.n_space(); ++j) {
            const double x = lat.x(j);
            const double s = sigma(t, x, u[j]);
            const double d = b(t, x, u[j]);
            if (std::abs(s) > 0.0) {
                z.values.push_back(d / s);
            } else if (std::abs(d) <= atol) {
                z.values.push_back(0.0);
            } else {
                throw AssumptionAViolation(
                    fmt::format("sigma vanishes but b = {} at t = {}, x = {}, u = {}", d, t, x, u[j]), t, x, u[j], d);
            }
        }
    }
    return z;
}

namespace {

template <class RowSource>
GirsanovWeight accumulate(const GridField& z, const Lattice& lat, std::uint64_t seed, RowSource&& row_of) {
    if (!(z.lattice == lat)) throw LatticeMismatch("Z field and noise are on different lattices");
    if (z.times.empty() || z.times.front() != 0.0) throw EmptyInput("Z field must start at t = 0");
    GirsanovWeight w;
    w.seed = seed;
    w.times.push_back(0.0);
    w.log_L.push_back(0.0);
    w.quad_var.push_back(0.0);
    const double cell = lat.dt() * lat.dx();
    double stoch = 0.0;
    double qv = 0.0;
    std::size_t r = 0;
    for (std::size_t i = 0; i < lat.n_time(); ++i) {
        const double t = lat.t(i);
        while (r + 1 < z.rows() && z.times[r + 1] <= t + 1e-9 * lat.dt()) ++r;
        const auto xi = row_of(i);
        const double* zr = z.values.data() + r * lat.n_space();
        double row_stoch = 0.0;
        double row_sq = 0.0;
        for (std::size_t j = 0; j < xi.size(); ++j) {
            row_stoch += zr[j] * xi[j];
            row_sq += zr[j] * zr[j];
        }
        stoch += row_stoch;
        qv += row_sq * cell;
        w.times.push_back(lat.t(i + 1));
        w.log_L.push_back(stoch - 0.5 * qv);
        w.quad_var.push_back(qv);
    }
    return w;
}

}  // namespace

GirsanovWeight log_weight(const GridField& z, const NoiseSheet& noise) {
    return accumulate(z, noise.lattice(), noise.seed(), [&](std::size_t i) { return noise.row(i); });
}

GirsanovWeight log_weight(const GridField& z, NoiseStream& noise) {
    return accumulate(z, noise.lattice(), noise.seed(), [&](std::size_t i) { return noise.row(i); });
}

NovikovEstimate novikov_estimate(const GridField& z) {
    const Lattice& lat = z.lattice;
    const double cell = lat.dt() * lat.dx();
    double qv = 0.0;
    std::size_t r = 0;
    for (std::size_t i = 0; i < lat.n_time(); ++i) {
        while (r + 1 < z.rows() && z.times[r + 1] <= lat.t(i) + 1e-9 * lat.dt()) ++r;
        for (std::size_t j = 0; j < lat.n_cells(); ++j) qv += z.at(r, j) * z.at(r, j) * cell;
    }
    const double one = qv;
    return novikov_estimate(std::span<const double>(&one, 1));
}

NovikovEstimate novikov_estimate(std::span<const double> quad_var_totals) {
    if (quad_var_totals.empty()) throw EmptyInput("Novikov estimate needs at least one realization");
    NovikovEstimate est;
    double moment = 0.0;
    for (double qv : quad_var_totals) {
        est.quad_var_total += qv;
        if (0.5 * qv > 700.0) est.overflow = true;
        moment += std::exp(std::min(0.5 * qv, 700.0));
    }
    const auto n = static_cast<double>(quad_var_totals.size());
    est.quad_var_total /= n;
    if (!est.overflow) est.exp_moment = moment / n;
    return est;
}

StoppingState stopping_time(std::span<const double> times, std::span<const double> acc1,
                            std::span<const double> acc2, double K) {
    if (!(K > 0.0)) throw ParameterOutOfRegime(fmt::format("stopping level K must be positive, got {}", K));
    if (acc1.size() != times.size() || acc2.size() != times.size()) {
        throw LatticeMismatch("accumulators and times differ in length");
    }
    for (std::size_t i = 1; i < times.size(); ++i) {
        if (acc1[i] < acc1[i - 1] || acc2[i] < acc2[i - 1]) {
            throw NonMonotoneAccumulator(fmt::format("accumulator decreases at t = {}", times[i]));
        }
    }
    StoppingState st{K, std::nullopt, {acc1.begin(), acc1.end()}, {acc2.begin(), acc2.end()}};
    for (std::size_t i = 0; i < times.size(); ++i) {
        if (std::max(acc1[i], acc2[i]) > K) {
            st.T_K = times[i];
            break;
        }
    }
    return st;
}

MeanWeightTest mean_weight_test(std::span<const GirsanovWeight> ensemble) {
    std::vector<double> log_LT, qv;
    for (const auto& w : ensemble) {
        log_LT.push_back(w.log_LT());
        qv.push_back(w.quad_var_T());
    }
    return mean_weight_test(log_LT, qv);
}

MeanWeightTest mean_weight_test(std::span<const double> log_LT, std::span<const double> quad_var_T) {
    if (log_LT.size() != quad_var_T.size()) throw LatticeMismatch("log L_T and quad-var lists differ in length");
    if (log_LT.size() < kMinWeightEnsemble) {
        throw InsufficientEnsemble(
            fmt::format("mean weight test needs at least {} realizations, got {}", kMinWeightEnsemble, log_LT.size()));
    }
    MeanWeightTest res;
    res.n = log_LT.size();
    const auto n = static_cast<double>(res.n);
    for (std::size_t k = 0; k < res.n; ++k) {
        res.mean_LT += std::exp(log_LT[k]);
        res.mean_quad_var += quad_var_T[k];
        res.max_quad_var = std::max(res.max_quad_var, quad_var_T[k]);
    }
    res.mean_LT /= n;
    res.mean_quad_var /= n;
    double var = 0.0;
    for (double l : log_LT) {
        const double d = std::exp(l) - res.mean_LT;
        var += d * d;
    }
    res.stderr_LT = std::sqrt(var / (n - 1.0) / n);
    res.passed = std::abs(res.mean_LT - 1.0) <= 3.0 * res.stderr_LT;
    res.high_variance = res.mean_quad_var > 1.0;
    return res;
}

}  // namespace shelab
