#include <cmath>

#include <gtest/gtest.h>

#include "shelab/coefficients.hpp"
#include "shelab/errors.hpp"
#include "shelab/kernel.hpp"
#include "shelab/noise.hpp"
#include "shelab/solver.hpp"

using namespace shelab;

namespace {

SolverConfig cfg_for(const Lattice& lat, std::size_t every = 1) { return {lat, 1e9, every, false, {}}; }

bool same(const Trajectory& a, const Trajectory& b) {
    if (a.times != b.times || a.fields.size() != b.fields.size()) return false;
    for (std::size_t k = 0; k < a.fields.size(); ++k) {
        if (!std::equal(a.fields[k].values().begin(), a.fields[k].values().end(), b.fields[k].values().begin())) {
            return false;
        }
    }
    return true;
}

}  // namespace

TEST(EmStep, ConstantsAreHarmonic) {
    const auto lat = Lattice::build(2, 0.1, 0.005, 1, Boundary::periodic);
    const std::vector<double> row(lat.n_cells(), 0.0);
    const auto u = em_step(Field::constant(lat, 3.0), row, zero_coefficient(), zero_coefficient(), 0, lat);
    for (std::size_t j = 0; j < lat.n_space(); ++j) EXPECT_EQ(u[j], 3.0);

    const auto d = Lattice::build(2, 0.1, 0.005, 1);
    const auto v = em_step(Field::constant(d, 3.0), row, zero_coefficient(), zero_coefficient(), 0, d);
    EXPECT_EQ(v[0], 0.0);
    EXPECT_EQ(v[d.n_space() - 1], 0.0);
    for (std::size_t j = 2; j + 2 < d.n_space(); ++j) EXPECT_EQ(v[j], 3.0);
}

TEST(EmStep, UnitDriftAddsDt) {
    const auto lat = Lattice::build(2, 0.1, 0.005, 1);
    const std::vector<double> row(lat.n_cells(), 0.0);
    const auto u0 = Field::from_function(lat, [](double x) { return std::exp(-x * x); });
    const auto heat = em_step(u0, row, zero_coefficient(), zero_coefficient(), 0, lat);
    const auto forced = em_step(u0, row, zero_coefficient(), constant_coefficient(1.0), 0, lat);
    for (std::size_t j = 1; j + 1 < lat.n_space(); ++j) {
        EXPECT_NEAR(forced[j] - heat[j], lat.dt(), 1e-15);
        const double lap = (u0[j + 1] - 2 * u0[j] + u0[j - 1]) / (lat.dx() * lat.dx());
        EXPECT_NEAR(heat[j], u0[j] + 0.5 * lat.dt() * lap, 1e-15);
    }
}

TEST(EmStep, AdditiveNoiseVariance) {
    const auto lat = Lattice::build(10, 0.05, 0.001, 1);
    double sq = 0.0;
    std::size_t n = 0;
    for (std::uint64_t s = 0; s < 200; ++s) {
        NoiseStream noise(lat, s);
        const auto u = em_step(Field::constant(lat, 0.0), noise.row(0), constant_coefficient(1.0), zero_coefficient(),
                               0, lat);
        for (std::size_t j = 1; j + 1 < lat.n_space(); ++j, ++n) sq += u[j] * u[j];
    }
    EXPECT_NEAR(sq / double(n) / (lat.dt() / lat.dx()), 1.0, 0.02);
}

TEST(Simulate, UnitDriftPeriodicIsTime) {
    const auto lat = Lattice::build(1, 0.1, 0.005, 1, Boundary::periodic);
    const NoiseSheet noise(lat, 1);
    const auto traj =
        simulate(cfg_for(lat, 10), Field::constant(lat, 0.0), zero_coefficient(), constant_coefficient(1.0), noise);
    ASSERT_EQ(traj.times.size(), 21u);
    for (std::size_t k = 0; k < traj.fields.size(); ++k) {
        for (std::size_t j = 0; j < lat.n_space(); ++j) EXPECT_NEAR(traj.fields[k][j], traj.times[k], 1e-12);
    }
}

TEST(Simulate, DeltaFollowsTheSemigroup) {
    double prev = INFINITY;
    for (double dx : {0.1, 0.05}) {
        const auto lat = Lattice::build(5, dx, dx * dx / 4, 0.5);
        const NoiseSheet noise(lat, 1);
        const auto traj = simulate(cfg_for(lat, lat.n_time()), Field::delta(lat, 0.0), zero_coefficient(),
                                   zero_coefficient(), noise);
        const auto exact = semigroup_apply(traj.fields.front(), 0.5);
        double err = 0.0;
        for (std::size_t j = 0; j < lat.n_space(); ++j) {
            if (std::abs(lat.x(j)) <= 5 - 6 * std::sqrt(0.5)) err = std::max(err, std::abs(traj.fields.back()[j] - exact[j]));
        }
        EXPECT_LT(err, dx);
        EXPECT_LT(err, prev);
        prev = err;
    }
}

TEST(Simulate, DeterministicAndStreamEqualsSheet) {
    const auto lat = Lattice::build(2, 0.1, 0.005, 0.5);
    const NoiseSheet sheet(lat, 77);
    NoiseStream stream(lat, 77);
    const auto sigma = power_sigma(0.8);
    const auto b = power_drift(0.9);
    const auto u0 = Field::constant(lat, 1.0);
    const auto a = simulate(cfg_for(lat), u0, sigma, b, sheet, "const:1");
    const auto c = simulate(cfg_for(lat), u0, sigma, b, sheet, "const:1");
    const auto s = simulate(cfg_for(lat), u0, sigma, b, stream, "const:1");
    EXPECT_TRUE(same(a, c));
    EXPECT_TRUE(same(a, s));
    EXPECT_EQ(a.provenance.seed, 77u);
    EXPECT_EQ(a.provenance.sigma, "power_sigma:0.8");
    EXPECT_EQ(a.provenance.initial, "const:1");
    EXPECT_EQ(a.provenance.scheme, kSchemeVersion);
}

TEST(Simulate, RecordEveryKeepsFinalLevel) {
    const auto lat = Lattice::build(1, 0.1, 0.005, 0.1);  // 20 steps
    const NoiseSheet noise(lat, 1);
    const auto traj = simulate(cfg_for(lat, 7), Field::constant(lat, 0.0), constant_coefficient(1.0),
                               zero_coefficient(), noise);
    const std::vector<double> want{0.0, 7 * 0.005, 14 * 0.005, 0.1};
    ASSERT_EQ(traj.times.size(), want.size());
    for (std::size_t k = 0; k < want.size(); ++k) EXPECT_NEAR(traj.times[k], want[k], 1e-12);
}

TEST(Simulate, BlowUpIsReported) {
    const auto lat = Lattice::build(1, 0.1, 0.005, 1);
    const NoiseSheet noise(lat, 1);
    SolverConfig cfg{lat, 1e3, 1, false, {}};
    EXPECT_THROW(simulate(cfg, Field::constant(lat, 1.0), zero_coefficient(), linear_coefficient(50.0), noise), BlowUp);
    const auto other = Lattice::build(2, 0.1, 0.005, 1);
    EXPECT_THROW(simulate(cfg, Field::constant(other, 1.0), zero_coefficient(), zero_coefficient(), noise),
                 LatticeMismatch);
}

TEST(Simulate, PositiveProjection) {
    const auto lat = Lattice::build(2, 0.1, 0.005, 0.5);
    const NoiseSheet noise(lat, 3);
    SolverConfig cfg{lat, 1e9, 1, true, {}};
    const auto traj = simulate(cfg, Field::constant(lat, 0.1), constant_coefficient(1.0), zero_coefficient(), noise);
    EXPECT_TRUE(traj.provenance.positive_projection);
    for (const auto& f : traj.fields) {
        for (std::size_t j = 0; j < f.size(); ++j) EXPECT_GE(f[j], 0.0);
    }
}

TEST(SimulateCoupled, SharesNoise) {
    const auto lat = Lattice::build(2, 0.1, 0.005, 0.5);
    const NoiseSheet noise(lat, 5);
    const auto u0 = Field::constant(lat, 1.0);
    const auto [a, b] = simulate_coupled(cfg_for(lat), u0, u0, linear_coefficient(1.0), power_drift(0.9),
                                         power_drift(0.9), noise);
    EXPECT_TRUE(same(a, b));
    const auto single = simulate(cfg_for(lat), u0, linear_coefficient(1.0), power_drift(0.9), noise);
    EXPECT_TRUE(same(a, single));

    std::size_t calls = 0;
    SolverConfig counted{lat, 1e9, 1, false, [&](std::size_t, std::span<const double>) { ++calls; }};
    simulate_coupled(counted, u0, u0, linear_coefficient(1.0), zero_coefficient(), zero_coefficient(), noise);
    EXPECT_EQ(calls, 2 * lat.n_time());

    EXPECT_THROW(simulate_coupled(cfg_for(lat), Field::constant(lat, 2.0), u0, linear_coefficient(1.0),
                                  zero_coefficient(), zero_coefficient(), noise),
                 InitialOrderViolation);
}

TEST(SimulateCoupled, OrderingWithLinearSigma) {
    const auto lat = Lattice::build(5, 0.1, 0.005, 0.5);
    const auto u0 = Field::constant(lat, 1.0);
    for (std::uint64_t s = 0; s < 20; ++s) {
        const NoiseSheet noise(lat, s);
        const auto [lo, hi] = simulate_coupled(cfg_for(lat), u0, u0, linear_coefficient(1.0), zero_coefficient(),
                                               constant_coefficient(1.0), noise);
        for (std::size_t k = 0; k < lo.fields.size(); ++k) {
            for (std::size_t j = 0; j < lat.n_space(); ++j) ASSERT_GE(hi.fields[k][j], lo.fields[k][j] - 10 * lat.dx());
        }
    }
}

TEST(MildResidual, ZeroSolutionHasZeroResidual) {
    const auto lat = Lattice::build(10, 0.1, 0.005, 0.5);
    const NoiseSheet noise(lat, 1);
    const auto traj = simulate(cfg_for(lat), Field::constant(lat, 0.0), power_sigma(0.8), power_drift(0.9), noise);
    const auto phi = Field::from_function(lat, [](double x) { return std::abs(x) < 2 ? std::pow(4 - x * x, 3) : 0.0; });
    for (double r : mild_residual(traj, phi, noise, power_sigma(0.8), power_drift(0.9))) EXPECT_EQ(r, 0.0);
}

TEST(MildResidual, DeterministicResidualShrinksUnderRefinement) {
    auto phi_fn = [](double x) { return std::abs(x) < 2 ? std::pow(4 - x * x, 4) / 256.0 : 0.0; };
    double prev = INFINITY;
    for (double dx : {0.2, 0.1, 0.05}) {
        const auto lat = Lattice::build(10, dx, dx * dx / 4, 0.5);
        const NoiseSheet noise(lat, 1);
        const auto u0 = Field::from_function(lat, [](double x) { return std::exp(-x * x); });
        const auto traj = simulate(cfg_for(lat), u0, zero_coefficient(), zero_coefficient(), noise);
        const auto res = mild_residual(traj, Field::from_function(lat, phi_fn), noise, zero_coefficient(),
                                       zero_coefficient());
        const double worst = *std::max_element(res.begin(), res.end());
        EXPECT_LT(worst, prev / 2.5) << dx;
        prev = worst;
    }
}

TEST(MildResidual, StochasticResidualShrinksUnderRefinement) {
    auto phi_fn = [](double x) { return std::abs(x) < 2 ? std::pow(4 - x * x, 4) / 256.0 : 0.0; };
    const auto sigma = power_sigma(0.8);
    const auto b = power_drift(0.9);
    std::vector<double> mean;
    for (double dx : {0.2, 0.1, 0.05}) {
        const auto lat = Lattice::build(10, dx, dx * dx / 4, 0.25);
        double acc = 0.0;
        for (std::uint64_t s = 0; s < 20; ++s) {
            const NoiseSheet noise(lat, s);
            const auto traj = simulate(cfg_for(lat), Field::constant(lat, 1.0), sigma, b, noise);
            const auto res = mild_residual(traj, Field::from_function(lat, phi_fn), noise, sigma, b);
            acc += *std::max_element(res.begin(), res.end()) / 20.0;
        }
        mean.push_back(acc);
    }
    // Joint refinement quarters dt each time; an O(dt^{1/4}) rate would give a factor sqrt(2) per step.
    EXPECT_LT(mean[1], mean[0] / std::sqrt(2.0));
    EXPECT_LT(mean[2], mean[1] / std::sqrt(2.0));
}

TEST(MildResidual, TestFunctionMustStayInside) {
    const auto lat = Lattice::build(5, 0.1, 0.005, 1);
    const NoiseSheet noise(lat, 1);
    const auto traj = simulate(cfg_for(lat), Field::constant(lat, 0.0), zero_coefficient(), zero_coefficient(), noise);
    EXPECT_THROW(mild_residual(traj, Field::constant(lat, 1.0), noise, zero_coefficient(), zero_coefficient()),
                 SupportViolation);
}

TEST(LadderSequence, LipschitzDriftAgreesWithDirectRun) {
    const auto lat = Lattice::build(5, 0.1, 0.005, 0.5);
    const NoiseSheet noise(lat, 4);
    const auto b = linear_coefficient(-1.0);
    const MollifierLadder ladder(b);
    const int levels[] = {4, 8};
    const auto u0 = Field::constant(lat, 1.0);
    const auto seq = ladder_solution_sequence(cfg_for(lat), u0, constant_coefficient(0.5), ladder, noise, levels, 12);
    const auto direct = simulate(cfg_for(lat), u0, constant_coefficient(0.5), b, noise);
    for (const auto& t : seq) {
        double gap = 0.0;
        for (std::size_t k = 0; k < t.fields.size(); ++k) {
            for (std::size_t j = 0; j < lat.n_space(); ++j) gap = std::max(gap, std::abs(t.fields[k][j] - direct.fields[k][j]));
        }
        EXPECT_LT(gap, 1e-5);
    }
    const int bad[] = {8, 4};
    EXPECT_THROW(ladder_solution_sequence(cfg_for(lat), u0, constant_coefficient(0.5), ladder, noise, bad, 12),
                 ParameterOutOfRegime);
}

TEST(LadderSequence, MonotoneInN) {
    const auto lat = Lattice::build(5, 0.1, 0.005, 0.5);
    const NoiseSheet noise(lat, 8);
    const MollifierLadder ladder(power_drift(0.9));
    const int levels[] = {4, 8, 12};
    const auto seq = ladder_solution_sequence(cfg_for(lat), Field::constant(lat, 1.0), power_sigma(0.8), ladder,
                                              noise, levels, 16);
    ASSERT_EQ(seq.size(), 3u);
    for (std::size_t a = 0; a + 1 < seq.size(); ++a) {
        for (std::size_t k = 0; k < seq[a].fields.size(); ++k) {
            for (std::size_t j = 0; j < lat.n_space(); ++j) {
                EXPECT_LE(seq[a].fields[k][j], seq[a + 1].fields[k][j] + 10 * lat.dx());
            }
        }
    }
}

TEST(Holder, SmoothPathIsRejected) {
    const auto lat = Lattice::build(10, 0.05, 0.001, 1);
    const NoiseSheet noise(lat, 1);
    const auto traj = simulate(cfg_for(lat), Field::from_function(lat, [](double x) { return std::exp(-x * x); }),
                               zero_coefficient(), zero_coefficient(), noise);
    EXPECT_THROW(holder_exponent_estimate(traj, HolderAxis::time), DegenerateTrajectory);
    EXPECT_THROW(holder_exponent_estimate(traj, HolderAxis::space), DegenerateTrajectory);
    const auto zero = simulate(cfg_for(lat), Field::constant(lat, 0.0), zero_coefficient(), zero_coefficient(), noise);
    EXPECT_THROW(holder_exponent_estimate(zero, HolderAxis::time), DegenerateTrajectory);
}

TEST(Holder, AdditiveNoiseIsRough) {
    const auto lat = Lattice::build(10, 0.05, 0.001, 1);
    NoiseStream noise(lat, 2);
    const auto traj = simulate(cfg_for(lat), Field::constant(lat, 0.0), constant_coefficient(1.0), zero_coefficient(), noise);
    HolderOptions t;
    t.min_lag = 4;
    t.max_lag = 128;
    const auto te = holder_exponent_estimate(traj, HolderAxis::time, t);
    EXPECT_GT(te.exponent, 0.15);
    EXPECT_LT(te.exponent, 0.35);
    EXPECT_LE(te.ci_low, te.exponent);
    EXPECT_GE(te.ci_high, te.exponent);
    HolderOptions s;
    s.min_lag = 2;
    s.max_lag = 8;
    const auto se = holder_exponent_estimate(traj, HolderAxis::space, s);
    EXPECT_GT(se.exponent, 0.3);
    EXPECT_LT(se.exponent, 0.6);
}

TEST(Summarize, StudentInterval) {
    const double xs[] = {1, 2, 3, 4, 5};
    const auto s = summarize(xs);
    EXPECT_DOUBLE_EQ(s.mean, 3.0);
    EXPECT_NEAR(s.stddev, std::sqrt(2.5), 1e-14);
    // t_{0.975, 4} = 2.7764451051977987
    const double half = 2.7764451051977987 * std::sqrt(2.5) / std::sqrt(5.0);
    EXPECT_NEAR(s.ci_low, 3.0 - half, 1e-12);
    EXPECT_NEAR(s.ci_high, 3.0 + half, 1e-12);
    const double one[] = {1.0};
    EXPECT_THROW(summarize(one), InsufficientEnsemble);
}

TEST(Consistency, SecondOrderInDx) {
    const double dxs[] = {0.1, 0.05, 0.025};
    const auto rows = consistency_study(10, 1, dxs);
    ASSERT_EQ(rows.size(), 3u);
    EXPECT_TRUE(std::isnan(rows[0].order));
    for (std::size_t k = 1; k < rows.size(); ++k) {
        EXPECT_GT(rows[k].order, 1.8);
        EXPECT_LT(rows[k].sup_error, rows[k - 1].sup_error);
    }
}
