#include <cmath>
#include <filesystem>

#include <gtest/gtest.h>

#include "shelab/errors.hpp"
#include "shelab/noise.hpp"

using namespace shelab;

TEST(Noise, DeterministicAndSeedDependent) {
    const auto lat = Lattice::build(2, 0.1, 0.005, 0.5);
    const auto a = sample_noise(lat, 7);
    const auto b = sample_noise(lat, 7);
    const auto c = sample_noise(lat, 8);
    ASSERT_EQ(a.increments().size(), lat.n_time() * lat.n_cells());
    EXPECT_TRUE(std::equal(a.increments().begin(), a.increments().end(), b.increments().begin()));
    EXPECT_FALSE(std::equal(a.increments().begin(), a.increments().end(), c.increments().begin()));
}

TEST(Noise, StreamMatchesSheetBitForBit) {
    const auto lat = Lattice::build(2, 0.1, 0.005, 0.5);
    const NoiseSheet sheet(lat, 42);
    NoiseStream stream(lat, 42);
    for (std::size_t i = lat.n_time(); i-- > 0;) {
        const auto r = stream.row(i);
        const auto s = sheet.row(i);
        ASSERT_EQ(r.size(), s.size());
        for (std::size_t j = 0; j < r.size(); ++j) ASSERT_EQ(r[j], s[j]);
    }
}

TEST(Noise, CellVarianceIsDtDx) {
    const auto lat = Lattice::build(10, 0.05, 0.001, 1);
    const NoiseSheet sheet(lat, 3);
    double mean = 0.0, sq = 0.0;
    const auto inc = sheet.increments();
    for (double v : inc) {
        mean += v;
        sq += v * v;
    }
    const double n = double(inc.size());
    mean /= n;
    const double var = sq / n - mean * mean;
    const double cell = lat.dt() * lat.dx();
    EXPECT_NEAR(mean / std::sqrt(cell), 0.0, 5.0 / std::sqrt(n));
    EXPECT_NEAR(var / cell, 1.0, 0.01);
}

TEST(Noise, SaveLoadRoundTrip) {
    const auto lat = Lattice::build(1, 0.25, 0.02, 0.2, Boundary::periodic);
    const NoiseSheet sheet(lat, 5);
    const auto path = std::filesystem::temp_directory_path() / "shelab_noise_roundtrip.bin";
    sheet.save(path);
    const auto back = NoiseSheet::load(path, Boundary::periodic);
    EXPECT_TRUE(back.lattice() == lat);
    EXPECT_EQ(back.seed(), 5u);
    EXPECT_TRUE(std::equal(back.increments().begin(), back.increments().end(), sheet.increments().begin()));
    std::filesystem::remove(path);
}

TEST(Noise, TestFunctionIntegral) {
    const auto lat = Lattice::build(1, 0.1, 0.005, 1);
    const NoiseSheet sheet(lat, 11);
    EXPECT_EQ(integrate_test_function(sheet, [](double, double) { return 0.0; }, 1.0), 0.0);
    const double whole = integrate_test_function(sheet, [](double, double) { return 1.0; }, 1.0);
    EXPECT_NEAR(whole, brownian_sheet_value(sheet, 1.0, 1.0) - brownian_sheet_value(sheet, 1.0, -1.0), 1e-12);
    EXPECT_THROW(integrate_test_function(sheet, [](double, double) { return 1.0; }, 1.5), TimeOutOfRange);
    EXPECT_THROW(brownian_sheet_value(sheet, 0.5, 3.0), OutOfDomain);
}

TEST(Noise, TotalMassVarianceOverSeeds) {
    // W(T, L) - W(T, -L) ~ Normal(0, 2 L T).
    const auto lat = Lattice::build(1, 0.1, 0.005, 1);
    const int n = 10000;
    double sum = 0.0, sq = 0.0;
    for (int s = 0; s < n; ++s) {
        const NoiseSheet sheet(lat, std::uint64_t(s));
        const double v = integrate_test_function(sheet, [](double, double) { return 1.0; }, 1.0);
        sum += v;
        sq += v * v;
    }
    const double mean = sum / n;
    const double var = sq / n - mean * mean;
    EXPECT_NEAR(var / 2.0, 1.0, 0.05);
    EXPECT_NEAR(mean, 0.0, 5.0 * std::sqrt(2.0 / n));
}

TEST(Noise, BrownianSheetIncrementsAreIndependentOfLaterRows) {
    const auto lat = Lattice::build(1, 0.1, 0.005, 1);
    const NoiseSheet sheet(lat, 2);
    // W(t, x) uses rows strictly before t: the value at t = 0 is zero.
    EXPECT_EQ(brownian_sheet_value(sheet, 0.0, 0.7), 0.0);
    double manual = 0.0;
    for (std::size_t i = 0; i < 10; ++i) {
        for (std::size_t j = 10; j < 15; ++j) manual += sheet.row(i)[j];
    }
    EXPECT_NEAR(brownian_sheet_value(sheet, 0.05, 0.5), manual, 1e-14);
}
