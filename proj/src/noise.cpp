#include "shelab/noise.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>

#include <fmt/core.h>

#include "shelab/errors.hpp"

namespace shelab {

namespace {

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;
constexpr std::array<char, 8> kSheetMagic{'S', 'H', 'E', 'N', 'O', 'I', 'S', '1'};

constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

// Grid lookups: t and x must sit on (or within rounding of) grid lines.
std::size_t grid_index(double value, double spacing, const char* what) {
    const double q = value / spacing;
    const double r = std::round(q);
    if (std::abs(q - r) > 1e-9 * std::max(1.0, std::abs(r))) {
        throw OutOfDomain(fmt::format("{} = {} is not on the grid (spacing {})", what, value, spacing));
    }
    return static_cast<std::size_t>(std::abs(r));
}

}  // namespace

void fill_noise_row(std::uint64_t seed, std::size_t row, double scale, std::span<double> out) {
    const std::uint64_t key = mix64(seed ^ 0x5DEECE66DULL);
    const std::size_t pairs = (out.size() + 1) / 2;
    std::uint64_t counter = static_cast<std::uint64_t>(row) * 2 * pairs;
    constexpr double two_pi = 2.0 * std::numbers::pi;
    for (std::size_t p = 0; p < pairs; ++p) {
        const std::uint64_t a = mix64(key + (++counter) * kGolden);
        const std::uint64_t b = mix64(key + (++counter) * kGolden);
        const double u1 = static_cast<double>((a >> 11) + 1) * 0x1.0p-53;  // (0, 1]
        const double u2 = static_cast<double>(b >> 11) * 0x1.0p-53;        // [0, 1)
        const double r = std::sqrt(-2.0 * std::log(u1)) * scale;
        const double theta = two_pi * u2;
        out[2 * p] = r * std::cos(theta);
        if (2 * p + 1 < out.size()) out[2 * p + 1] = r * std::sin(theta);
    }
}

NoiseSheet::NoiseSheet(Lattice lattice, std::uint64_t seed)
    : lattice_(std::move(lattice)), seed_(seed), increments_(lattice_.n_time() * lattice_.n_cells()) {
    const double scale = std::sqrt(lattice_.dt() * lattice_.dx());
    for (std::size_t i = 0; i < rows(); ++i) {
        fill_noise_row(seed_, i, scale, {increments_.data() + i * cols(), cols()});
    }
}

void NoiseSheet::save(const std::filesystem::path& path) const {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw Error(fmt::format("cannot open '{}' for writing", path.string()));
    os.write(kSheetMagic.data(), kSheetMagic.size());
    const std::uint64_t seed = seed_;
    const std::array<double, 4> geom{lattice_.half_width(), lattice_.dx(), lattice_.dt(), lattice_.horizon()};
    os.write(reinterpret_cast<const char*>(&seed), sizeof seed);
    os.write(reinterpret_cast<const char*>(geom.data()), sizeof(double) * geom.size());
    os.write(reinterpret_cast<const char*>(increments_.data()),
             static_cast<std::streamsize>(sizeof(double) * increments_.size()));
    if (!os) throw Error(fmt::format("short write to '{}'", path.string()));
}

NoiseSheet NoiseSheet::load(const std::filesystem::path& path, Boundary boundary) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw Error(fmt::format("cannot open '{}'", path.string()));
    std::array<char, 8> magic{};
    is.read(magic.data(), magic.size());
    if (magic != kSheetMagic) throw Error(fmt::format("'{}' is not a noise sheet dump", path.string()));
    std::uint64_t seed = 0;
    std::array<double, 4> geom{};
    is.read(reinterpret_cast<char*>(&seed), sizeof seed);
    is.read(reinterpret_cast<char*>(geom.data()), sizeof(double) * geom.size());
    Lattice lattice = Lattice::build(geom[0], geom[1], geom[2], geom[3], boundary);
    std::vector<double> data(lattice.n_time() * lattice.n_cells());
    is.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(sizeof(double) * data.size()));
    if (!is) throw Error(fmt::format("truncated noise sheet dump '{}'", path.string()));
    return NoiseSheet(std::move(lattice), seed, std::move(data));
}

NoiseStream::NoiseStream(Lattice lattice, std::uint64_t seed)
    : lattice_(std::move(lattice)),
      seed_(seed),
      scale_(std::sqrt(lattice_.dt() * lattice_.dx())),
      buffer_(lattice_.n_cells()) {}

std::span<const double> NoiseStream::row(std::size_t i) {
    fill_noise_row(seed_, i, scale_, buffer_);
    return buffer_;
}

NoiseSheet sample_noise(const Lattice& lattice, std::uint64_t seed) { return NoiseSheet(lattice, seed); }

double integrate_test_function(const NoiseSheet& sheet, const std::function<double(double, double)>& phi,
                               double t_end) {
    const Lattice& lat = sheet.lattice();
    if (!(t_end >= 0.0) || t_end > lat.horizon() * (1.0 + 1e-12)) {
        throw TimeOutOfRange(fmt::format("t_end = {} outside [0, {}]", t_end, lat.horizon()));
    }
    double acc = 0.0;
    for (std::size_t i = 0; i < sheet.rows() && lat.t(i) < t_end - 1e-12 * lat.dt(); ++i) {
        const auto xi = sheet.row(i);
        const double t = lat.t(i);
        for (std::size_t j = 0; j < xi.size(); ++j) acc += phi(t, lat.x(j)) * xi[j];
    }
    return acc;
}

double brownian_sheet_value(const NoiseSheet& sheet, double t, double x) {
    const Lattice& lat = sheet.lattice();
    const double L = lat.half_width();
    if (!(t >= -1e-12) || t > lat.horizon() * (1.0 + 1e-12) || !(std::abs(x) <= L * (1.0 + 1e-12))) {
        throw OutOfDomain(fmt::format("(t, x) = ({}, {}) outside [0, {}] x [-{}, {}]", t, x, lat.horizon(), L, L));
    }
    const std::size_t origin = grid_index(L, lat.dx(), "origin offset L");
    const std::size_t n_rows = grid_index(t, lat.dt(), "t");
    const std::size_t offset = grid_index(x, lat.dx(), "x");
    const std::size_t lo = x >= 0.0 ? origin : origin - offset;
    const std::size_t hi = x >= 0.0 ? origin + offset : origin;
    double acc = 0.0;
    for (std::size_t i = 0; i < n_rows; ++i) {
        const auto xi = sheet.row(i);
        for (std::size_t j = lo; j < hi; ++j) acc += xi[j];
    }
    return x >= 0.0 ? acc : -acc;
}

}  // namespace shelab
