#include "shelab/io.hpp"

#include <array>
#include <fstream>

#include <fmt/core.h>
#include <fmt/os.h>
#include <json.hpp>

#include "shelab/errors.hpp"

namespace shelab {

namespace {

constexpr std::array<char, 8> kTrajMagic{'S', 'H', 'E', 'T', 'R', 'A', 'J', '1'};

nlohmann::ordered_json header_of(const Trajectory& traj) {
    const Lattice& lat = traj.lattice();
    const Provenance& p = traj.provenance;
    return {{"provenance",
             {{"seed", p.seed},
              {"sigma", p.sigma},
              {"drift", p.drift},
              {"initial", p.initial},
              {"scheme", p.scheme},
              {"positive_projection", p.positive_projection}}},
            {"lattice",
             {{"L", lat.half_width()},
              {"dx", lat.dx()},
              {"dt", lat.dt()},
              {"T", lat.horizon()},
              {"boundary", std::string(to_string(lat.boundary()))}}},
            {"times", traj.times}};
}

}  // namespace

void write_trajectory_csv(const Trajectory& traj, const std::filesystem::path& path) {
    if (traj.fields.empty()) throw EmptyInput("cannot export an empty trajectory");
    auto out = fmt::output_file(path.string());
    out.print("t,x,u\n");
    const Lattice& lat = traj.lattice();
    for (std::size_t k = 0; k < traj.fields.size(); ++k) {
        for (std::size_t j = 0; j < lat.n_space(); ++j) {
            out.print("{},{},{}\n", traj.times[k], lat.x(j), traj.fields[k][j]);
        }
    }
}

void write_trajectory_binary(const Trajectory& traj, const std::filesystem::path& path) {
    if (traj.fields.empty()) throw EmptyInput("cannot export an empty trajectory");
    std::ofstream os(path, std::ios::binary);
    if (!os) throw Error(fmt::format("cannot open '{}' for writing", path.string()));
    const std::string header = header_of(traj).dump();
    const std::uint64_t len = header.size();
    os.write(kTrajMagic.data(), kTrajMagic.size());
    os.write(reinterpret_cast<const char*>(&len), sizeof len);
    os.write(header.data(), static_cast<std::streamsize>(header.size()));
    for (const Field& f : traj.fields) {
        os.write(reinterpret_cast<const char*>(f.values().data()),
                 static_cast<std::streamsize>(sizeof(double) * f.size()));
    }
    if (!os) throw Error(fmt::format("short write to '{}'", path.string()));
}

Trajectory read_trajectory_binary(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw Error(fmt::format("cannot open '{}'", path.string()));
    std::array<char, 8> magic{};
    is.read(magic.data(), magic.size());
    if (magic != kTrajMagic) throw Error(fmt::format("'{}' is not a trajectory dump", path.string()));
    std::uint64_t len = 0;
    is.read(reinterpret_cast<char*>(&len), sizeof len);
    std::string header(len, '\0');
    is.read(header.data(), static_cast<std::streamsize>(len));
    if (!is) throw Error(fmt::format("truncated header in '{}'", path.string()));
    const auto h = nlohmann::json::parse(header);
    const auto& l = h.at("lattice");
    const Lattice lat = Lattice::build(l.at("L"), l.at("dx"), l.at("dt"), l.at("T"),
                                       parse_boundary(l.at("boundary").get<std::string>()));
    Trajectory traj;
    const auto& p = h.at("provenance");
    traj.provenance = {p.at("seed"),    p.at("sigma"),  p.at("drift"),
                       p.at("initial"), p.at("scheme"), p.at("positive_projection")};
    traj.times = h.at("times").get<std::vector<double>>();
    for (std::size_t k = 0; k < traj.times.size(); ++k) {
        std::vector<double> values(lat.n_space());
        is.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(sizeof(double) * values.size()));
        if (!is) throw Error(fmt::format("truncated payload in '{}'", path.string()));
        traj.fields.emplace_back(lat, std::move(values));
    }
    return traj;
}

}  // namespace shelab
