#pragma once

#include <filesystem>

#include "shelab/solver.hpp"

namespace shelab {

/// Columns t,x,u; one row per recorded time and grid point.
void write_trajectory_csv(const Trajectory& traj, const std::filesystem::path& path);

/**
 * Binary layout: 8-byte magic, u64 header length, JSON header (provenance,
 * lattice, recorded times), then row-major float64 values, one row per time.
 */
void write_trajectory_binary(const Trajectory& traj, const std::filesystem::path& path);
Trajectory read_trajectory_binary(const std::filesystem::path& path);

}  // namespace shelab
