#pragma once

#include <iosfwd>

#include "mmtrack/scene.hpp"
#include "mmtrack/tracking.hpp"

namespace mmtrack
{

/// Frame records as JSON Lines, one record per line; read_records inverts
/// write_records exactly.
void write_records(std::ostream &out, const std::vector<FrameRecord> &records);
std::vector<FrameRecord> read_records(std::istream &in);

/// Ground-truth trajectory export: one frame per line with position,
/// velocity, heading, blockage, active panel and true paths.
void write_trajectory(std::ostream &out, const std::vector<TrajectoryFrame> &frames, int traj_id);

} // namespace mmtrack
