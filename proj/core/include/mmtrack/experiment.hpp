#pragma once

#include <filesystem>

#include "mmtrack/evaluation.hpp"
#include "mmtrack/scene.hpp"
#include "mmtrack/tracking.hpp"

namespace mmtrack
{

struct RunConfig
{
  Scene scene = default_scene();
  TrackerConfig tracker;
  int trajectories = 8;
  double duration = 3.0; // s per trajectory
  double speed_kmh = 60.0;
  std::uint64_t seed = 1;
  int jobs = 1;
  std::filesystem::path output_dir = "out";
};

void validate(const RunConfig &cfg);

/// Lossless JSON form. Keys present in `text` override `base`; unknown keys
/// are rejected with Config errors naming them.
std::string to_json(const RunConfig &cfg);
RunConfig run_config_from_json(std::string_view text, RunConfig base = {});
std::string to_json(const Scene &scene);
Scene scene_from_json(std::string_view text, Scene base = default_scene());

struct TrajectorySpec
{
  int id = 0;
  Vec2 start = Vec2::Zero();
  std::uint64_t seed = 0;
};

/// Start points alternate between lanes; each starts upstream of the BS at
/// a seeded offset.
std::vector<TrajectorySpec> plan_trajectories(const RunConfig &cfg);

/// Runs every planned trajectory (up to cfg.jobs at a time) and returns the
/// records grouped by trajectory id, in id order.
std::vector<FrameRecord> run_experiment(const RunConfig &cfg);

} // namespace mmtrack
