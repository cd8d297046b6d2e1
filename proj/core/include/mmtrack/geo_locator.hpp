#pragma once

#include <optional>

#include "mmtrack/common.hpp"

namespace mmtrack
{

enum class LocMode
{
  LOS_Geometric,
  NLOS_Geometric,
  DeadReckoning,
};

std::string_view to_string(LocMode mode);

/// Paths carry world-frame angles, so the vehicle orientation is not needed
/// here. DoD points from the BS along departure, DoA from the receiver
/// toward the last interaction point.
struct LocalizationInput
{
  Vec3 bs_position = Vec3::Zero();
  std::vector<PathParams> paths;
  double c = kSpeedOfLight;
  std::optional<Vec3> initial_guess; // dead-reckoned position when available
};

struct PositionEstimate
{
  Vec3 xyz = Vec3::Zero();
  Vec2 xy = Vec2::Zero();
  LocMode mode = LocMode::DeadReckoning;
  double residual = 0.0; // ||r||_2 in meters
  bool converged = true;
  int iterations = 0;
};

struct Localizability
{
  bool ok = false;
  LocMode mode = LocMode::DeadReckoning;
};

/// LOS plus at least one first-order path, or at least three first-order
/// paths without LOS.
Localizability localizable(const std::vector<PathParams> &paths);

struct SolverSettings
{
  double step_tol = 1e-10;
  int max_iterations = 100;
};

/// Unknowns: receiver position, reference range d0 and one split angle per
/// first-order path (a = L sin^2, b = L cos^2 with L = d0 + c*tdoa).
/// Throws NotLocalizable; a run that hits the iteration cap returns its best
/// iterate with converged = false.
PositionEstimate solve_position(const LocalizationInput &inp, const SolverSettings &settings = {});

/// prev + tp * speed.
Vec2 dead_reckon(const Vec2 &prev_xy, const Vec2 &speed, double tp);

} // namespace mmtrack
