#pragma once

#include <cstdint>
#include <string>

#include "mmtrack/geometry.hpp"
#include "mmtrack/signal_model.hpp"

namespace mmtrack
{

/// Vertical rectangle. `normal` is horizontal and points into the street;
/// the rectangle spans [u_min, u_max] along normal x z and [z_min, z_max].
struct Wall
{
  std::string name;
  Vec3 point = Vec3::Zero();
  Vec3 normal = Vec3::UnitY();
  double u_min = -1e3;
  double u_max = 1e3;
  double z_min = 0.0;
  double z_max = 30.0;
  double loss_db = 6.0;
};

struct GroundPlane
{
  bool enabled = true;
  double z = 0.0;
  double loss_db = 8.0;
};

struct Lane
{
  double y = 1.5;
  double roof_height = 1.6;
  double half_width = 1.75;
  int direction = 1; // +1 drives toward +x, -1 toward -x
  double speed_limit_kmh = 60.0;
};

/// Identical roof panels at the vehicle reference point, each tilted from
/// vertical toward one of the vehicle's four sides.
struct PanelConfig
{
  int count = 4;
  double tilt = deg2rad(10.0);
  int nx = 12;
  int ny = 12;
};

/// LOS blockage events arrive as a Poisson process; durations are exponential.
struct BlockageConfig
{
  double rate_hz = 0.5;
  double mean_duration = 0.15;
};

struct Scene
{
  Vec3 bs_position{0.0, 9.5, 10.0};
  double bs_facing_az = -kPi / 2; // horizontal direction the BS panel faces
  double bs_downtilt = deg2rad(20.0);
  int bs_nx = 16;
  int bs_ny = 16;
  std::vector<Wall> walls;
  GroundPlane ground;
  std::vector<Lane> lanes;
  PanelConfig panels;
  BlockageConfig blockage;
  bool second_order = true;
  double second_order_extra_loss_db = 3.0;
  double clock_offset_max = 50e-9;
  double fc = 73e9;
  std::uint64_t seed = 1;

  ArrayGeometry bs_array() const;
  /// Panel orientations for a vehicle at `position` heading along `forward`.
  std::vector<ArrayGeometry> vehicle_panels(const Vec3 &position, const Vec3 &forward) const;
  double wavelength() const { return kSpeedOfLight / fc; }
};

void validate(const Scene &scene);

/// Two-wall street canyon with the BS on one facade and two opposing lanes.
Scene default_scene();

struct TrajectoryFrame
{
  int index = 0;
  double t = 0.0;
  Vec3 position = Vec3::Zero();
  Vec3 velocity = Vec3::Zero();
  Mat3 heading = Mat3::Identity();
  std::vector<PathParams> true_paths; // visible to the active panel, sorted by ToA
  bool los_blocked = false;
  int active_panel = 0;
  double clock_offset = 0.0;
};

/// Every specular path up to second order between the BS and `rx` (plus
/// LOS unless blocked), without visibility filtering. ToA includes
/// `clock_offset`; TDoA is relative to the earliest returned path.
std::vector<PathParams> trace_paths(const Scene &scene, const Vec3 &rx, double clock_offset, bool los_blocked);

/// Paths leaving the BS array's front half-space or arriving behind `panel`
/// are removed.
std::vector<PathParams> visible_paths(const std::vector<PathParams> &paths, const ArrayGeometry &bs,
                                      const ArrayGeometry &panel);

/// Straight constant-speed drive along the lane containing `start_xy`,
/// sampled every `tp`. Blockage and clock offset are drawn from `seed`.
std::vector<TrajectoryFrame> generate_trajectory(const Scene &scene, const Vec2 &start_xy, double speed_kmh,
                                                 double duration, double tp, std::uint64_t seed);

/// Lane index containing `xy`, or -1.
int lane_of(const Scene &scene, const Vec2 &xy);

ChannelTensor frame_to_channel(const TrajectoryFrame &frame, const Scene &scene, const WaveformConfig &cfg,
                               const ArrayGeometry &tx, const ArrayGeometry &rx);

} // namespace mmtrack
