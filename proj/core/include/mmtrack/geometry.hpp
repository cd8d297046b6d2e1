#pragma once

#include "mmtrack/common.hpp"

namespace mmtrack
{

/// [cos(el)cos(az), cos(el)sin(az), sin(el)]
Vec3 unit_direction(double az, double el);

struct AzEl
{
  double az = 0.0; // [-pi, pi)
  double el = 0.0; // [-pi/2, pi/2]
};

AzEl az_el(const Vec3 &direction);

/// Great-circle angle between two (not necessarily unit) directions.
double angle_between(const Vec3 &a, const Vec3 &b);

/// Rotation whose columns are the local x/y/z axes expressed in world
/// coordinates. `broadside` becomes local z, `x_hint` is orthogonalised into
/// local x.
Mat3 frame_from_broadside(const Vec3 &broadside, const Vec3 &x_hint);

/// Uniform rectangular array lying in its local x-y plane, broadside along
/// local z. Element (ix, iy) sits at spacing*(ix, iy) wavelengths and maps to
/// flat index ix*ny + iy, so a(u) = a_x(u_x) kron a_y(u_y).
struct ArrayGeometry
{
  int nx = 1;
  int ny = 1;
  double spacing = 0.5;
  Mat3 orientation = Mat3::Identity();
  Vec3 origin = Vec3::Zero();

  int size() const { return nx * ny; }
  Vec3 broadside() const { return orientation.col(2); }
  Vec3 to_local(const Vec3 &world_dir) const { return orientation.transpose() * world_dir; }
  Vec3 to_world(const Vec3 &local_dir) const { return orientation * local_dir; }
};

void validate(const ArrayGeometry &geom);

/// Angles between a direction and the array's local x and y axes. These are
/// the parameters the per-axis dictionaries are gridded on: u_x = cos(x),
/// u_y = cos(y), both in [0, pi].
struct ConeAngles
{
  double x = kPi / 2;
  double y = kPi / 2;
};

ConeAngles to_cone(const ArrayGeometry &geom, const Vec3 &world_dir);

/// Inverse of to_cone assuming the direction lies in the array's front
/// half-space (local z >= 0). Direction cosines outside the visible disc are
/// projected onto its rim.
Vec3 from_cone(const ArrayGeometry &geom, const ConeAngles &cone);

/// Mirror a point across the plane through `point_on_plane` with unit `normal`.
Vec3 mirror_point(const Vec3 &p, const Vec3 &point_on_plane, const Vec3 &normal);

} // namespace mmtrack
