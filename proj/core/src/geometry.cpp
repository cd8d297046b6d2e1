#include "mmtrack/geometry.hpp"

#include <algorithm>
#include <cmath>

namespace mmtrack
{

Vec3 unit_direction(double az, double el)
{
  const double ce = std::cos(el);
  return {ce * std::cos(az), ce * std::sin(az), std::sin(el)};
}

AzEl az_el(const Vec3 &direction)
{
  const Vec3 d = direction.normalized();
  AzEl out;
  out.az = std::atan2(d.y(), d.x());
  if (out.az >= kPi) out.az -= 2.0 * kPi;
  out.el = std::asin(std::clamp(d.z(), -1.0, 1.0));
  return out;
}

double angle_between(const Vec3 &a, const Vec3 &b)
{
  // atan2 form stays accurate for nearly parallel vectors.
  return std::atan2(a.cross(b).norm(), a.dot(b));
}

Mat3 frame_from_broadside(const Vec3 &broadside, const Vec3 &x_hint)
{
  const Vec3 ez = broadside.normalized();
  Vec3 ex = x_hint - x_hint.dot(ez) * ez;
  if (ex.norm() < 1e-12) throw Error(ErrorCode::InvalidArgument, "x_hint parallel to broadside");
  ex.normalize();
  const Vec3 ey = ez.cross(ex);
  Mat3 r;
  r.col(0) = ex;
  r.col(1) = ey;
  r.col(2) = ez;
  return r;
}

void validate(const ArrayGeometry &geom)
{
  if (geom.nx < 1 || geom.ny < 1) throw Error(ErrorCode::InvalidArgument, "array dimensions must be >= 1");
  if (!(geom.spacing > 0.0)) throw Error(ErrorCode::InvalidArgument, "element spacing must be positive");
  const double dev = (geom.orientation.transpose() * geom.orientation - Mat3::Identity()).norm();
  if (dev > 1e-12) throw Error(ErrorCode::InvalidArgument, "array orientation is not orthonormal");
}

ConeAngles to_cone(const ArrayGeometry &geom, const Vec3 &world_dir)
{
  const Vec3 u = geom.to_local(world_dir.normalized());
  return {std::acos(std::clamp(u.x(), -1.0, 1.0)), std::acos(std::clamp(u.y(), -1.0, 1.0))};
}

Vec3 from_cone(const ArrayGeometry &geom, const ConeAngles &cone)
{
  double ux = std::cos(cone.x);
  double uy = std::cos(cone.y);
  const double r2 = ux * ux + uy * uy;
  double uz = 0.0;
  if (r2 > 1.0) {
    const double r = std::sqrt(r2);
    ux /= r;
    uy /= r;
  } else {
    uz = std::sqrt(1.0 - r2);
  }
  return geom.to_world(Vec3(ux, uy, uz));
}

Vec3 mirror_point(const Vec3 &p, const Vec3 &point_on_plane, const Vec3 &normal)
{
  return p - 2.0 * (p - point_on_plane).dot(normal) * normal;
}

} // namespace mmtrack
