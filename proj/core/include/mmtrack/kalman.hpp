#pragma once

#include "mmtrack/common.hpp"

namespace mmtrack
{

using Vec4 = Eigen::Vector4d;
using Mat4 = Eigen::Matrix4d;

/// Constant-velocity filter over (x, y, vx, vy) with position-only
/// measurements. `process_noise` is the white-acceleration PSD (m^2/s^3),
/// `measurement_noise` the per-axis position variance (m^2).
struct KfState
{
  Vec4 mean = Vec4::Zero();
  Mat4 cov = Mat4::Identity();
  double process_noise = 1.0;
  double measurement_noise = 0.25;
};

KfState kf_init(const Vec2 &xy, const Vec2 &velocity, double pos_var, double vel_var, double process_noise,
                double measurement_noise);

/// Predict over `tp`, then update with `measured_xy` using the Joseph form.
/// The update is skipped when the innovation covariance is singular.
/// Returns the filtered position.
Vec2 kf_update(KfState &kf, const Vec2 &measured_xy, double tp);

} // namespace mmtrack
