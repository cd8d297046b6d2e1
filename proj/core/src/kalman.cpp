#include "mmtrack/kalman.hpp"

namespace mmtrack
{

KfState kf_init(const Vec2 &xy, const Vec2 &velocity, double pos_var, double vel_var, double process_noise,
                double measurement_noise)
{
  KfState kf;
  kf.mean << xy, velocity;
  kf.cov.setZero();
  kf.cov.diagonal() << pos_var, pos_var, vel_var, vel_var;
  kf.process_noise = process_noise;
  kf.measurement_noise = measurement_noise;
  return kf;
}

Vec2 kf_update(KfState &kf, const Vec2 &measured_xy, double tp)
{
  Mat4 f = Mat4::Identity();
  f(0, 2) = tp;
  f(1, 3) = tp;
  const double q = kf.process_noise;
  Mat4 qm = Mat4::Zero();
  const double t2 = tp * tp, t3 = t2 * tp;
  for (int k = 0; k < 2; ++k) {
    qm(k, k) = q * t3 / 3.0;
    qm(k, k + 2) = qm(k + 2, k) = q * t2 / 2.0;
    qm(k + 2, k + 2) = q * tp;
  }
  kf.mean = f * kf.mean;
  kf.cov = f * kf.cov * f.transpose() + qm;

  Eigen::Matrix<double, 2, 4> h = Eigen::Matrix<double, 2, 4>::Zero();
  h(0, 0) = 1.0;
  h(1, 1) = 1.0;
  const Eigen::Matrix2d r = kf.measurement_noise * Eigen::Matrix2d::Identity();
  const Eigen::Matrix2d s = h * kf.cov * h.transpose() + r;
  Eigen::FullPivLU<Eigen::Matrix2d> lu(s);
  if (!lu.isInvertible()) return kf.mean.head<2>();
  const Eigen::Matrix<double, 4, 2> k = kf.cov * h.transpose() * lu.inverse();
  kf.mean += k * (measured_xy - h * kf.mean);
  const Mat4 a = Mat4::Identity() - k * h;
  kf.cov = a * kf.cov * a.transpose() + k * r * k.transpose();
  kf.cov = 0.5 * (kf.cov + kf.cov.transpose());
  return kf.mean.head<2>();
}

} // namespace mmtrack
