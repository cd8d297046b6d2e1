#pragma once

#include <array>
#include <complex>
#include <numbers>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace mmtrack
{

using cd = std::complex<double>;
using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using CVec = Eigen::VectorXcd;
using CMat = Eigen::MatrixXcd;
using RVec = Eigen::VectorXd;
using RMat = Eigen::MatrixXd;

constexpr double kPi = std::numbers::pi;
constexpr double kSpeedOfLight = 299792458.0;

inline constexpr double deg2rad(double deg) { return deg * kPi / 180.0; }
inline constexpr double rad2deg(double rad) { return rad * 180.0 / kPi; }

enum class ErrorCode
{
  PathOutOfWindow,
  DimensionMismatch,
  ResolutionTooFine,
  EmptyEstimate,
  IndexOutOfRange,
  NotLocalizable,
  StartOutsideLane,
  InsufficientHistory,
  EmptyList,
  InvalidArgument,
  Config,
  Io,
};

std::string_view to_string(ErrorCode code);

// Single exception type for the library; `code()` tells callers what failed.
class Error : public std::runtime_error
{
public:
  Error(ErrorCode code, const std::string &what)
    : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code)
  {
  }

  ErrorCode code() const noexcept { return code_; }

private:
  ErrorCode code_;
};

enum class PathOrder
{
  LOS,
  FirstOrder,
  HigherOrder,
  Unknown,
};

std::string_view to_string(PathOrder order);
PathOrder path_order_from_string(std::string_view s);

/// One propagation path. Angles are in the world frame; `toa` is the observed
/// arrival time (it carries the receiver clock offset), `tdoa` is relative to
/// the earliest path of the same set.
struct PathParams
{
  cd gain{0.0, 0.0};
  double toa = 0.0;
  double tdoa = 0.0;
  double doa_az = 0.0;
  double doa_el = 0.0;
  double dod_az = 0.0;
  double dod_el = 0.0;
  PathOrder order = PathOrder::Unknown;
};

/// Per-frame channel estimate: rows sorted by descending |gain|.
struct ChannelEstimate
{
  double timestamp = 0.0;
  double t_min = 0.0;
  std::vector<PathParams> paths;
  std::vector<bool> below_noise_floor;
};

/// Recomputes `tdoa` of every path relative to the earliest one and returns
/// that earliest arrival time. Empty input returns 0.
double reference_tdoa(std::vector<PathParams> &paths);

} // namespace mmtrack
