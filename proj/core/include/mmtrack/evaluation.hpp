#pragma once

#include <map>
#include <optional>

#include "mmtrack/tracking.hpp"

namespace mmtrack
{

/// Nearest-rank percentile: the smallest value with at least p% of the list
/// at or below it. p = 0 gives the minimum. Throws EmptyList.
double percentile(std::vector<double> values, double p);

/// Per-dimension error scales of the matching metric
/// d = dDoD/dod + dDoA/doa + |dTDoA|/tdoa.
struct MatchScales
{
  double dod = deg2rad(3.0);
  double doa = deg2rad(8.0);
  double tdoa = 7e-9;
};

struct PathError
{
  int est = -1;
  int truth = -1;
  PathOrder order = PathOrder::Unknown; // label of the estimate
  double dod = 0.0;                     // rad, angle between unit vectors
  double doa = 0.0;
  double tdoa = 0.0; // s, absolute difference
};

double match_distance(const PathParams &est, const PathParams &truth, const MatchScales &scales = {});

/// Greedy one-to-one matching of the LOS/first-order estimates against the
/// truth: the globally closest remaining pair is taken first, ties to the
/// lower estimate then truth index. Unmatched estimates are dropped.
std::vector<PathError> match_paths(const std::vector<PathParams> &est, const std::vector<PathParams> &truth,
                                   const MatchScales &scales = {});

struct Percentiles
{
  double p5 = 0.0;
  double p50 = 0.0;
  double p80 = 0.0;
  double p95 = 0.0;
};

Percentiles percentiles(const std::vector<double> &values);

/// One line of the predictions file written by the corrector.
struct Prediction
{
  std::optional<int> traj;
  double t = 0.0;
  Vec2 dx = Vec2::Zero();
  Vec2 x_star = Vec2::Zero();
};

struct MetricsReport
{
  std::vector<double> initial; // per-frame 2-D errors, m
  std::vector<double> kf;
  std::vector<double> corrected; // only frames with a prediction
  std::vector<PathError> matches;
  std::size_t frames = 0;
  std::size_t full_frames = 0;
  std::map<std::string, std::size_t> modes;
  double atoms_scored_full = 0.0;    // mean per full frame
  double atoms_scored_reduced = 0.0; // mean per reduced frame
  double product_full = 0.0;         // mean product-space size per full frame
  double product_reduced = 0.0;
  double wall_seconds = 0.0;
};

/// Errors and counters over all records. Predictions are matched to records
/// by (traj, t); a prediction without traj matches any trajectory.
MetricsReport build_report(const std::vector<FrameRecord> &records, const std::vector<Prediction> &predictions = {},
                           const MatchScales &scales = {});

/// Fraction of matches with every error inside the scales.
double fraction_within(const std::vector<PathError> &matches, const MatchScales &bounds);

std::string report_json(const MetricsReport &report, const MatchScales &scales = {});

/// "method,error_m,cdf" rows, each method sorted ascending.
std::string cdf_csv(const MetricsReport &report);

std::string overlay_csv(const std::vector<FrameRecord> &records);

} // namespace mmtrack
