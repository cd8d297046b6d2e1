#pragma once

#include <iosfwd>

#include "mmtrack/evaluation.hpp"
#include "mmtrack/tracking.hpp"

namespace mmtrack
{

/// Per-path feature order in Z.
inline constexpr std::array<std::string_view, 7> kPathFeatures{"gain_mag", "gain_phase", "tdoa_s", "doa_az",
                                                                "doa_el",   "dod_az",     "dod_el"};

struct DatasetSample
{
  int traj = 0;
  double t = 0.0;
  std::vector<std::vector<std::array<double, 7>>> z; // C x n_est x 7, oldest first
  std::vector<Vec2> x;                               // C positions, oldest first
  Vec2 target = Vec2::Zero();                        // truth - x.back()
  Vec2 truth = Vec2::Zero();
};

std::array<double, 7> path_features(const PathParams &p);

/// One sample per frame n >= (c-1)*stride of each trajectory, holding the
/// estimates and positions at frames n - k*stride, k = c-1..0. Paths are
/// padded with zero rows up to n_est. Records must be grouped by trajectory
/// and ordered by frame index. Throws InsufficientHistory when a trajectory
/// is shorter than (c-1)*stride + 1 frames.
std::vector<DatasetSample> build_samples(const std::vector<FrameRecord> &records, int c, int stride, int n_est);

/// One JSON object, no trailing newline. Doubles use 17 significant digits.
std::string sample_json(const DatasetSample &s);

void write_samples(std::ostream &out, const std::vector<DatasetSample> &samples);

struct Split
{
  std::vector<int> train;
  std::vector<int> test;
};

/// Whole trajectories, sorted by id; the first round(n * train/(train+test))
/// go to training.
Split split_trajectories(std::vector<int> ids, int train_parts = 3, int test_parts = 1);

/// Reads {"t", "dx", "x_star"} lines (optional "traj"). Blank lines are
/// skipped; malformed lines throw Io with the line number.
std::vector<Prediction> read_predictions(std::istream &in);

} // namespace mmtrack
