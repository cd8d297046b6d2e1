#pragma once

#include <cstdint>
#include <deque>
#include <optional>

#include "mmtrack/dictionaries.hpp"
#include "mmtrack/geo_locator.hpp"
#include "mmtrack/kalman.hpp"
#include "mmtrack/momp.hpp"
#include "mmtrack/scene.hpp"

namespace mmtrack
{

struct ClassifierSettings
{
  double first_order_threshold = 0.5; // m, single-bounce fit residual
  double los_delay_tol = 1e-9;        // s, slack around the earliest arrival
  double los_angle_tol = deg2rad(10.0);
  double min_rel_gain = 0.05;         // paths weaker than this (amplitude ratio) stay Unknown
};

/// Labels per row of `est`. LOS: strongest significant path arriving within
/// los_delay_tol of the earliest one whose DoA opposes its DoD. FirstOrder:
/// remaining significant paths whose single-bounce geometry, tested against
/// `rx_guess`, fits within the threshold. Everything else significant is
/// HigherOrder; zero, floor-flagged and weak rows are Unknown.
std::vector<PathOrder> classify_paths(const ChannelEstimate &est, const Vec3 &bs_position,
                                      const std::optional<Vec3> &rx_guess, const ClassifierSettings &settings,
                                      double c = kSpeedOfLight);

/// Residual of the best single-bounce explanation of a path: distance
/// between the DoD ray from the BS and the DoA ray from `rx`, combined with
/// the mismatch to `length` when that is known.
double single_bounce_residual(const Vec3 &bs, const Vec3 &rx, const Vec3 &dod, const Vec3 &doa,
                              std::optional<double> length);

enum class BeamKind
{
  RandomPhase,
  Dft,
};

struct TrackerConfig
{
  WaveformConfig wave;
  double tp = 0.5e-3;
  int n_est = 5;
  int refine_sweeps = 3;
  ReducedParams reduced{deg2rad(15.0), deg2rad(0.175), 0.2e-9, 0.01e-9, 0.2e-9};
  double full_angle_step = deg2rad(0.175);
  double full_delay_step = 0.01e-9;
  int full_period = 200;
  BeamKind beams = BeamKind::RandomPhase;
  int tx_beams = 12;
  int rx_beams = 12;
  ClassifierSettings classify;
  double speed_error = 0.05;   // speedometer: uniform relative error bound
  double residual_gate = 5.0;  // m; larger locator residuals fall back to dead reckoning
  double kf_process_noise = 1.0;
  double kf_measurement_noise = 0.25;
  int history_frames = 16;     // C
  int history_stride = 25;     // sampling interval in frames
};

void validate(const TrackerConfig &cfg);

/// Solver counters kept per frame.
struct FrameDiagnostics
{
  bool full = false;
  int iterations = 0;
  int sweeps = 0;
  std::uint64_t atoms_scored = 0;
  long double product_size = 0.0L;
  double residual = 0.0;
  std::string init;
};

struct HistoryEntry
{
  double t = 0.0;
  ChannelEstimate est;
  Vec2 xy = Vec2::Zero();
};

struct TrackerState
{
  ChannelEstimate prev_estimate;
  Vec3 prev_xyz = Vec3::Zero();
  Vec2 prev_xy = Vec2::Zero();
  Vec2 prev_speed = Vec2::Zero();
  int frame_index = 0;
  int active_panel = -1;
  int full_reestimate_period = 200;
  std::deque<HistoryEntry> history; // capacity C * stride
  std::size_t capacity = 16 * 25;
  std::optional<KfState> kf;
};

/// Everything track_frame needs beyond the measurements.
struct FrameContext
{
  double t = 0.0;
  ArrayGeometry tx;
  ArrayGeometry rx;
  Vec3 bs_position = Vec3::Zero();
  Vec2 speed = Vec2::Zero(); // speedometer reading for this frame
  int panel = 0;
};

struct FrameResult
{
  ChannelEstimate est;
  PositionEstimate pos;
  Vec2 kf_xy = Vec2::Zero();
  FrameDiagnostics diag;
};

/// One pass of the tracking loop on a measured frame. Never throws for a
/// well-formed batch: locator failures degrade to dead reckoning.
FrameResult track_frame(TrackerState &state, const MeasurementBatch &batch, const FrameContext &ctx,
                        const TrackerConfig &cfg);

/// Per-frame record of a simulated run.
struct FrameRecord
{
  int traj = 0;
  int index = 0;
  double t = 0.0;
  Vec3 truth = Vec3::Zero();
  std::vector<PathParams> truth_paths; // inside the receive window
  ChannelEstimate est;
  PositionEstimate pos;
  Vec2 kf_xy = Vec2::Zero();
  bool los_blocked = false;
  int panel = 0;
  FrameDiagnostics diag;
};

/// Receive-window start for a frame: earliest true arrival rounded down to
/// a sample, minus the guard.
double window_start(const std::vector<PathParams> &paths, const WaveformConfig &cfg);

/// Simulates measurements for every frame and runs the tracking loop.
std::vector<FrameRecord> run_trajectory(const Scene &scene, const std::vector<TrajectoryFrame> &frames,
                                        const TrackerConfig &cfg, int traj_id, std::uint64_t seed);

/// Beam pairs used for a trajectory.
BeamformerSet training_beams(const Scene &scene, const TrackerConfig &cfg, std::uint64_t seed);

} // namespace mmtrack
