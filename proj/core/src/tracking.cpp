#include "mmtrack/tracking.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace mmtrack
{

double single_bounce_residual(const Vec3 &bs, const Vec3 &rx, const Vec3 &dod, const Vec3 &doa,
                              std::optional<double> length)
{
  const Vec3 d1 = dod.normalized();
  const Vec3 d2 = doa.normalized();
  const Vec3 w = bs - rx;
  const double b = d1.dot(d2);
  const double d = d1.dot(w);
  const double e = d2.dot(w);
  const double denom = 1.0 - b * b;
  double s = 0.0, t = 0.0;
  if (denom > 1e-12) {
    s = (b * e - d) / denom;
    t = (e - b * d) / denom;
  }
  // clamp to the forward half-rays, re-optimising the free parameter
  if (s < 0.0) {
    s = 0.0;
    t = std::max(0.0, e);
  }
  if (t < 0.0) {
    t = 0.0;
    s = std::max(0.0, -d);
  }
  const double gap = ((bs + s * d1) - (rx + t * d2)).norm();
  if (!length) return gap;
  const double mismatch = s + t - *length;
  return std::sqrt(gap * gap + mismatch * mismatch);
}

std::vector<PathOrder> classify_paths(const ChannelEstimate &est, const Vec3 &bs_position,
                                      const std::optional<Vec3> &rx_guess, const ClassifierSettings &settings,
                                      double c)
{
  const std::size_t n = est.paths.size();
  std::vector<PathOrder> out(n, PathOrder::Unknown);
  double max_gain = 0.0;
  for (const auto &p : est.paths) max_gain = std::max(max_gain, std::abs(p.gain));
  if (max_gain <= 0.0) return out;

  std::vector<bool> significant(n, false);
  double earliest = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < n; ++k) {
    const bool flagged = k < est.below_noise_floor.size() && est.below_noise_floor[k];
    const double g = std::abs(est.paths[k].gain);
    significant[k] = g > 0.0 && !flagged && g >= settings.min_rel_gain * max_gain;
    if (significant[k]) earliest = std::min(earliest, est.paths[k].toa);
  }

  int los = -1;
  for (std::size_t k = 0; k < n; ++k) {
    if (!significant[k] || est.paths[k].toa > earliest + settings.los_delay_tol) continue;
    if (los < 0 || std::abs(est.paths[k].gain) > std::abs(est.paths[los].gain)) los = static_cast<int>(k);
  }
  if (los >= 0) {
    const auto &p = est.paths[los];
    const Vec3 dod = unit_direction(p.dod_az, p.dod_el);
    const Vec3 doa = unit_direction(p.doa_az, p.doa_el);
    if (angle_between(doa, -dod) <= settings.los_angle_tol)
      out[los] = PathOrder::LOS;
    else
      los = -1;
  }

  std::optional<Vec3> rx;
  std::optional<double> los_length;
  if (rx_guess) {
    rx = *rx_guess;
    if (los >= 0) {
      const Vec3 phi0 = unit_direction(est.paths[los].dod_az, est.paths[los].dod_el);
      const double range = std::max(0.0, (*rx_guess - bs_position).dot(phi0));
      rx = bs_position + range * phi0;
      los_length = range;
    }
  }
  for (std::size_t k = 0; k < n; ++k) {
    if (!significant[k] || static_cast<int>(k) == los) continue;
    // arrivals right on top of the LOS are its sidelobes, not reflections
    if (los >= 0 && est.paths[k].toa <= est.paths[los].toa + settings.los_delay_tol) continue;
    if (!rx) {
      out[k] = PathOrder::HigherOrder;
      continue;
    }
    const auto &p = est.paths[k];
    std::optional<double> length;
    if (los_length) length = *los_length + c * (p.toa - est.paths[los].toa);
    const double res = single_bounce_residual(bs_position, *rx, unit_direction(p.dod_az, p.dod_el),
                                              unit_direction(p.doa_az, p.doa_el), length);
    out[k] = res < settings.first_order_threshold ? PathOrder::FirstOrder : PathOrder::HigherOrder;
  }
  return out;
}

void validate(const TrackerConfig &cfg)
{
  validate(cfg.wave);
  if (!(cfg.tp > 0.0)) throw Error(ErrorCode::Config, "tp must be positive");
  if (cfg.n_est < 1) throw Error(ErrorCode::Config, "n_est must be >= 1");
  if (cfg.refine_sweeps < 1) throw Error(ErrorCode::Config, "refine_sweeps must be >= 1");
  if (!(cfg.reduced.omega > 0.0) || !(cfg.reduced.d_omega > 0.0) || cfg.reduced.eps < 0.0 ||
      !(cfg.reduced.d_tau > 0.0) || cfg.reduced.eps_low < 0.0)
    throw Error(ErrorCode::Config, "reduced dictionary parameters out of range");
  if (!(cfg.full_angle_step > 0.0) || !(cfg.full_delay_step > 0.0))
    throw Error(ErrorCode::Config, "full dictionary steps must be positive");
  if (cfg.full_period < 1) throw Error(ErrorCode::Config, "full_period must be >= 1");
  if (cfg.tx_beams < 1 || cfg.rx_beams < 1) throw Error(ErrorCode::Config, "beam counts must be >= 1");
  if (cfg.history_frames < 1 || cfg.history_stride < 1) throw Error(ErrorCode::Config, "history sizes must be >= 1");
  if (cfg.speed_error < 0.0) throw Error(ErrorCode::Config, "speed_error must be >= 0");
}

double window_start(const std::vector<PathParams> &paths, const WaveformConfig &cfg)
{
  double t_min = std::numeric_limits<double>::infinity();
  for (const auto &p : paths) t_min = std::min(t_min, p.toa);
  if (!std::isfinite(t_min)) return cfg.t_off;
  return (std::floor(t_min / cfg.ts) - cfg.guard_taps) * cfg.ts;
}

FrameResult track_frame(TrackerState &state, const MeasurementBatch &batch, const FrameContext &ctx,
                        const TrackerConfig &cfg)
{
  FrameResult res;
  const bool full = state.prev_estimate.paths.empty() || state.frame_index % state.full_reestimate_period == 0 ||
                    ctx.panel != state.active_panel;
  MompOptions opts;
  opts.n_paths = cfg.n_est;
  opts.refine_sweeps = cfg.refine_sweeps;
  DictionarySet dict;
  if (full) {
    dict = build_full(batch.cfg, ctx.tx, ctx.rx,
                      FullResolution::from_steps(cfg.full_angle_step, cfg.full_delay_step, batch.cfg));
  } else {
    // weak leftovers labelled Unknown would only widen the sectors
    ChannelEstimate prev = state.prev_estimate;
    std::erase_if(prev.paths, [](const PathParams &p) { return p.order == PathOrder::Unknown; });
    if (prev.paths.empty()) prev = state.prev_estimate;
    dict = build_reduced(prev, cfg.reduced, batch.cfg, ctx.tx, ctx.rx);
    opts.seeds = prev.paths;
  }
  const SparseSolution sol = momp_solve(batch, dict, opts);
  res.est = to_estimate(sol, ctx.t);
  res.diag.full = full;
  res.diag.iterations = sol.diag.iterations;
  for (int s : sol.diag.sweeps) res.diag.sweeps += s;
  res.diag.atoms_scored = sol.diag.atoms_scored;
  res.diag.product_size = sol.diag.product_size;
  res.diag.residual = sol.residual_norm;
  res.diag.init = std::string(to_string(sol.diag.init_used));

  const Vec3 speed3(state.prev_speed.x(), state.prev_speed.y(), 0.0);
  const Vec3 guess = state.prev_xyz + cfg.tp * speed3;
  const auto labels = classify_paths(res.est, ctx.bs_position, guess, cfg.classify);
  for (std::size_t k = 0; k < labels.size(); ++k) res.est.paths[k].order = labels[k];

  const Vec2 dr = dead_reckon(state.prev_xy, state.prev_speed, cfg.tp);
  bool geometric = false;
  if (localizable(res.est.paths).ok) {
    try {
      LocalizationInput inp;
      inp.bs_position = ctx.bs_position;
      inp.paths = res.est.paths;
      inp.initial_guess = guess;
      PositionEstimate pos = solve_position(inp);
      if (pos.converged && pos.residual <= cfg.residual_gate && pos.xyz.allFinite()) {
        res.pos = pos;
        geometric = true;
      }
    } catch (const Error &) {
      geometric = false;
    }
  }
  if (!geometric) {
    res.pos = PositionEstimate{};
    res.pos.mode = LocMode::DeadReckoning;
    res.pos.xy = dr;
    res.pos.xyz = Vec3(dr.x(), dr.y(), state.prev_xyz.z());
  }

  if (!state.kf) {
    state.kf = kf_init(res.pos.xy, ctx.speed, cfg.kf_measurement_noise, 1.0, cfg.kf_process_noise,
                       cfg.kf_measurement_noise);
    res.kf_xy = res.pos.xy;
  } else {
    res.kf_xy = kf_update(*state.kf, res.pos.xy, cfg.tp);
  }

  state.history.push_back({ctx.t, res.est, res.pos.xy});
  while (state.history.size() > state.capacity) state.history.pop_front();
  if (!res.est.paths.empty()) state.prev_estimate = res.est;
  state.prev_xy = res.pos.xy;
  state.prev_xyz = res.pos.xyz;
  state.prev_speed = ctx.speed;
  state.active_panel = ctx.panel;
  ++state.frame_index;
  return res;
}

BeamformerSet training_beams(const Scene &scene, const TrackerConfig &cfg, std::uint64_t seed)
{
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  const ArrayGeometry bs = scene.bs_array();
  ArrayGeometry panel;
  panel.nx = scene.panels.nx;
  panel.ny = scene.panels.ny;
  std::vector<CVec> tx, rx;
  if (cfg.beams == BeamKind::Dft) {
    tx = sample_dft_beams(bs, cfg.tx_beams, rng);
    rx = sample_dft_beams(panel, cfg.rx_beams, rng);
  } else {
    tx = random_phase_beams(bs.size(), cfg.tx_beams, rng);
    rx = random_phase_beams(panel.size(), cfg.rx_beams, rng);
  }
  const RVec pilot = hadamard(cfg.wave.q).row(best_pilot_row(cfg.wave.q, cfg.wave.nd)).transpose();
  return make_beam_pairs(tx, rx, pilot);
}

std::vector<FrameRecord> run_trajectory(const Scene &scene, const std::vector<TrajectoryFrame> &frames,
                                        const TrackerConfig &cfg, int traj_id, std::uint64_t seed)
{
  validate(cfg);
  const BeamformerSet bf = training_beams(scene, cfg, seed);
  const ArrayGeometry bs = scene.bs_array();
  std::mt19937_64 speed_rng(seed + 0x51ed2701ULL);
  std::uniform_real_distribution<double> speed_err(-cfg.speed_error, cfg.speed_error);

  TrackerState state;
  state.full_reestimate_period = cfg.full_period;
  state.capacity = static_cast<std::size_t>(cfg.history_frames) * cfg.history_stride;
  if (!frames.empty()) {
    // initial access is assumed to know where the vehicle starts
    state.prev_xyz = frames.front().position;
    state.prev_xy = frames.front().position.head<2>();
    state.prev_speed = frames.front().velocity.head<2>();
  }

  WaveformConfig wave = cfg.wave;
  wave.fc = scene.fc;
  std::vector<FrameRecord> out;
  out.reserve(frames.size());
  for (const auto &f : frames) {
    wave.t_off = window_start(f.true_paths, wave);
    FrameRecord rec;
    rec.traj = traj_id;
    rec.index = f.index;
    rec.t = f.t;
    rec.truth = f.position;
    rec.los_blocked = f.los_blocked;
    rec.panel = f.active_panel;
    for (const auto &p : f.true_paths)
      if (in_window(p.toa, wave)) rec.truth_paths.push_back(p);
    reference_tdoa(rec.truth_paths);

    const auto panels = scene.vehicle_panels(f.position, f.heading.col(0));
    FrameContext ctx;
    ctx.t = f.t;
    ctx.tx = bs;
    ctx.rx = panels[static_cast<std::size_t>(f.active_panel)];
    ctx.bs_position = scene.bs_position;
    ctx.panel = f.active_panel;
    ctx.speed = f.velocity.head<2>() * (1.0 + speed_err(speed_rng));

    const std::uint64_t frame_seed = seed * 0x100000001b3ULL + static_cast<std::uint64_t>(f.index) + 1;
    const MeasurementBatch batch = measure_paths(rec.truth_paths, bf, wave, ctx.tx, ctx.rx, frame_seed);
    FrameResult r = track_frame(state, batch, ctx, cfg);
    rec.est = std::move(r.est);
    rec.pos = r.pos;
    rec.kf_xy = r.kf_xy;
    rec.diag = r.diag;
    out.push_back(std::move(rec));
  }
  return out;
}

} // namespace mmtrack
