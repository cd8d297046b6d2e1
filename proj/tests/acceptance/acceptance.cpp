// Runs every acceptance criterion and prints one PASS/FAIL line each.
// Exit status is the number of failed criteria.

#include <chrono>
#include <cstdio>
#include <algorithm>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "mmtrack/evaluation.hpp"
#include "mmtrack/experiment.hpp"
#include "mmtrack/geo_locator.hpp"
#include "mmtrack/momp.hpp"
#include "mmtrack/tracking.hpp"
#include "support/geometry_oracle.hpp"
#include "support/oracles.hpp"

using namespace mmtrack;

namespace
{

struct Outcome
{
  bool pass = false;
  std::string detail;
};

std::string fmt(const char *f, auto... args)
{
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double median(std::vector<double> v) { return percentile(std::move(v), 50); }

// --- whitening -------------------------------------------------------------

Outcome whitening()
{
  WaveformConfig cfg;
  cfg.nd = 4;
  cfg.q = 10000;
  std::mt19937_64 rng(101);
  // correlated two-stream combiner so the whitener is far from identity
  CMat w(12, 2);
  w.col(0) = oracle::random_unit(12, rng);
  w.col(1) = 0.8 * w.col(0) + 0.6 * oracle::random_unit(12, rng);
  BeamformerSet bf;
  bf.precoders.push_back(CMat::Identity(2, 2) / std::sqrt(2.0));
  bf.combiners.push_back(w);
  bf.pilots.push_back(CMat::Ones(2, cfg.q));
  compute_whiteners(bf);
  const ChannelTensor zero(cfg.nd, CMat::Zero(12, 2));
  const CMat y = measure(zero, bf, cfg, 7).blocks.at(0);
  const CMat cov = y * y.adjoint() / static_cast<double>(y.cols());
  const double err = (cov - cfg.noise_var * CMat::Identity(2, 2)).jacobiSvd().singularValues()[0] / cfg.noise_var;
  const double raw_cond = w.jacobiSvd().singularValues()[0] / w.jacobiSvd().singularValues()[1];
  return {err <= 0.05, fmt("relative operator-norm error %.4f at %d draws (combiner cond %.2f)", err,
                           static_cast<int>(y.cols()), raw_cond)};
}

// --- oracle equivalence ----------------------------------------------------

Outcome oracle_equivalence()
{
  std::mt19937_64 rng(202);
  int first_ok = 0, curve_ok = 0, instances = 0;
  double worst = 0.0;
  long max_atoms = 0;
  for (int inst = 0; inst < 20; ++inst) {
    WaveformConfig cfg;
    cfg.nd = 6;
    cfg.q = 12;
    cfg.noise_var = 1e-9;
    cfg.guard_taps = 0;
    ArrayGeometry tx, rx;
    tx.nx = 3;
    tx.ny = 2;
    rx.nx = 2;
    rx.ny = 2;
    const auto bf = oracle::tiny_beams(tx.size(), rx.size(), 4, 3, cfg.q, rng);
    std::uniform_int_distribution<int> da(3, 4), dd(6, 7);
    const FullResolution res{da(rng), da(rng), da(rng), da(rng), dd(rng)};
    const auto dict = build_full(cfg, tx, rx, res);
    max_atoms = std::max(max_atoms, static_cast<long>(dict.product_size()));

    // three random atoms with random gains, plus noise
    std::vector<PathParams> paths;
    for (int k = 0; k < 3; ++k) {
      AtomIndex j;
      for (int d = 0; d < 4; ++d) j[d] = std::uniform_int_distribution<int>(0, dict.atoms(d) - 1)(rng);
      // delays inside the receive window, the last tap included
      j[4] = std::uniform_int_distribution<int>(0, (cfg.nd - 1) * dict.atoms(4) / cfg.nd)(rng);
      PathParams p = dict.decode(j);
      p.gain = oracle::random_unit(1, rng)[0] * (1e-3 / (k + 1));
      paths.push_back(p);
    }
    const auto batch = measure(channel_taps(paths, cfg, tx, rx), bf, cfg, 1000 + inst);
    const CVec y = batch.stacked();

    const CMat phi = oracle::sensing_operator(bf, rx.size(), tx.size(), cfg.nd, cfg.q);
    const auto mat = oracle::materialize_all(phi, dict);
    std::vector<long> support;
    const auto ref = oracle::omp_residuals(mat.a, y, 4, &support);

    MompOptions o;
    o.n_paths = 4;
    o.init = InitMode::Exhaustive;
    const auto sol = momp_solve(batch, dict, o);
    ++instances;
    if (!sol.atoms.empty() && sol.atoms[0] == mat.index[static_cast<std::size_t>(support[0])]) ++first_ok;
    const auto &curve = sol.diag.residual_curve;
    bool ok = curve.size() == ref.size() + 1;
    for (std::size_t k = 0; ok && k < ref.size(); ++k) {
      const double d = std::abs(curve[k + 1] - ref[k]);
      worst = std::max(worst, d);
      ok = d <= 1e-8;
    }
    curve_ok += ok;
  }
  return {first_ok == instances && curve_ok == instances && max_atoms <= 2000,
          fmt("%d/%d first atoms, %d/%d residual curves (max |diff| %.2e), max %ld atoms", first_ok, instances,
              curve_ok, instances, worst, max_atoms)};
}

// --- planted recovery ------------------------------------------------------

struct Planted
{
  WaveformConfig cfg;
  ArrayGeometry tx, rx;
  BeamformerSet bf;
  DictionarySet dict;
};

Planted planted_setup()
{
  Planted p;
  p.cfg.nd = 8;
  p.cfg.q = 16;
  p.cfg.noise_var = 0.0;
  p.cfg.guard_taps = 0;
  p.tx.nx = p.tx.ny = 4;
  p.rx.nx = p.rx.ny = 3;
  std::mt19937_64 rng(1);
  const auto tb = random_phase_beams(16, 8, rng);
  const auto rb = random_phase_beams(9, 6, rng);
  const RVec pilot = hadamard(16).row(best_pilot_row(16, 8)).transpose();
  p.bf = make_beam_pairs(tb, rb, pilot);
  p.dict = build_full(p.cfg, p.tx, p.rx, {12, 12, 9, 9, 24});
  return p;
}

// Builds a path from per-dimension grid coordinates (index plus fraction).
PathParams path_at(const DictionarySet &dict, const std::array<double, 5> &coord, cd gain)
{
  auto value = [&](int k) {
    const auto &g = dict.grids[k].values;
    const double step = g.size() > 1 ? g[1] - g[0] : 0.0;
    return g[0] + coord[k] * step;
  };
  const AzEl dod = az_el(from_cone(dict.tx, {value(0), value(1)}));
  const AzEl doa = az_el(from_cone(dict.rx, {value(2), value(3)}));
  PathParams p;
  p.dod_az = dod.az;
  p.dod_el = dod.el;
  p.doa_az = doa.az;
  p.doa_el = doa.el;
  p.toa = value(4);
  p.gain = gain;
  return p;
}

bool visible(const DictionarySet &dict, const std::array<double, 5> &coord)
{
  auto cosine = [&](int k) {
    const auto &g = dict.grids[k].values;
    return std::cos(g[0] + coord[k] * (g[1] - g[0]));
  };
  const double t = cosine(0) * cosine(0) + cosine(1) * cosine(1);
  const double r = cosine(2) * cosine(2) + cosine(3) * cosine(3);
  return t < 0.8 && r < 0.8;
}

std::array<double, 5> random_coord(const DictionarySet &dict, std::mt19937_64 &rng, double frac)
{
  std::uniform_real_distribution<double> f(-frac, frac);
  for (;;) {
    std::array<double, 5> c;
    for (int k = 0; k < 5; ++k) {
      // keep away from the grid ends so the half-cell around the truth exists
      int hi = dict.atoms(k) - 2;
      if (k == 4) hi = std::min(hi, (dict.cfg.nd - 1) * dict.atoms(4) / dict.cfg.nd - 1);
      c[k] = std::uniform_int_distribution<int>(1, hi)(rng) + (frac > 0 ? f(rng) : 0.0);
    }
    if (visible(dict, c)) return c;
  }
}

Outcome planted_recovery()
{
  Planted p = planted_setup();
  std::mt19937_64 rng(303);
  int on1 = 0, on3 = 0;
  double worst_gain = 0.0, worst_cell = 0.0;
  const int trials = 10;

  for (int trial = 0; trial < trials; ++trial) {
    // single on-grid path
    {
      const auto c = random_coord(p.dict, rng, 0.0);
      AtomIndex j;
      for (int k = 0; k < 5; ++k) j[k] = static_cast<int>(c[k]);
      const cd g = oracle::random_unit(1, rng)[0] * 1e-3;
      const auto batch = measure_paths(std::vector{path_at(p.dict, c, g)}, p.bf, p.cfg, p.tx, p.rx, 0);
      MompOptions o;
      o.n_paths = 1;
      o.init = InitMode::Exhaustive;
      const auto sol = momp_solve(batch, p.dict, o);
      const double ge = std::abs(sol.params.at(0).gain - g) / std::abs(g);
      worst_gain = std::max(worst_gain, ge);
      on1 += sol.atoms.at(0) == j && ge <= 1e-6;
    }
    // three on-grid paths
    {
      std::vector<AtomIndex> atoms;
      std::vector<PathParams> paths;
      std::vector<cd> gains;
      while (atoms.size() < 3) {
        const auto c = random_coord(p.dict, rng, 0.0);
        AtomIndex j;
        for (int k = 0; k < 5; ++k) j[k] = static_cast<int>(c[k]);
        if (std::find(atoms.begin(), atoms.end(), j) != atoms.end()) continue;
        atoms.push_back(j);
        gains.push_back(oracle::random_unit(1, rng)[0] * (1e-3 * (1.0 - 0.2 * static_cast<double>(atoms.size()))));
        paths.push_back(path_at(p.dict, c, gains.back()));
      }
      const auto batch = measure_paths(paths, p.bf, p.cfg, p.tx, p.rx, 0);
      MompOptions o;
      o.n_paths = 3;
      o.init = InitMode::Exhaustive;
      const auto sol = momp_solve(batch, p.dict, o);
      bool ok = sol.atoms.size() == 3;
      for (std::size_t k = 0; ok && k < 3; ++k) {
        const auto it = std::find(sol.atoms.begin(), sol.atoms.end(), atoms[k]);
        ok = it != sol.atoms.end();
        if (!ok) break;
        const double ge = std::abs(sol.params[static_cast<std::size_t>(it - sol.atoms.begin())].gain - gains[k]) /
                          std::abs(gains[k]);
        worst_gain = std::max(worst_gain, ge);
        ok = ge <= 1e-6;
      }
      on3 += ok;
    }
  }

  // single off-grid path: the picked atom must sit within half a cell of the
  // truth in every dimension
  auto off_grid = [&](const Planted &setup, int n, double &worst) {
    std::mt19937_64 r(505);
    int hits = 0;
    for (int trial = 0; trial < n; ++trial) {
      const auto c = random_coord(setup.dict, r, 0.5);
      const auto batch =
          measure_paths(std::vector{path_at(setup.dict, c, cd(1e-3, 0))}, setup.bf, setup.cfg, setup.tx, setup.rx, 0);
      MompOptions o;
      o.n_paths = 1;
      o.init = InitMode::Exhaustive;
      const auto sol = momp_solve(batch, setup.dict, o);
      double cell = 0.0;
      for (int k = 0; k < 5; ++k) cell = std::max(cell, std::abs(sol.atoms.at(0)[k] - c[k]));
      worst = std::max(worst, cell);
      hits += cell <= 0.5;
    }
    return hits;
  };
  const int off_trials = 50;
  const int off = off_grid(p, off_trials, worst_cell);
  // same draws with complete DFT training, for context only
  Planted complete = p;
  complete.bf = make_beam_pairs(dft_codebook(p.tx), dft_codebook(p.rx),
                                hadamard(16).row(best_pilot_row(16, 8)).transpose());
  double worst_complete = 0.0;
  const int off_complete = off_grid(complete, off_trials, worst_complete);

  return {on1 == trials && on3 == trials && off == off_trials,
          fmt("on-grid 1-path %d/%d, 3-path %d/%d (worst gain rel err %.1e), off-grid %d/%d (worst %.2f cells; "
              "%d/%d with complete DFT training)",
              on1, trials, on3, trials, worst_gain, off, off_trials, worst_cell, off_complete, off_trials)};
}

// --- geometry ----------------------------------------------------------------

Outcome geometry()
{
  std::mt19937_64 rng(404);
  std::uniform_real_distribution<double> ux(-80.0, 80.0), uy(-10.0, 10.0), uz(1.0, 2.5), ub(5.0, 15.0);
  std::uniform_real_distribution<double> uoff(0.0, 100e-9);
  int ok = 0, n = 0;
  double worst = 0.0;
  while (n < 100) {
    const Vec3 bs(0.0, 0.0, ub(rng));
    const Vec3 rx(ux(rng), uy(rng), uz(rng));
    if ((rx - bs).head<2>().norm() < 5.0) continue;
    const double offset = uoff(rng);
    std::vector<PathParams> paths;
    const bool los = n % 2 == 0;
    if (los) {
      paths.push_back(oracle::direct_path(bs, rx, offset));
      paths.push_back(oracle::bounce_path(bs, rx, oracle::random_plane(bs, rx, rng, Vec3(0, n % 4 ? 1 : -1, 0)), offset));
    } else {
      for (const Vec3 &hint : {Vec3(0, 1, 0), Vec3(0, -1, 0), Vec3(0, 0, 1)})
        paths.push_back(oracle::bounce_path(bs, rx, oracle::random_plane(bs, rx, rng, hint), offset));
    }
    reference_tdoa(paths);
    LocalizationInput inp;
    inp.bs_position = bs;
    inp.paths = paths;
    ++n;
    try {
      const auto est = solve_position(inp);
      const double e = (est.xyz - rx).norm();
      worst = std::max(worst, e);
      ok += e <= 1e-6 && est.mode == (los ? LocMode::LOS_Geometric : LocMode::NLOS_Geometric);
    } catch (const Error &) {
      worst = INFINITY;
    }
  }
  return {ok == n, fmt("%d/%d geometries (half LOS+1, half NLOS+3), worst error %.2e m", ok, n, worst)};
}

// --- tracking run ------------------------------------------------------------

struct TrackingRun
{
  std::vector<FrameRecord> records;
  MetricsReport report;
  double seconds = 0.0;
};

TrackingRun tracking_run()
{
  RunConfig cfg;
  cfg.trajectories = 1;
  cfg.duration = 1.0; // 2000 frames at 0.5 ms
  const auto plan = plan_trajectories(cfg);
  const auto t0 = std::chrono::steady_clock::now();
  const auto frames =
      generate_trajectory(cfg.scene, plan[0].start, cfg.speed_kmh, cfg.duration, cfg.tracker.tp, plan[0].seed);
  TrackingRun run;
  run.records = run_trajectory(cfg.scene, frames, cfg.tracker, plan[0].id, plan[0].seed);
  run.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  run.report = build_report(run.records);
  return run;
}

Outcome tracking_bounds(const TrackingRun &run)
{
  const double frac = fraction_within(run.report.matches, {});
  return {frac >= 0.90 && run.records.size() == 2000,
          fmt("%.2f%% of %zu LOS/first-order matches within 3deg/8deg/7ns over %zu frames (%.0f s)", 100.0 * frac,
              run.report.matches.size(), run.records.size(), run.seconds)};
}

Outcome complexity(const TrackingRun &run)
{
  const double ratio = run.report.product_reduced / run.report.product_full;
  const double scored = run.report.atoms_scored_reduced / run.report.atoms_scored_full;
  return {ratio < 0.10, fmt("reduced/full atom count %.4f%% (%.3g vs %.3g per frame); candidates actually scored %.2f%%",
                            100.0 * ratio, run.report.product_reduced, run.report.product_full, 100.0 * scored)};
}

Outcome kf_improvement(const TrackingRun &run)
{
  const double raw = median(run.report.initial), kf = median(run.report.kf);
  return {kf <= raw, fmt("KF median %.4f m, raw median %.4f m", kf, raw)};
}

// --- dead reckoning ----------------------------------------------------------

Outcome dead_reckoning()
{
  // one facade and no ground: a blocked LOS leaves a single reflection
  Scene scene = default_scene();
  scene.walls.erase(scene.walls.begin());
  scene.ground.enabled = false;
  scene.blockage.rate_hz = 40.0;
  scene.blockage.mean_duration = 0.04;
  TrackerConfig cfg;
  cfg.full_period = 50;
  RunConfig rc;
  rc.scene = scene;
  const auto plan = plan_trajectories(rc);
  const auto frames = generate_trajectory(scene, plan[0].start, 60.0, 0.15, cfg.tp, 99);
  const BeamformerSet bf = training_beams(scene, cfg, 99);
  const ArrayGeometry bs = scene.bs_array();
  std::mt19937_64 speed_rng(5);
  std::uniform_real_distribution<double> speed_err(-cfg.speed_error, cfg.speed_error);

  TrackerState state;
  state.full_reestimate_period = cfg.full_period;
  state.prev_xyz = frames.front().position;
  state.prev_xy = frames.front().position.head<2>();
  state.prev_speed = frames.front().velocity.head<2>();
  WaveformConfig wave = cfg.wave;
  wave.fc = scene.fc;

  int dr = 0, unlocalizable = 0, bad = 0, frames_run = 0, blocked = 0;
  for (const auto &f : frames) {
    blocked += f.los_blocked;
    wave.t_off = window_start(f.true_paths, wave);
    std::vector<PathParams> truth;
    for (const auto &p : f.true_paths)
      if (in_window(p.toa, wave)) truth.push_back(p);
    FrameContext ctx;
    ctx.t = f.t;
    ctx.tx = bs;
    ctx.rx = scene.vehicle_panels(f.position, f.heading.col(0))[static_cast<std::size_t>(f.active_panel)];
    ctx.bs_position = scene.bs_position;
    ctx.panel = f.active_panel;
    ctx.speed = f.velocity.head<2>() * (1.0 + speed_err(speed_rng));
    const auto batch = measure_paths(truth, bf, wave, ctx.tx, ctx.rx, 500 + static_cast<std::uint64_t>(f.index));

    const Vec2 prev = state.prev_xy, v = state.prev_speed;
    const auto r = track_frame(state, batch, ctx, cfg);
    ++frames_run;
    const bool failed_rule = !localizable(r.est.paths).ok;
    unlocalizable += failed_rule;
    if (r.pos.mode != LocMode::DeadReckoning) {
      bad += failed_rule;
      continue;
    }
    ++dr;
    const Vec2 expect(prev.x() + cfg.tp * v.x(), prev.y() + cfg.tp * v.y());
    bad += !(r.pos.xy.x() == expect.x() && r.pos.xy.y() == expect.y());
  }
  return {bad == 0 && unlocalizable > 0,
          fmt("%d DR frames (%d failing the localizability rule) of %d, %d with LOS blocked, %d mismatches", dr,
              unlocalizable, frames_run, blocked, bad)};
}

} // namespace

// With arguments, only the named criteria run.
int main(int argc, char **argv)
{
  const std::vector<std::string> only(argv + 1, argv + argc);
  auto wanted = [&](const char *name) { return only.empty() || std::find(only.begin(), only.end(), name) != only.end(); };
  int failed = 0, ran = 0;
  auto report = [&](const char *name, double limit_s, const std::function<Outcome()> &fn) {
    if (!wanted(name)) return;
    ++ran;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o = fn();
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (limit_s > 0 && s >= limit_s) {
      o.pass = false;
      o.detail += fmt("; runtime %.1f s over %.0f s limit", s, limit_s);
    }
    failed += !o.pass;
    std::printf("%s  %-22s %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", name, o.detail.c_str(), s);
    std::fflush(stdout);
  };

  report("whitening", 10.0, whitening);
  report("oracle-equivalence", 60.0, oracle_equivalence);
  report("planted-recovery", 0.0, planted_recovery);
  report("geometric-exactness", 10.0, geometry);
  TrackingRun run;
  if (wanted("tracking-bounds") || wanted("complexity-reduction") || wanted("kf-improvement")) run = tracking_run();
  report("tracking-bounds", 0.0, [&] { return tracking_bounds(run); });
  report("complexity-reduction", 0.0, [&] { return complexity(run); });
  report("kf-improvement", 0.0, [&] { return kf_improvement(run); });
  report("dead-reckoning", 0.0, dead_reckoning);
  std::printf("%d of %d criteria failed\n", failed, ran);
  return failed;
}
