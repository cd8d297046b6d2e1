#include <benchmark/benchmark.h>

#include "mmtrack/momp.hpp"
#include "mmtrack/tracking.hpp"

using namespace mmtrack;

namespace
{

// One frame of the default street, 15 m before the BS, with LOS.
struct Frame
{
  Scene scene = default_scene();
  TrackerConfig cfg;
  WaveformConfig wave;
  FrameContext ctx;
  std::vector<PathParams> truth;
  BeamformerSet bf;
  MeasurementBatch batch;

  Frame()
  {
    const Vec3 pos(-15.0, 1.5, 1.6);
    bf = training_beams(scene, cfg, 7);
    ctx.tx = scene.bs_array();
    ctx.bs_position = scene.bs_position;
    ctx.speed = Vec2(16.6, 0.0);
    const auto panels = scene.vehicle_panels(pos, Vec3::UnitX());
    const auto all = trace_paths(scene, pos, 20e-9, false);
    double best = -1.0;
    for (std::size_t p = 0; p < panels.size(); ++p) {
      const auto vis = visible_paths(all, ctx.tx, panels[p]);
      double e = 0.0;
      for (const auto &v : vis) e += std::norm(v.gain);
      if (e > best) {
        best = e;
        ctx.panel = static_cast<int>(p);
        ctx.rx = panels[p];
        truth = vis;
      }
    }
    wave = cfg.wave;
    wave.fc = scene.fc;
    wave.t_off = window_start(truth, wave);
    std::erase_if(truth, [&](const PathParams &p) { return !in_window(p.toa, wave); });
    reference_tdoa(truth);
    batch = measure_paths(truth, bf, wave, ctx.tx, ctx.rx, 3);
  }

  ChannelEstimate prev() const
  {
    ChannelEstimate e;
    e.paths = truth;
    e.t_min = reference_tdoa(e.paths);
    e.below_noise_floor.assign(e.paths.size(), false);
    return e;
  }

  TrackerState warm() const
  {
    TrackerState st;
    st.prev_estimate = prev();
    st.frame_index = 1;
    st.active_panel = ctx.panel;
    st.prev_xyz = Vec3(-15.0, 1.5, 1.6);
    st.prev_xy = st.prev_xyz.head<2>();
    st.prev_speed = ctx.speed;
    return st;
  }
};

const Frame &frame()
{
  static const Frame f;
  return f;
}

void BM_ApplyAtom(benchmark::State &state)
{
  const Frame &f = frame();
  const auto dict = build_reduced(f.prev(), f.cfg.reduced, f.wave, f.ctx.tx, f.ctx.rx);
  const AtomIndex j{dict.atoms(0) / 2, dict.atoms(1) / 2, dict.atoms(2) / 2, dict.atoms(3) / 2, dict.atoms(4) / 2};
  for (auto _ : state) benchmark::DoNotOptimize(apply_atom(f.batch, j, dict));
}
BENCHMARK(BM_ApplyAtom)->Unit(benchmark::kMicrosecond);

void BM_ReducedSolve(benchmark::State &state)
{
  const Frame &f = frame();
  const auto dict = build_reduced(f.prev(), f.cfg.reduced, f.wave, f.ctx.tx, f.ctx.rx);
  MompOptions o;
  o.n_paths = f.cfg.n_est;
  o.refine_sweeps = f.cfg.refine_sweeps;
  o.seeds = f.prev().paths;
  for (auto _ : state) benchmark::DoNotOptimize(momp_solve(f.batch, dict, o));
  state.counters["product_size"] = static_cast<double>(dict.product_size());
}
BENCHMARK(BM_ReducedSolve)->Unit(benchmark::kMillisecond);

void BM_BuildReduced(benchmark::State &state)
{
  const Frame &f = frame();
  const auto prev = f.prev();
  for (auto _ : state) benchmark::DoNotOptimize(build_reduced(prev, f.cfg.reduced, f.wave, f.ctx.tx, f.ctx.rx));
}
BENCHMARK(BM_BuildReduced)->Unit(benchmark::kMillisecond);

void BM_TrackFrameReduced(benchmark::State &state)
{
  const Frame &f = frame();
  for (auto _ : state) {
    state.PauseTiming();
    TrackerState st = f.warm();
    state.ResumeTiming();
    benchmark::DoNotOptimize(track_frame(st, f.batch, f.ctx, f.cfg));
  }
}
BENCHMARK(BM_TrackFrameReduced)->Unit(benchmark::kMillisecond);

void BM_TrackFrameFull(benchmark::State &state)
{
  const Frame &f = frame();
  for (auto _ : state) {
    state.PauseTiming();
    TrackerState st = f.warm();
    st.frame_index = 0; // forces a full re-estimate
    state.ResumeTiming();
    benchmark::DoNotOptimize(track_frame(st, f.batch, f.ctx, f.cfg));
  }
}
BENCHMARK(BM_TrackFrameFull)->Unit(benchmark::kMillisecond)->Iterations(3);

} // namespace

BENCHMARK_MAIN();
