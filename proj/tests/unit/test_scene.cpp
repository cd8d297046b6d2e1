#include "doctest.h"

#include "mmtrack/geo_locator.hpp"
#include "mmtrack/scene.hpp"
#include "support/geometry_oracle.hpp"

using namespace mmtrack;

namespace
{

Scene quiet_scene()
{
  Scene s = default_scene();
  s.blockage.rate_hz = 0.0;
  return s;
}

std::vector<oracle::Plane> planes_of(const Scene &s)
{
  std::vector<oracle::Plane> out;
  for (const auto &w : s.walls) out.push_back({w.point, w.normal});
  if (s.ground.enabled) out.push_back({Vec3(0, 0, s.ground.z), Vec3::UnitZ()});
  return out;
}

struct BounceCheck
{
  double snell = 1e9;  // rad
  double length = 1e9; // m
};

// Rebuild the reflection point from the DoD ray and the plane, then compare
// the mirrored departure with the arrival and the two legs with the ToA.
BounceCheck check_bounce(const PathParams &p, const Vec3 &bs, const Vec3 &rx, double offset, const oracle::Plane &pl)
{
  BounceCheck out;
  const Vec3 d1 = unit_direction(p.dod_az, p.dod_el);
  const double den = d1.dot(pl.normal);
  if (std::abs(den) < 1e-12) return out;
  const double t = (pl.point - bs).dot(pl.normal) / den;
  if (t <= 0) return out;
  const Vec3 s = bs + t * d1;
  const Vec3 mirrored = d1 - 2.0 * d1.dot(pl.normal) * pl.normal;
  const Vec3 d_out = -unit_direction(p.doa_az, p.doa_el);
  out.snell = angle_between(mirrored, d_out);
  out.length = std::abs((s - bs).norm() + (rx - s).norm() - kSpeedOfLight * (p.toa - offset));
  return out;
}

} // namespace

TEST_CASE("trajectory sampling")
{
  const Scene s = quiet_scene();
  const auto frames = generate_trajectory(s, Vec2(-30.0, 1.5), 60.0, 3.0, 0.5e-3, 4);
  REQUIRE(frames.size() == 6000);
  const double step = 60.0 / 3.6 * 0.5e-3;
  CHECK(step == doctest::Approx(8.3333e-3).epsilon(1e-4));
  for (std::size_t k = 1; k < frames.size(); ++k) {
    CHECK((frames[k].position - frames[k - 1].position).norm() == doctest::Approx(step).epsilon(1e-9));
    CHECK(frames[k].t == doctest::Approx(k * 0.5e-3).epsilon(1e-12));
    CHECK(frames[k].clock_offset == frames[0].clock_offset);
  }
  CHECK(frames[0].clock_offset >= 0.0);
  CHECK(frames[0].clock_offset <= 50e-9);
  CHECK(frames[0].position.z() == s.lanes[0].roof_height);
  CHECK(frames[0].velocity.x() == doctest::Approx(60.0 / 3.6));

  SUBCASE("opposite lane drives the other way")
  {
    const auto back = generate_trajectory(s, Vec2(30.0, 5.0), 60.0, 0.01, 0.5e-3, 4);
    CHECK(back.back().position.x() < back.front().position.x());
  }
}

TEST_CASE("true paths are sorted and LOS is present unless blocked")
{
  Scene s = default_scene();
  s.blockage.rate_hz = 4.0;
  const auto frames = generate_trajectory(s, Vec2(-20.0, 1.5), 60.0, 2.0, 2e-3, 9);
  int blocked = 0;
  for (const auto &f : frames) {
    for (std::size_t k = 1; k < f.true_paths.size(); ++k) CHECK(f.true_paths[k].toa >= f.true_paths[k - 1].toa);
    const bool has_los = std::any_of(f.true_paths.begin(), f.true_paths.end(),
                                     [](const PathParams &p) { return p.order == PathOrder::LOS; });
    if (f.los_blocked) {
      CHECK_FALSE(has_los);
      ++blocked;
    } else {
      CHECK(has_los);
      CHECK(f.true_paths.front().order == PathOrder::LOS);
      CHECK(f.true_paths.front().tdoa == 0.0);
    }
  }
  CHECK(blocked > 0);
  CHECK(blocked < static_cast<int>(frames.size()));
}

TEST_CASE("single wall obeys the mirror identity")
{
  Scene s = quiet_scene();
  s.walls.resize(1);
  s.ground.enabled = false;
  s.second_order = false;
  const Vec3 rx(12.0, 1.5, 1.6);
  const auto paths = trace_paths(s, rx, 0.0, false);
  REQUIRE(paths.size() == 2);
  const auto ref = oracle::bounce_path(s.bs_position, rx, {s.walls[0].point, s.walls[0].normal});
  const PathParams &p = paths[1];
  CHECK(p.order == PathOrder::FirstOrder);
  CHECK(std::abs(p.dod_az - ref.dod_az) < 1e-9);
  CHECK(std::abs(p.dod_el - ref.dod_el) < 1e-9);
  CHECK(std::abs(p.doa_az - ref.doa_az) < 1e-9);
  CHECK(std::abs(p.doa_el - ref.doa_el) < 1e-9);
  CHECK(std::abs(p.toa - ref.toa) * kSpeedOfLight < 1e-9);
}

TEST_CASE("no reflectors leaves only the LOS")
{
  Scene s = quiet_scene();
  s.walls.clear();
  s.ground.enabled = false;
  const auto frames = generate_trajectory(s, Vec2(-10.0, 1.5), 60.0, 0.05, 0.5e-3, 2);
  for (const auto &f : frames) {
    REQUIRE(f.true_paths.size() == 1);
    CHECK(f.true_paths[0].order == PathOrder::LOS);
  }
}

TEST_CASE("image-method geometry of every bounce")
{
  const Scene s = quiet_scene();
  const auto planes = planes_of(s);
  for (double x : {-60.0, -25.0, -3.0, 7.0, 33.0, 70.0})
    for (double y : {1.5, 5.0}) {
      const Vec3 rx(x, y, 1.6);
      const double offset = 12e-9;
      const auto paths = trace_paths(s, rx, offset, false);
      int first = 0;
      for (const auto &p : paths) {
        if (p.order == PathOrder::LOS) {
          CHECK(std::abs((rx - s.bs_position).norm() - kSpeedOfLight * (p.toa - offset)) < 1e-9);
          continue;
        }
        if (p.order != PathOrder::FirstOrder) continue;
        ++first;
        BounceCheck best;
        for (const auto &pl : planes) {
          const auto c = check_bounce(p, s.bs_position, rx, offset, pl);
          if (c.snell < best.snell) best = c;
        }
        CHECK(best.snell < 1e-9);
        CHECK(best.length < 1e-9);
      }
      CHECK(first == 3);
    }
}

TEST_CASE("second-order paths are weaker than their first-order legs")
{
  const Scene s = quiet_scene();
  const auto paths = trace_paths(s, Vec3(20.0, 1.5, 1.6), 0.0, false);
  double strongest_second = 0.0, weakest_first = 1.0;
  for (const auto &p : paths) {
    if (p.order == PathOrder::HigherOrder) strongest_second = std::max(strongest_second, std::abs(p.gain));
    if (p.order == PathOrder::FirstOrder) weakest_first = std::min(weakest_first, std::abs(p.gain));
  }
  CHECK(strongest_second > 0.0);
  CHECK(strongest_second < weakest_first);
}

TEST_CASE("unblocked frames with a visible reflection are LOS-localizable")
{
  const auto frames = generate_trajectory(quiet_scene(), Vec2(-40.0, 1.5), 60.0, 3.0, 10e-3, 3);
  int checked = 0;
  for (const auto &f : frames) {
    const bool reflection = std::any_of(f.true_paths.begin(), f.true_paths.end(),
                                        [](const PathParams &p) { return p.order == PathOrder::FirstOrder; });
    if (f.los_blocked || !reflection) continue;
    const auto loc = localizable(f.true_paths);
    CHECK(loc.ok);
    CHECK(loc.mode == LocMode::LOS_Geometric);
    ++checked;
  }
  CHECK(checked > 200);
}

TEST_CASE("generation is deterministic in the seed")
{
  Scene s = default_scene();
  s.blockage.rate_hz = 3.0;
  const auto a = generate_trajectory(s, Vec2(-5.0, 5.0), 60.0, 0.5, 0.5e-3, 99);
  const auto b = generate_trajectory(s, Vec2(-5.0, 5.0), 60.0, 0.5, 0.5e-3, 99);
  REQUIRE(a.size() == b.size());
  for (std::size_t k = 0; k < a.size(); ++k) {
    CHECK(a[k].position == b[k].position);
    CHECK(a[k].los_blocked == b[k].los_blocked);
    CHECK(a[k].active_panel == b[k].active_panel);
    REQUIRE(a[k].true_paths.size() == b[k].true_paths.size());
    for (std::size_t p = 0; p < a[k].true_paths.size(); ++p) {
      CHECK(a[k].true_paths[p].gain == b[k].true_paths[p].gain);
      CHECK(a[k].true_paths[p].toa == b[k].true_paths[p].toa);
    }
  }
  const auto c = generate_trajectory(s, Vec2(-5.0, 5.0), 60.0, 0.5, 0.5e-3, 100);
  CHECK(c[0].clock_offset != a[0].clock_offset);
}

TEST_CASE("trajectory errors")
{
  const Scene s = default_scene();
  try {
    generate_trajectory(s, Vec2(0.0, 8.5), 60.0, 1.0, 0.5e-3, 1);
    FAIL("expected StartOutsideLane");
  } catch (const Error &e) {
    CHECK(e.code() == ErrorCode::StartOutsideLane);
  }
  CHECK(lane_of(s, Vec2(0.0, 1.5)) == 0);
  CHECK(lane_of(s, Vec2(0.0, 5.0)) == 1);
  CHECK(lane_of(s, Vec2(0.0, 20.0)) == -1);
  CHECK_THROWS_AS(generate_trajectory(s, Vec2(0.0, 1.5), 0.0, 1.0, 0.5e-3, 1), Error);
  CHECK_THROWS_AS(generate_trajectory(s, Vec2(0.0, 1.5), 60.0, -1.0, 0.5e-3, 1), Error);
}

TEST_CASE("visibility filter")
{
  const Scene s = quiet_scene();
  const Vec3 rx(15.0, 1.5, 1.6);
  const auto all = trace_paths(s, rx, 0.0, false);
  const auto panels = s.vehicle_panels(rx, Vec3::UnitX());
  REQUIRE(panels.size() == 4);
  std::size_t total = 0;
  for (const auto &panel : panels) {
    const auto vis = visible_paths(all, s.bs_array(), panel);
    for (const auto &p : vis) CHECK(panel.broadside().dot(unit_direction(p.doa_az, p.doa_el)) > 0.0);
    total += vis.size();
  }
  CHECK(total >= all.size() - 1);
}

TEST_CASE("frame to channel")
{
  WaveformConfig cfg;
  cfg.nd = 32;
  ArrayGeometry one;

  SUBCASE("LOS-only frame with single elements is one pulse")
  {
    Scene s = quiet_scene();
    s.walls.clear();
    s.ground.enabled = false;
    TrajectoryFrame f;
    f.true_paths = trace_paths(s, Vec3(6.0, 1.5, 1.6), 0.0, false);
    REQUIRE(f.true_paths.size() == 1);
    cfg.t_off = f.true_paths[0].toa - 4e-9;
    const auto h = frame_to_channel(f, s, cfg, one, one);
    const RVec p = delay_response(4e-9, cfg);
    for (int d = 0; d < cfg.nd; ++d) CHECK(std::abs(h[d](0, 0) - f.true_paths[0].gain * p[d]) < 1e-15);
  }

  SUBCASE("superposition and blocked LOS")
  {
    Scene s = quiet_scene();
    s.second_order = false;
    cfg.nd = 64;
    ArrayGeometry tx, rx;
    tx.nx = tx.ny = 2;
    rx.nx = 3;
    const Vec3 pos(4.0, 5.0, 1.6);
    TrajectoryFrame open, blocked;
    open.true_paths = trace_paths(s, pos, 0.0, false);
    blocked.true_paths = trace_paths(s, pos, 0.0, true);
    REQUIRE(open.true_paths.size() == blocked.true_paths.size() + 1);
    cfg.t_off = open.true_paths.front().toa - 3e-9;
    REQUIRE(open.true_paths.back().toa - cfg.t_off < (cfg.nd - 1 - cfg.guard_taps) * cfg.ts);

    const auto h = frame_to_channel(open, s, cfg, tx, rx);
    ChannelTensor sum(cfg.nd, CMat::Zero(rx.size(), tx.size()));
    for (const auto &p : open.true_paths) {
      const std::vector<PathParams> one_path{p};
      const auto hp = channel_taps(one_path, cfg, tx, rx);
      for (int d = 0; d < cfg.nd; ++d) sum[d] += hp[d];
    }
    double peak = 0.0;
    for (int d = 0; d < cfg.nd; ++d) peak = std::max(peak, h[d].cwiseAbs().maxCoeff());
    for (int d = 0; d < cfg.nd; ++d) CHECK((h[d] - sum[d]).cwiseAbs().maxCoeff() < 1e-12 * peak);

    // removing the LOS removes exactly its synthesis
    const std::vector<PathParams> los{open.true_paths.front()};
    const auto hl = channel_taps(los, cfg, tx, rx);
    const auto hb = frame_to_channel(blocked, s, cfg, tx, rx);
    for (int d = 0; d < cfg.nd; ++d) CHECK((h[d] - hl[d] - hb[d]).cwiseAbs().maxCoeff() < 1e-12 * peak);
  }
}
