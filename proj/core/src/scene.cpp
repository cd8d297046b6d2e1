#include "mmtrack/scene.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <random>

namespace mmtrack
{
namespace
{

struct Reflector
{
  Vec3 point;
  Vec3 normal;
  bool bounded = false;
  Vec3 tangent = Vec3::Zero();
  double u_min = 0, u_max = 0, z_min = 0, z_max = 0;
  double loss_db = 0;

  double side(const Vec3 &x) const { return normal.dot(x - point); }
  bool contains(const Vec3 &s) const
  {
    if (!bounded) return true;
    const double u = tangent.dot(s - point);
    return u >= u_min && u <= u_max && s.z() >= z_min && s.z() <= z_max;
  }
  double gamma() const { return std::pow(10.0, -loss_db / 20.0); }
};

std::vector<Reflector> reflectors(const Scene &scene)
{
  std::vector<Reflector> out;
  for (const auto &w : scene.walls) {
    Reflector r;
    r.point = w.point;
    r.normal = w.normal.normalized();
    r.bounded = true;
    r.tangent = Vec3(-r.normal.y(), r.normal.x(), 0.0).normalized();
    r.u_min = w.u_min;
    r.u_max = w.u_max;
    r.z_min = w.z_min;
    r.z_max = w.z_max;
    r.loss_db = w.loss_db;
    out.push_back(r);
  }
  if (scene.ground.enabled) {
    Reflector g;
    g.point = Vec3(0.0, 0.0, scene.ground.z);
    g.normal = Vec3::UnitZ();
    g.loss_db = scene.ground.loss_db;
    out.push_back(g);
  }
  return out;
}

// Point where segment a->b crosses the plane, if a is in front and b behind.
std::optional<Vec3> crossing(const Reflector &r, const Vec3 &a, const Vec3 &b)
{
  const double sa = r.side(a);
  const double sb = r.side(b);
  if (!(sa > 0.0) || !(sb < 0.0)) return std::nullopt;
  const double t = sa / (sa - sb);
  const Vec3 s = a + t * (b - a);
  if (!r.contains(s)) return std::nullopt;
  return s;
}

PathParams make_path(const Vec3 &bs, const Vec3 &rx, const Vec3 &first_hit, const Vec3 &last_hit, double length,
                     double amplitude, double lambda, double clock_offset, PathOrder order)
{
  PathParams p;
  const AzEl dod = az_el(first_hit - bs);
  const AzEl doa = az_el(last_hit - rx);
  p.dod_az = dod.az;
  p.dod_el = dod.el;
  p.doa_az = doa.az;
  p.doa_el = doa.el;
  p.toa = length / kSpeedOfLight + clock_offset;
  p.gain = std::polar(amplitude * lambda / (4.0 * kPi * length), -2.0 * kPi * length / lambda);
  p.order = order;
  return p;
}

void sort_by_toa(std::vector<PathParams> &paths)
{
  std::stable_sort(paths.begin(), paths.end(), [](const PathParams &a, const PathParams &b) { return a.toa < b.toa; });
  reference_tdoa(paths);
}

} // namespace

ArrayGeometry Scene::bs_array() const
{
  ArrayGeometry g;
  g.nx = bs_nx;
  g.ny = bs_ny;
  const Vec3 horizontal(std::cos(bs_facing_az), std::sin(bs_facing_az), 0.0);
  const Vec3 broadside = std::cos(bs_downtilt) * horizontal - std::sin(bs_downtilt) * Vec3::UnitZ();
  g.orientation = frame_from_broadside(broadside, Vec3(-horizontal.y(), horizontal.x(), 0.0));
  g.origin = bs_position;
  return g;
}

std::vector<ArrayGeometry> Scene::vehicle_panels(const Vec3 &position, const Vec3 &forward) const
{
  const Vec3 fwd = Vec3(forward.x(), forward.y(), 0.0).normalized();
  const Vec3 left = Vec3::UnitZ().cross(fwd);
  const std::array<Vec3, 4> sides{fwd, left, -fwd, -left};
  std::vector<ArrayGeometry> out;
  for (int k = 0; k < panels.count; ++k) {
    ArrayGeometry g;
    g.nx = panels.nx;
    g.ny = panels.ny;
    const Vec3 side = sides[static_cast<std::size_t>(k) % 4];
    const Vec3 broadside = std::cos(panels.tilt) * Vec3::UnitZ() + std::sin(panels.tilt) * side;
    const Vec3 hint = std::abs(broadside.dot(fwd)) > 0.9 ? left : fwd;
    g.orientation = frame_from_broadside(broadside, hint);
    g.origin = position;
    out.push_back(g);
  }
  return out;
}

void validate(const Scene &scene)
{
  for (const auto &w : scene.walls) {
    if (std::abs(w.normal.norm() - 1.0) > 1e-9) throw Error(ErrorCode::Config, "wall '" + w.name + "' normal is not unit length");
    if (std::abs(w.normal.z()) > 1e-12) throw Error(ErrorCode::Config, "wall '" + w.name + "' is not vertical");
    if (w.loss_db < 0.0) throw Error(ErrorCode::Config, "wall '" + w.name + "' has negative reflection loss");
  }
  if (scene.ground.loss_db < 0.0) throw Error(ErrorCode::Config, "ground reflection loss must be >= 0");
  if (scene.lanes.empty()) throw Error(ErrorCode::Config, "scene has no lanes");
  if (scene.panels.count < 1 || scene.panels.count > 4) throw Error(ErrorCode::Config, "panel count must be 1..4");
  if (scene.bs_nx < 1 || scene.bs_ny < 1 || scene.panels.nx < 1 || scene.panels.ny < 1)
    throw Error(ErrorCode::Config, "array sizes must be >= 1");
  if (scene.clock_offset_max < 0.0) throw Error(ErrorCode::Config, "clock_offset_max must be >= 0");
  if (scene.blockage.rate_hz < 0.0 || scene.blockage.mean_duration < 0.0)
    throw Error(ErrorCode::Config, "blockage parameters must be >= 0");
}

Scene default_scene()
{
  Scene s;
  Wall a;
  a.name = "north";
  a.point = Vec3(0.0, 10.0, 0.0);
  a.normal = -Vec3::UnitY();
  a.u_min = -80.0;
  a.u_max = 80.0;
  Wall b;
  b.name = "south";
  b.point = Vec3(0.0, -2.0, 0.0);
  b.normal = Vec3::UnitY();
  b.u_min = -80.0;
  b.u_max = 80.0;
  s.walls = {a, b};
  Lane l1;
  l1.y = 1.5;
  l1.direction = 1;
  Lane l2;
  l2.y = 5.0;
  l2.direction = -1;
  s.lanes = {l1, l2};
  return s;
}

std::vector<PathParams> trace_paths(const Scene &scene, const Vec3 &rx, double clock_offset, bool los_blocked)
{
  const Vec3 &bs = scene.bs_position;
  const double lambda = scene.wavelength();
  const auto refl = reflectors(scene);
  std::vector<PathParams> out;
  if (!los_blocked) out.push_back(make_path(bs, rx, rx, bs, (rx - bs).norm(), 1.0, lambda, clock_offset, PathOrder::LOS));

  for (const auto &r : refl) {
    if (!(r.side(bs) > 0.0)) continue;
    const Vec3 img = mirror_point(bs, r.point, r.normal);
    const auto s = crossing(r, rx, img);
    if (!s) continue;
    out.push_back(make_path(bs, rx, *s, *s, (img - rx).norm(), r.gamma(), lambda, clock_offset, PathOrder::FirstOrder));
  }

  if (scene.second_order) {
    const double extra = std::pow(10.0, -scene.second_order_extra_loss_db / 20.0);
    for (std::size_t i = 0; i < refl.size(); ++i)
      for (std::size_t k = 0; k < refl.size(); ++k) {
        if (i == k) continue;
        const Reflector &r1 = refl[i];
        const Reflector &r2 = refl[k];
        if (!(r1.side(bs) > 0.0)) continue;
        const Vec3 img1 = mirror_point(bs, r1.point, r1.normal);
        const Vec3 img2 = mirror_point(img1, r2.point, r2.normal);
        const auto s2 = crossing(r2, rx, img2);
        if (!s2) continue;
        const auto s1 = crossing(r1, *s2, img1);
        if (!s1) continue;
        out.push_back(make_path(bs, rx, *s1, *s2, (img2 - rx).norm(), r1.gamma() * r2.gamma() * extra, lambda,
                                clock_offset, PathOrder::HigherOrder));
      }
  }
  sort_by_toa(out);
  return out;
}

std::vector<PathParams> visible_paths(const std::vector<PathParams> &paths, const ArrayGeometry &bs,
                                      const ArrayGeometry &panel)
{
  std::vector<PathParams> out;
  for (const auto &p : paths) {
    const double tx_z = bs.broadside().dot(unit_direction(p.dod_az, p.dod_el));
    const double rx_z = panel.broadside().dot(unit_direction(p.doa_az, p.doa_el));
    if (tx_z > 0.0 && rx_z > 0.0) out.push_back(p);
  }
  sort_by_toa(out);
  return out;
}

int lane_of(const Scene &scene, const Vec2 &xy)
{
  for (std::size_t k = 0; k < scene.lanes.size(); ++k)
    if (std::abs(xy.y() - scene.lanes[k].y) <= scene.lanes[k].half_width) return static_cast<int>(k);
  return -1;
}

std::vector<TrajectoryFrame> generate_trajectory(const Scene &scene, const Vec2 &start_xy, double speed_kmh,
                                                 double duration, double tp, std::uint64_t seed)
{
  if (!(speed_kmh > 0.0)) throw Error(ErrorCode::InvalidArgument, "speed must be positive");
  if (!(duration > 0.0) || !(tp > 0.0)) throw Error(ErrorCode::InvalidArgument, "duration and tp must be positive");
  const int lane = lane_of(scene, start_xy);
  if (lane < 0) throw Error(ErrorCode::StartOutsideLane, "start (" + std::to_string(start_xy.x()) + ", " +
                                                             std::to_string(start_xy.y()) + ") is not on a lane");
  const Lane &ln = scene.lanes[lane];

  std::mt19937_64 rng(seed);
  const double clock_offset = std::uniform_real_distribution<double>(0.0, scene.clock_offset_max)(rng);
  std::vector<std::pair<double, double>> blocked;
  if (scene.blockage.rate_hz > 0.0 && scene.blockage.mean_duration > 0.0) {
    std::exponential_distribution<double> gap(scene.blockage.rate_hz);
    std::exponential_distribution<double> len(1.0 / scene.blockage.mean_duration);
    double t = 0.0;
    while (true) {
      t += gap(rng);
      if (t > duration) break;
      const double d = len(rng);
      blocked.emplace_back(t, t + d);
      t += d;
    }
  }

  const double speed = speed_kmh / 3.6;
  const Vec3 forward(static_cast<double>(ln.direction), 0.0, 0.0);
  const Vec3 velocity = speed * forward;
  const Vec3 start(start_xy.x(), start_xy.y(), ln.roof_height);
  const ArrayGeometry bs = scene.bs_array();
  Mat3 heading;
  heading.col(0) = forward;
  heading.col(1) = Vec3::UnitZ().cross(forward);
  heading.col(2) = Vec3::UnitZ();

  const int n = static_cast<int>(std::floor(duration / tp + 1e-9));
  std::vector<TrajectoryFrame> frames;
  frames.reserve(n);
  for (int k = 0; k < n; ++k) {
    TrajectoryFrame f;
    f.index = k;
    f.t = k * tp;
    f.position = start + f.t * velocity;
    f.velocity = velocity;
    f.heading = heading;
    f.clock_offset = clock_offset;
    f.los_blocked = std::any_of(blocked.begin(), blocked.end(),
                                [&](const auto &iv) { return f.t >= iv.first && f.t < iv.second; });
    const auto all = trace_paths(scene, f.position, clock_offset, f.los_blocked);
    const auto panels = scene.vehicle_panels(f.position, forward);
    double best = -1.0;
    for (std::size_t p = 0; p < panels.size(); ++p) {
      auto vis = visible_paths(all, bs, panels[p]);
      double energy = 0.0;
      for (const auto &path : vis) energy += std::norm(path.gain);
      if (energy > best) {
        best = energy;
        f.active_panel = static_cast<int>(p);
        f.true_paths = std::move(vis);
      }
    }
    frames.push_back(std::move(f));
  }
  return frames;
}

ChannelTensor frame_to_channel(const TrajectoryFrame &frame, const Scene &scene, const WaveformConfig &cfg,
                               const ArrayGeometry &tx, const ArrayGeometry &rx)
{
  (void)scene;
  return channel_taps(frame.true_paths, cfg, tx, rx);
}

} // namespace mmtrack
