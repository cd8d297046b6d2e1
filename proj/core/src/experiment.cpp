#include "mmtrack/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <mutex>
#include <random>
#include <thread>

#include "json.hpp"

namespace mmtrack
{
namespace
{

using nlohmann::ordered_json;
using json = nlohmann::json;

// Reads optional keys of one JSON object, remembering which were consumed so
// leftovers can be reported.
class Fields
{
public:
  Fields(const json &j, std::string where) : j_(j), where_(std::move(where))
  {
    if (!j.is_object()) throw Error(ErrorCode::Config, where_ + " must be an object");
  }

  template <class T> void get(const char *key, T &value)
  {
    seen_.push_back(key);
    if (!j_.contains(key)) return;
    try {
      value = j_.at(key).get<T>();
    } catch (const json::exception &e) {
      throw Error(ErrorCode::Config, where_ + "." + key + ": " + e.what());
    }
  }

  void get_vec3(const char *key, Vec3 &value)
  {
    std::vector<double> v{value.x(), value.y(), value.z()};
    get(key, v);
    if (v.size() != 3) throw Error(ErrorCode::Config, where_ + "." + key + " needs 3 numbers");
    value = Vec3(v[0], v[1], v[2]);
  }

  const json *child(const char *key)
  {
    seen_.push_back(key);
    return j_.contains(key) ? &j_.at(key) : nullptr;
  }

  std::string path(const std::string &key) const { return where_ + "." + key; }

  void finish() const
  {
    for (const auto &[key, value] : j_.items())
      if (std::find(seen_.begin(), seen_.end(), key) == seen_.end())
        throw Error(ErrorCode::Config, "unknown key " + where_ + "." + key);
  }

private:
  const json &j_;
  std::string where_;
  std::vector<std::string> seen_;
};

ordered_json vec3_json(const Vec3 &v) { return ordered_json::array({v.x(), v.y(), v.z()}); }

ordered_json scene_json(const Scene &s)
{
  ordered_json j;
  j["bs_position"] = vec3_json(s.bs_position);
  j["bs_facing_az_rad"] = s.bs_facing_az;
  j["bs_downtilt_rad"] = s.bs_downtilt;
  j["bs_nx"] = s.bs_nx;
  j["bs_ny"] = s.bs_ny;
  j["walls"] = ordered_json::array();
  for (const auto &w : s.walls)
    j["walls"].push_back({{"name", w.name},
                          {"point", vec3_json(w.point)},
                          {"normal", vec3_json(w.normal)},
                          {"u_min", w.u_min},
                          {"u_max", w.u_max},
                          {"z_min", w.z_min},
                          {"z_max", w.z_max},
                          {"loss_db", w.loss_db}});
  j["ground"] = {{"enabled", s.ground.enabled}, {"z", s.ground.z}, {"loss_db", s.ground.loss_db}};
  j["lanes"] = ordered_json::array();
  for (const auto &l : s.lanes)
    j["lanes"].push_back({{"y", l.y},
                          {"roof_height", l.roof_height},
                          {"half_width", l.half_width},
                          {"direction", l.direction},
                          {"speed_limit_kmh", l.speed_limit_kmh}});
  j["panels"] = {{"count", s.panels.count}, {"tilt_rad", s.panels.tilt}, {"nx", s.panels.nx}, {"ny", s.panels.ny}};
  j["blockage"] = {{"rate_hz", s.blockage.rate_hz}, {"mean_duration", s.blockage.mean_duration}};
  j["second_order"] = s.second_order;
  j["second_order_extra_loss_db"] = s.second_order_extra_loss_db;
  j["clock_offset_max"] = s.clock_offset_max;
  j["fc"] = s.fc;
  j["seed"] = s.seed;
  return j;
}

Scene scene_from(const json &j, const std::string &where, Scene s)
{
  Fields f(j, where);
  f.get_vec3("bs_position", s.bs_position);
  f.get("bs_facing_az_rad", s.bs_facing_az);
  f.get("bs_downtilt_rad", s.bs_downtilt);
  f.get("bs_nx", s.bs_nx);
  f.get("bs_ny", s.bs_ny);
  if (const json *walls = f.child("walls")) {
    s.walls.clear();
    if (!walls->is_array()) throw Error(ErrorCode::Config, f.path("walls") + " must be an array");
    for (std::size_t i = 0; i < walls->size(); ++i) {
      Wall w;
      Fields g(walls->at(i), f.path("walls[" + std::to_string(i) + "]"));
      g.get("name", w.name);
      g.get_vec3("point", w.point);
      g.get_vec3("normal", w.normal);
      g.get("u_min", w.u_min);
      g.get("u_max", w.u_max);
      g.get("z_min", w.z_min);
      g.get("z_max", w.z_max);
      g.get("loss_db", w.loss_db);
      g.finish();
      s.walls.push_back(w);
    }
  }
  if (const json *ground = f.child("ground")) {
    Fields g(*ground, f.path("ground"));
    g.get("enabled", s.ground.enabled);
    g.get("z", s.ground.z);
    g.get("loss_db", s.ground.loss_db);
    g.finish();
  }
  if (const json *lanes = f.child("lanes")) {
    s.lanes.clear();
    if (!lanes->is_array()) throw Error(ErrorCode::Config, f.path("lanes") + " must be an array");
    for (std::size_t i = 0; i < lanes->size(); ++i) {
      Lane l;
      Fields g(lanes->at(i), f.path("lanes[" + std::to_string(i) + "]"));
      g.get("y", l.y);
      g.get("roof_height", l.roof_height);
      g.get("half_width", l.half_width);
      g.get("direction", l.direction);
      g.get("speed_limit_kmh", l.speed_limit_kmh);
      g.finish();
      s.lanes.push_back(l);
    }
  }
  if (const json *panels = f.child("panels")) {
    Fields g(*panels, f.path("panels"));
    g.get("count", s.panels.count);
    g.get("tilt_rad", s.panels.tilt);
    g.get("nx", s.panels.nx);
    g.get("ny", s.panels.ny);
    g.finish();
  }
  if (const json *blockage = f.child("blockage")) {
    Fields g(*blockage, f.path("blockage"));
    g.get("rate_hz", s.blockage.rate_hz);
    g.get("mean_duration", s.blockage.mean_duration);
    g.finish();
  }
  f.get("second_order", s.second_order);
  f.get("second_order_extra_loss_db", s.second_order_extra_loss_db);
  f.get("clock_offset_max", s.clock_offset_max);
  f.get("fc", s.fc);
  f.get("seed", s.seed);
  f.finish();
  return s;
}

std::string_view beam_name(BeamKind k) { return k == BeamKind::Dft ? "dft" : "random_phase"; }

ordered_json tracker_json(const TrackerConfig &c)
{
  ordered_json j;
  const WaveformConfig &w = c.wave;
  j["wave"] = {{"fc", w.fc},           {"bandwidth", w.bandwidth}, {"ts", w.ts},
               {"nd", w.nd},           {"rolloff", w.rolloff},     {"q", w.q},
               {"pt_dbm", w.pt_dbm},   {"noise_var", w.noise_var}, {"t_off", w.t_off},
               {"guard_taps", w.guard_taps}};
  j["tp"] = c.tp;
  j["n_est"] = c.n_est;
  j["refine_sweeps"] = c.refine_sweeps;
  j["reduced"] = {{"omega_rad", c.reduced.omega},
                  {"d_omega_rad", c.reduced.d_omega},
                  {"eps", c.reduced.eps},
                  {"d_tau", c.reduced.d_tau},
                  {"eps_low", c.reduced.eps_low}};
  j["full_angle_step_rad"] = c.full_angle_step;
  j["full_delay_step"] = c.full_delay_step;
  j["full_period"] = c.full_period;
  j["beams"] = beam_name(c.beams);
  j["tx_beams"] = c.tx_beams;
  j["rx_beams"] = c.rx_beams;
  j["classify"] = {{"first_order_threshold", c.classify.first_order_threshold},
                   {"los_delay_tol", c.classify.los_delay_tol},
                   {"los_angle_tol_rad", c.classify.los_angle_tol},
                   {"min_rel_gain", c.classify.min_rel_gain}};
  j["speed_error"] = c.speed_error;
  j["residual_gate"] = c.residual_gate;
  j["kf_process_noise"] = c.kf_process_noise;
  j["kf_measurement_noise"] = c.kf_measurement_noise;
  j["history_frames"] = c.history_frames;
  j["history_stride"] = c.history_stride;
  return j;
}

TrackerConfig tracker_from(const json &j, const std::string &where, TrackerConfig c)
{
  Fields f(j, where);
  if (const json *wave = f.child("wave")) {
    Fields g(*wave, f.path("wave"));
    WaveformConfig &w = c.wave;
    g.get("fc", w.fc);
    g.get("bandwidth", w.bandwidth);
    g.get("ts", w.ts);
    g.get("nd", w.nd);
    g.get("rolloff", w.rolloff);
    g.get("q", w.q);
    g.get("pt_dbm", w.pt_dbm);
    g.get("noise_var", w.noise_var);
    g.get("t_off", w.t_off);
    g.get("guard_taps", w.guard_taps);
    g.finish();
  }
  f.get("tp", c.tp);
  f.get("n_est", c.n_est);
  f.get("refine_sweeps", c.refine_sweeps);
  if (const json *red = f.child("reduced")) {
    Fields g(*red, f.path("reduced"));
    g.get("omega_rad", c.reduced.omega);
    g.get("d_omega_rad", c.reduced.d_omega);
    g.get("eps", c.reduced.eps);
    g.get("d_tau", c.reduced.d_tau);
    g.get("eps_low", c.reduced.eps_low);
    g.finish();
  }
  f.get("full_angle_step_rad", c.full_angle_step);
  f.get("full_delay_step", c.full_delay_step);
  f.get("full_period", c.full_period);
  std::string beams(beam_name(c.beams));
  f.get("beams", beams);
  if (beams == "dft")
    c.beams = BeamKind::Dft;
  else if (beams == "random_phase")
    c.beams = BeamKind::RandomPhase;
  else
    throw Error(ErrorCode::Config, f.path("beams") + " must be \"random_phase\" or \"dft\"");
  f.get("tx_beams", c.tx_beams);
  f.get("rx_beams", c.rx_beams);
  if (const json *cl = f.child("classify")) {
    Fields g(*cl, f.path("classify"));
    g.get("first_order_threshold", c.classify.first_order_threshold);
    g.get("los_delay_tol", c.classify.los_delay_tol);
    g.get("los_angle_tol_rad", c.classify.los_angle_tol);
    g.get("min_rel_gain", c.classify.min_rel_gain);
    g.finish();
  }
  f.get("speed_error", c.speed_error);
  f.get("residual_gate", c.residual_gate);
  f.get("kf_process_noise", c.kf_process_noise);
  f.get("kf_measurement_noise", c.kf_measurement_noise);
  f.get("history_frames", c.history_frames);
  f.get("history_stride", c.history_stride);
  f.finish();
  return c;
}

json parse(std::string_view text, const char *what)
{
  try {
    return json::parse(text);
  } catch (const json::parse_error &e) {
    throw Error(ErrorCode::Config, std::string(what) + " is not valid JSON: " + e.what());
  }
}

} // namespace

void validate(const RunConfig &cfg)
{
  validate(cfg.scene);
  validate(cfg.tracker);
  if (cfg.trajectories < 1) throw Error(ErrorCode::Config, "trajectories must be >= 1");
  if (!(cfg.duration > 0.0)) throw Error(ErrorCode::Config, "duration must be positive");
  if (!(cfg.speed_kmh > 0.0)) throw Error(ErrorCode::Config, "speed_kmh must be positive");
  if (cfg.jobs < 1) throw Error(ErrorCode::Config, "jobs must be >= 1");
}

std::string to_json(const RunConfig &cfg)
{
  ordered_json j;
  j["scene"] = scene_json(cfg.scene);
  j["tracker"] = tracker_json(cfg.tracker);
  j["trajectories"] = cfg.trajectories;
  j["duration"] = cfg.duration;
  j["speed_kmh"] = cfg.speed_kmh;
  j["seed"] = cfg.seed;
  j["jobs"] = cfg.jobs;
  j["output_dir"] = cfg.output_dir.string();
  return j.dump(2) + "\n";
}

RunConfig run_config_from_json(std::string_view text, RunConfig cfg)
{
  const json j = parse(text, "run config");
  Fields f(j, "config");
  if (const json *scene = f.child("scene")) cfg.scene = scene_from(*scene, "config.scene", cfg.scene);
  if (const json *tracker = f.child("tracker")) cfg.tracker = tracker_from(*tracker, "config.tracker", cfg.tracker);
  f.get("trajectories", cfg.trajectories);
  f.get("duration", cfg.duration);
  f.get("speed_kmh", cfg.speed_kmh);
  f.get("seed", cfg.seed);
  f.get("jobs", cfg.jobs);
  std::string out = cfg.output_dir.string();
  f.get("output_dir", out);
  cfg.output_dir = out;
  f.finish();
  return cfg;
}

std::string to_json(const Scene &scene) { return scene_json(scene).dump(2) + "\n"; }

Scene scene_from_json(std::string_view text, Scene base)
{
  return scene_from(parse(text, "scene"), "scene", std::move(base));
}

std::vector<TrajectorySpec> plan_trajectories(const RunConfig &cfg)
{
  if (cfg.scene.lanes.empty()) throw Error(ErrorCode::Config, "scene has no lanes");
  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> offset(-40.0, -10.0);
  std::vector<TrajectorySpec> out;
  for (int k = 0; k < cfg.trajectories; ++k) {
    const Lane &lane = cfg.scene.lanes[static_cast<std::size_t>(k) % cfg.scene.lanes.size()];
    TrajectorySpec s;
    s.id = k;
    // upstream of the BS, so the drive passes under it
    s.start = Vec2(lane.direction * offset(rng) + cfg.scene.bs_position.x(), lane.y);
    s.seed = rng();
    out.push_back(s);
  }
  return out;
}

std::vector<FrameRecord> run_experiment(const RunConfig &cfg)
{
  validate(cfg);
  const auto plan = plan_trajectories(cfg);
  std::vector<std::vector<FrameRecord>> results(plan.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (std::size_t i = next++; i < plan.size(); i = next++) {
      try {
        const auto frames = generate_trajectory(cfg.scene, plan[i].start, cfg.speed_kmh, cfg.duration,
                                                cfg.tracker.tp, plan[i].seed);
        results[i] = run_trajectory(cfg.scene, frames, cfg.tracker, plan[i].id, plan[i].seed);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  const int n_threads = std::min<int>(cfg.jobs, static_cast<int>(plan.size()));
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);
  std::vector<FrameRecord> out;
  for (auto &r : results)
    for (auto &rec : r) out.push_back(std::move(rec));
  return out;
}

} // namespace mmtrack
