// mmtrack: scene generation, tracking runs, dataset export and evaluation.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"

#include "mmtrack/dataset.hpp"
#include "mmtrack/evaluation.hpp"
#include "mmtrack/experiment.hpp"
#include "mmtrack/io.hpp"

namespace fs = std::filesystem;
using namespace mmtrack;

namespace
{

std::string slurp(const fs::path &path)
{
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::ofstream open_out(const fs::path &path)
{
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  return out;
}

void write_file(const fs::path &path, const std::string &text)
{
  auto out = open_out(path);
  out << text;
  if (!out) throw Error(ErrorCode::Io, "failed writing " + path.string());
}

std::vector<FrameRecord> load_records(const fs::path &path)
{
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  return read_records(in);
}

std::vector<Prediction> load_predictions(const std::string &path)
{
  if (path.empty()) return {};
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path);
  return read_predictions(in);
}

// Flag-level view of RunConfig; angles in degrees, times in ns where noted.
struct Flags
{
  std::string config;
  std::string scene;
  int trajectories = 8;
  double duration = 3.0;
  double speed_kmh = 60.0;
  std::uint64_t seed = 1;
  int jobs = 1;
  std::string out = "out";
  double tp_ms = 0.5;
  int n_est = 5;
  double omega_deg = 15.0;
  double d_omega_deg = 0.175;
  double eps_ns = 0.2;
  double d_tau_ns = 0.01;
  int full_period = 200;
  std::string beams = "random_phase";
};

void add_run_flags(CLI::App *cmd, Flags &f)
{
  cmd->add_option("--config", f.config, "run config JSON; its values override flags")->check(CLI::ExistingFile);
  cmd->add_option("--scene", f.scene, "scene JSON (default: built-in street canyon)")->check(CLI::ExistingFile);
  cmd->add_option("--trajectories", f.trajectories, "number of trajectories")->capture_default_str();
  cmd->add_option("--duration", f.duration, "seconds per trajectory")->capture_default_str();
  cmd->add_option("--speed", f.speed_kmh, "vehicle speed, km/h")->capture_default_str();
  cmd->add_option("--jobs", f.jobs, "trajectories run in parallel")->capture_default_str();
  cmd->add_option("--out", f.out, "output directory")->capture_default_str();
  cmd->add_option("--tp-ms", f.tp_ms, "tracking period, ms")->capture_default_str();
  cmd->add_option("--n-est", f.n_est, "paths estimated per frame")->capture_default_str();
  cmd->add_option("--omega-deg", f.omega_deg, "reduced sector half-width")->capture_default_str();
  cmd->add_option("--d-omega-deg", f.d_omega_deg, "reduced angular step")->capture_default_str();
  cmd->add_option("--eps-ns", f.eps_ns, "reduced delay margin")->capture_default_str();
  cmd->add_option("--d-tau-ns", f.d_tau_ns, "reduced delay step")->capture_default_str();
  cmd->add_option("--full-period", f.full_period, "frames between full re-estimates")->capture_default_str();
  cmd->add_option("--beams", f.beams, "training beams")
      ->check(CLI::IsMember({"random_phase", "dft"}))
      ->capture_default_str();
}

RunConfig resolve(const Flags &f)
{
  RunConfig cfg;
  if (!f.scene.empty()) cfg.scene = scene_from_json(slurp(f.scene));
  cfg.trajectories = f.trajectories;
  cfg.duration = f.duration;
  cfg.speed_kmh = f.speed_kmh;
  cfg.seed = f.seed;
  cfg.jobs = f.jobs;
  cfg.output_dir = f.out;
  TrackerConfig &t = cfg.tracker;
  t.tp = f.tp_ms * 1e-3;
  t.n_est = f.n_est;
  t.reduced.omega = deg2rad(f.omega_deg);
  t.reduced.d_omega = deg2rad(f.d_omega_deg);
  t.reduced.eps = f.eps_ns * 1e-9;
  t.reduced.d_tau = f.d_tau_ns * 1e-9;
  t.full_period = f.full_period;
  t.beams = f.beams == "dft" ? BeamKind::Dft : BeamKind::RandomPhase;
  if (!f.config.empty()) cfg = run_config_from_json(slurp(f.config), cfg);
  validate(cfg);
  return cfg;
}

void write_eval_outputs(const fs::path &dir, const std::vector<FrameRecord> &records, const MetricsReport &report)
{
  write_file(dir / "report.json", report_json(report));
  write_file(dir / "cdf.csv", cdf_csv(report));
  write_file(dir / "traj_overlay.csv", overlay_csv(records));
}

int scene_gen(const Flags &f)
{
  const RunConfig cfg = resolve(f);
  const fs::path dir = cfg.output_dir;
  write_file(dir / "scene.json", to_json(cfg.scene));
  auto out = open_out(dir / "trajectories.jsonl");
  for (const auto &spec : plan_trajectories(cfg)) {
    const auto frames =
        generate_trajectory(cfg.scene, spec.start, cfg.speed_kmh, cfg.duration, cfg.tracker.tp, spec.seed);
    write_trajectory(out, frames, spec.id);
  }
  std::cout << "wrote " << (dir / "scene.json").string() << " and " << (dir / "trajectories.jsonl").string()
            << "\n";
  return 0;
}

int track_run(const Flags &f)
{
  const RunConfig cfg = resolve(f);
  const fs::path dir = cfg.output_dir;
  write_file(dir / "run_config.json", to_json(cfg));
  const auto t0 = std::chrono::steady_clock::now();
  const auto records = run_experiment(cfg);
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  {
    auto out = open_out(dir / "records.jsonl");
    write_records(out, records);
  }
  MetricsReport report = build_report(records);
  report.wall_seconds = seconds;
  write_eval_outputs(dir, records, report);
  const Percentiles init = percentiles(report.initial);
  const Percentiles kf = percentiles(report.kf);
  std::cout << records.size() << " frames in " << seconds << " s\n"
            << "initial p50/p95 " << init.p50 << " / " << init.p95 << " m, kf p50/p95 " << kf.p50 << " / "
            << kf.p95 << " m\n"
            << "outputs in " << dir.string() << "\n";
  return 0;
}

int dataset_export(const std::string &records_path, const std::string &out_dir, int c, int stride, int n_est)
{
  const auto records = load_records(records_path);
  const auto samples = build_samples(records, c, stride, n_est);
  std::vector<int> ids;
  for (const auto &r : records) ids.push_back(r.traj);
  const Split split = split_trajectories(ids);
  const fs::path dir = out_dir;
  auto train = open_out(dir / "train.jsonl");
  auto test = open_out(dir / "test.jsonl");
  std::size_t n_train = 0, n_test = 0;
  for (const auto &s : samples) {
    const bool is_train = std::find(split.train.begin(), split.train.end(), s.traj) != split.train.end();
    (is_train ? train : test) << sample_json(s) << '\n';
    ++(is_train ? n_train : n_test);
  }
  if (!train || !test) throw Error(ErrorCode::Io, "failed writing dataset");
  std::cout << n_train << " training and " << n_test << " test samples in " << dir.string() << "\n";
  return 0;
}

} // namespace

int main(int argc, char **argv)
{
  CLI::App app{"mmWave channel and position tracking"};
  app.require_subcommand(1);

  Flags flags;

  auto *scene = app.add_subcommand("scene", "scene tools")->require_subcommand(1);
  auto *scene_gen_cmd = scene->add_subcommand("gen", "write scene.json and ground-truth trajectories.jsonl");
  add_run_flags(scene_gen_cmd, flags);
  scene_gen_cmd->add_option("--seed", flags.seed, "trajectory seed")->capture_default_str();

  auto *track = app.add_subcommand("track", "tracking runs")->require_subcommand(1);
  auto *track_run_cmd = track->add_subcommand("run", "simulate, track and score; writes records.jsonl and reports");
  add_run_flags(track_run_cmd, flags);
  track_run_cmd->add_option("--seed", flags.seed, "run seed")->required();

  std::string records_path, out_path, corrected;
  int c = 16, stride = 25, n_est = 5;
  auto *dataset = app.add_subcommand("dataset", "corrector dataset")->require_subcommand(1);
  auto *export_cmd = dataset->add_subcommand("export", "write train.jsonl/test.jsonl, trajectories split 3:1");
  export_cmd->add_option("--records", records_path, "records.jsonl from track run")->required()->check(
      CLI::ExistingFile);
  export_cmd->add_option("--out", out_path, "output directory")->required();
  export_cmd->add_option("--history", c, "frames per sample")->capture_default_str();
  export_cmd->add_option("--stride", stride, "frames between history entries")->capture_default_str();
  export_cmd->add_option("--n-est", n_est, "paths per frame")->capture_default_str();

  auto *eval = app.add_subcommand("eval", "metrics")->require_subcommand(1);
  auto *report_cmd = eval->add_subcommand("report", "write report.json (and cdf.csv, traj_overlay.csv)");
  auto *cdf_cmd = eval->add_subcommand("cdf", "write cdf.csv");
  for (auto *cmd : {report_cmd, cdf_cmd}) {
    cmd->add_option("--records", records_path, "records.jsonl from track run")->required()->check(
        CLI::ExistingFile);
    cmd->add_option("--corrected", corrected, "predictions JSONL with t, dx, x_star")->check(CLI::ExistingFile);
    cmd->add_option("--out", out_path, "output directory")->capture_default_str();
  }

  CLI11_PARSE(app, argc, argv);

  try {
    if (scene_gen_cmd->parsed()) return scene_gen(flags);
    if (track_run_cmd->parsed()) return track_run(flags);
    if (export_cmd->parsed()) return dataset_export(records_path, out_path, c, stride, n_est);
    if (report_cmd->parsed() || cdf_cmd->parsed()) {
      const auto records = load_records(records_path);
      const MetricsReport report = build_report(records, load_predictions(corrected));
      const fs::path dir = out_path.empty() ? fs::path(records_path).parent_path() : fs::path(out_path);
      if (report_cmd->parsed())
        write_eval_outputs(dir, records, report);
      else
        write_file(dir / "cdf.csv", cdf_csv(report));
      std::cout << "wrote " << dir.string() << "\n";
      return 0;
    }
  } catch (const std::exception &e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
