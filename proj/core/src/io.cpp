#include "mmtrack/io.hpp"

#include <istream>
#include <ostream>

#include "json.hpp"

namespace mmtrack
{
namespace
{

using nlohmann::json;

json path_json(const PathParams &p)
{
  return json{{"gain", {p.gain.real(), p.gain.imag()}},
              {"toa", p.toa},
              {"tdoa", p.tdoa},
              {"doa_az", p.doa_az},
              {"doa_el", p.doa_el},
              {"dod_az", p.dod_az},
              {"dod_el", p.dod_el},
              {"order", to_string(p.order)}};
}

PathParams path_from(const json &j)
{
  PathParams p;
  p.gain = {j.at("gain").at(0).get<double>(), j.at("gain").at(1).get<double>()};
  p.toa = j.at("toa").get<double>();
  p.tdoa = j.at("tdoa").get<double>();
  p.doa_az = j.at("doa_az").get<double>();
  p.doa_el = j.at("doa_el").get<double>();
  p.dod_az = j.at("dod_az").get<double>();
  p.dod_el = j.at("dod_el").get<double>();
  p.order = path_order_from_string(j.at("order").get<std::string>());
  return p;
}

json paths_json(const std::vector<PathParams> &paths)
{
  json a = json::array();
  for (const auto &p : paths) a.push_back(path_json(p));
  return a;
}

std::vector<PathParams> paths_from(const json &j)
{
  std::vector<PathParams> out;
  for (const auto &p : j) out.push_back(path_from(p));
  return out;
}

template <class V> json vec_json(const V &v)
{
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

template <int N> Eigen::Matrix<double, N, 1> vec_from(const json &j)
{
  if (j.size() != N) throw std::invalid_argument("vector of wrong length");
  Eigen::Matrix<double, N, 1> v;
  for (int i = 0; i < N; ++i) v(i) = j.at(i).get<double>();
  return v;
}

LocMode mode_from(const std::string &s)
{
  for (LocMode m : {LocMode::LOS_Geometric, LocMode::NLOS_Geometric, LocMode::DeadReckoning})
    if (to_string(m) == s) return m;
  throw std::invalid_argument("unknown localization mode '" + s + "'");
}

} // namespace

void write_records(std::ostream &out, const std::vector<FrameRecord> &records)
{
  for (const auto &r : records) {
    json j;
    j["traj"] = r.traj;
    j["index"] = r.index;
    j["t"] = r.t;
    j["truth"] = vec_json(r.truth);
    j["truth_paths"] = paths_json(r.truth_paths);
    j["est"] = {{"timestamp", r.est.timestamp},
                {"t_min", r.est.t_min},
                {"paths", paths_json(r.est.paths)},
                {"below_noise_floor", r.est.below_noise_floor}};
    j["pos"] = {{"xyz", vec_json(r.pos.xyz)},         {"xy", vec_json(r.pos.xy)},
                {"mode", to_string(r.pos.mode)},      {"residual", r.pos.residual},
                {"converged", r.pos.converged},       {"iterations", r.pos.iterations}};
    j["kf"] = vec_json(r.kf_xy);
    j["los_blocked"] = r.los_blocked;
    j["panel"] = r.panel;
    j["diag"] = {{"full", r.diag.full},
                 {"iterations", r.diag.iterations},
                 {"sweeps", r.diag.sweeps},
                 {"atoms_scored", r.diag.atoms_scored},
                 {"product_size", static_cast<double>(r.diag.product_size)},
                 {"residual", r.diag.residual},
                 {"init", r.diag.init}};
    out << j.dump() << '\n';
  }
  if (!out) throw Error(ErrorCode::Io, "failed writing records");
}

std::vector<FrameRecord> read_records(std::istream &in)
{
  std::vector<FrameRecord> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const json j = json::parse(line);
      FrameRecord r;
      r.traj = j.at("traj").get<int>();
      r.index = j.at("index").get<int>();
      r.t = j.at("t").get<double>();
      r.truth = vec_from<3>(j.at("truth"));
      r.truth_paths = paths_from(j.at("truth_paths"));
      const json &e = j.at("est");
      r.est.timestamp = e.at("timestamp").get<double>();
      r.est.t_min = e.at("t_min").get<double>();
      r.est.paths = paths_from(e.at("paths"));
      r.est.below_noise_floor = e.at("below_noise_floor").get<std::vector<bool>>();
      const json &p = j.at("pos");
      r.pos.xyz = vec_from<3>(p.at("xyz"));
      r.pos.xy = vec_from<2>(p.at("xy"));
      r.pos.mode = mode_from(p.at("mode").get<std::string>());
      r.pos.residual = p.at("residual").get<double>();
      r.pos.converged = p.at("converged").get<bool>();
      r.pos.iterations = p.at("iterations").get<int>();
      r.kf_xy = vec_from<2>(j.at("kf"));
      r.los_blocked = j.at("los_blocked").get<bool>();
      r.panel = j.at("panel").get<int>();
      const json &d = j.at("diag");
      r.diag.full = d.at("full").get<bool>();
      r.diag.iterations = d.at("iterations").get<int>();
      r.diag.sweeps = d.at("sweeps").get<int>();
      r.diag.atoms_scored = d.at("atoms_scored").get<std::uint64_t>();
      r.diag.product_size = d.at("product_size").get<double>();
      r.diag.residual = d.at("residual").get<double>();
      r.diag.init = d.at("init").get<std::string>();
      out.push_back(std::move(r));
    } catch (const Error &) {
      throw;
    } catch (const std::exception &e) {
      throw Error(ErrorCode::Io, "records line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

void write_trajectory(std::ostream &out, const std::vector<TrajectoryFrame> &frames, int traj_id)
{
  for (const auto &f : frames) {
    json heading = json::array();
    for (int r = 0; r < 3; ++r) heading.push_back(vec_json(Vec3(f.heading.row(r).transpose())));
    json j{{"traj", traj_id},
           {"index", f.index},
           {"t", f.t},
           {"position", vec_json(f.position)},
           {"velocity", vec_json(f.velocity)},
           {"heading", heading},
           {"los_blocked", f.los_blocked},
           {"active_panel", f.active_panel},
           {"clock_offset", f.clock_offset},
           {"true_paths", paths_json(f.true_paths)}};
    out << j.dump() << '\n';
  }
  if (!out) throw Error(ErrorCode::Io, "failed writing trajectory");
}

} // namespace mmtrack
