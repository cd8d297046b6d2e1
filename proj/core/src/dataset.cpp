#include "mmtrack/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>

#include "format.hpp"
#include "json.hpp"

namespace mmtrack
{
namespace
{

void put(std::string &out, double v)
{
  if (std::isfinite(v))
    out += format_double(v);
  else
    out += "null";
}

void put_vec2(std::string &out, const Vec2 &v)
{
  out += '[';
  put(out, v.x());
  out += ',';
  put(out, v.y());
  out += ']';
}

Vec2 read_vec2(const nlohmann::json &j)
{
  if (!j.is_array() || j.size() != 2) throw std::invalid_argument("expected a 2-element array");
  return {j.at(0).get<double>(), j.at(1).get<double>()};
}

} // namespace

std::array<double, 7> path_features(const PathParams &p)
{
  return {std::abs(p.gain), std::arg(p.gain), p.tdoa, p.doa_az, p.doa_el, p.dod_az, p.dod_el};
}

std::vector<DatasetSample> build_samples(const std::vector<FrameRecord> &records, int c, int stride, int n_est)
{
  if (c < 1 || stride < 1 || n_est < 1) throw Error(ErrorCode::InvalidArgument, "c, stride and n_est must be >= 1");
  const std::size_t span = static_cast<std::size_t>(c - 1) * static_cast<std::size_t>(stride);
  std::vector<DatasetSample> out;
  std::size_t begin = 0;
  while (begin < records.size()) {
    std::size_t end = begin;
    while (end < records.size() && records[end].traj == records[begin].traj) ++end;
    const std::size_t n = end - begin;
    if (n < span + 1)
      throw Error(ErrorCode::InsufficientHistory, "trajectory " + std::to_string(records[begin].traj) + " has " +
                                                      std::to_string(n) + " frames, need " +
                                                      std::to_string(span + 1));
    for (std::size_t i = begin + span; i < end; ++i) {
      DatasetSample s;
      s.traj = records[i].traj;
      s.t = records[i].t;
      for (int k = c - 1; k >= 0; --k) {
        const FrameRecord &r = records[i - static_cast<std::size_t>(k) * stride];
        std::vector<std::array<double, 7>> rows;
        for (int p = 0; p < n_est; ++p)
          rows.push_back(p < static_cast<int>(r.est.paths.size()) ? path_features(r.est.paths[p])
                                                                   : std::array<double, 7>{});
        s.z.push_back(std::move(rows));
        s.x.push_back(r.pos.xy);
      }
      s.truth = records[i].truth.head<2>();
      s.target = s.truth - s.x.back();
      out.push_back(std::move(s));
    }
    begin = end;
  }
  return out;
}

std::string sample_json(const DatasetSample &s)
{
  std::string out = "{\"t\":";
  put(out, s.t);
  out += ",\"traj\":" + std::to_string(s.traj) + ",\"Z\":[";
  for (std::size_t k = 0; k < s.z.size(); ++k) {
    if (k) out += ',';
    out += '[';
    for (std::size_t p = 0; p < s.z[k].size(); ++p) {
      if (p) out += ',';
      out += '[';
      for (std::size_t f = 0; f < 7; ++f) {
        if (f) out += ',';
        put(out, s.z[k][p][f]);
      }
      out += ']';
    }
    out += ']';
  }
  out += "],\"X\":[";
  for (std::size_t k = 0; k < s.x.size(); ++k) {
    if (k) out += ',';
    put_vec2(out, s.x[k]);
  }
  out += "],\"target\":";
  put_vec2(out, s.target);
  out += ",\"truth\":";
  put_vec2(out, s.truth);
  out += '}';
  return out;
}

void write_samples(std::ostream &out, const std::vector<DatasetSample> &samples)
{
  for (const auto &s : samples) out << sample_json(s) << '\n';
  if (!out) throw Error(ErrorCode::Io, "failed writing dataset");
}

Split split_trajectories(std::vector<int> ids, int train_parts, int test_parts)
{
  if (train_parts < 0 || test_parts < 0 || train_parts + test_parts == 0)
    throw Error(ErrorCode::InvalidArgument, "split parts must be nonnegative and not both zero");
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  const double share = static_cast<double>(train_parts) / (train_parts + test_parts);
  auto n_train = static_cast<std::size_t>(std::llround(share * static_cast<double>(ids.size())));
  // keep at least one trajectory on each side when both sides are requested
  if (train_parts > 0 && test_parts > 0 && ids.size() >= 2) n_train = std::clamp<std::size_t>(n_train, 1, ids.size() - 1);
  Split s;
  s.train.assign(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n_train));
  s.test.assign(ids.begin() + static_cast<std::ptrdiff_t>(n_train), ids.end());
  return s;
}

std::vector<Prediction> read_predictions(std::istream &in)
{
  std::vector<Prediction> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      Prediction p;
      p.t = j.at("t").get<double>();
      p.dx = read_vec2(j.at("dx"));
      p.x_star = read_vec2(j.at("x_star"));
      if (j.contains("traj")) p.traj = j.at("traj").get<int>();
      out.push_back(p);
    } catch (const std::exception &e) {
      throw Error(ErrorCode::Io, "predictions line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

} // namespace mmtrack
