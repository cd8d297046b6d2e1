#include "mmtrack/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "json.hpp"
#include "format.hpp"

namespace mmtrack
{
namespace
{

using nlohmann::ordered_json;

ordered_json percentile_json(const std::vector<double> &values)
{
  if (values.empty()) return nullptr;
  const Percentiles p = percentiles(values);
  return ordered_json{{"p5", p.p5}, {"p50", p.p50}, {"p80", p.p80}, {"p95", p.p95}};
}

ordered_json reference_json(double p5, double p50, double p80, double p95)
{
  return ordered_json{{"p5", p5}, {"p50", p50}, {"p80", p80}, {"p95", p95}};
}

} // namespace

double percentile(std::vector<double> values, double p)
{
  if (values.empty()) throw Error(ErrorCode::EmptyList, "percentile of an empty list");
  if (!(p >= 0.0 && p <= 100.0)) throw Error(ErrorCode::InvalidArgument, "percentile must be in [0, 100]");
  std::sort(values.begin(), values.end());
  const double n = static_cast<double>(values.size());
  std::size_t rank = static_cast<std::size_t>(std::ceil(p / 100.0 * n - 1e-9));
  rank = std::clamp<std::size_t>(rank, 1, values.size());
  return values[rank - 1];
}

Percentiles percentiles(const std::vector<double> &values)
{
  return {percentile(values, 5), percentile(values, 50), percentile(values, 80), percentile(values, 95)};
}

double match_distance(const PathParams &est, const PathParams &truth, const MatchScales &scales)
{
  const double dod = angle_between(unit_direction(est.dod_az, est.dod_el), unit_direction(truth.dod_az, truth.dod_el));
  const double doa = angle_between(unit_direction(est.doa_az, est.doa_el), unit_direction(truth.doa_az, truth.doa_el));
  return dod / scales.dod + doa / scales.doa + std::abs(est.tdoa - truth.tdoa) / scales.tdoa;
}

std::vector<PathError> match_paths(const std::vector<PathParams> &est, const std::vector<PathParams> &truth,
                                   const MatchScales &scales)
{
  struct Pair
  {
    double d;
    int e;
    int t;
  };
  std::vector<Pair> pairs;
  for (std::size_t e = 0; e < est.size(); ++e) {
    if (est[e].order != PathOrder::LOS && est[e].order != PathOrder::FirstOrder) continue;
    for (std::size_t t = 0; t < truth.size(); ++t)
      pairs.push_back({match_distance(est[e], truth[t], scales), static_cast<int>(e), static_cast<int>(t)});
  }
  std::sort(pairs.begin(), pairs.end(), [](const Pair &a, const Pair &b) {
    if (a.d != b.d) return a.d < b.d;
    if (a.e != b.e) return a.e < b.e;
    return a.t < b.t;
  });
  std::vector<bool> used_e(est.size(), false), used_t(truth.size(), false);
  std::vector<PathError> out;
  for (const Pair &p : pairs) {
    if (used_e[p.e] || used_t[p.t]) continue;
    used_e[p.e] = used_t[p.t] = true;
    const PathParams &a = est[p.e];
    const PathParams &b = truth[p.t];
    PathError err;
    err.est = p.e;
    err.truth = p.t;
    err.order = a.order;
    err.dod = angle_between(unit_direction(a.dod_az, a.dod_el), unit_direction(b.dod_az, b.dod_el));
    err.doa = angle_between(unit_direction(a.doa_az, a.doa_el), unit_direction(b.doa_az, b.doa_el));
    err.tdoa = std::abs(a.tdoa - b.tdoa);
    out.push_back(err);
  }
  std::sort(out.begin(), out.end(), [](const PathError &a, const PathError &b) { return a.est < b.est; });
  return out;
}

MetricsReport build_report(const std::vector<FrameRecord> &records, const std::vector<Prediction> &predictions,
                           const MatchScales &scales)
{
  MetricsReport r;
  std::map<std::pair<int, double>, const Prediction *> by_key;
  std::map<double, const Prediction *> by_t;
  for (const auto &p : predictions) {
    if (p.traj)
      by_key[{*p.traj, p.t}] = &p;
    else
      by_t[p.t] = &p;
  }
  double n_full = 0.0, n_red = 0.0;
  for (const auto &rec : records) {
    const Vec2 truth = rec.truth.head<2>();
    r.initial.push_back((rec.pos.xy - truth).norm());
    r.kf.push_back((rec.kf_xy - truth).norm());
    const Prediction *pred = nullptr;
    if (auto it = by_key.find({rec.traj, rec.t}); it != by_key.end())
      pred = it->second;
    else if (auto jt = by_t.find(rec.t); jt != by_t.end())
      pred = jt->second;
    if (pred) r.corrected.push_back((pred->x_star - truth).norm());
    for (const auto &m : match_paths(rec.est.paths, rec.truth_paths, scales)) r.matches.push_back(m);
    ++r.frames;
    ++r.modes[std::string(to_string(rec.pos.mode))];
    if (rec.diag.full) {
      ++r.full_frames;
      r.atoms_scored_full += static_cast<double>(rec.diag.atoms_scored);
      r.product_full += static_cast<double>(rec.diag.product_size);
      n_full += 1.0;
    } else {
      r.atoms_scored_reduced += static_cast<double>(rec.diag.atoms_scored);
      r.product_reduced += static_cast<double>(rec.diag.product_size);
      n_red += 1.0;
    }
  }
  if (n_full > 0) {
    r.atoms_scored_full /= n_full;
    r.product_full /= n_full;
  }
  if (n_red > 0) {
    r.atoms_scored_reduced /= n_red;
    r.product_reduced /= n_red;
  }
  return r;
}

double fraction_within(const std::vector<PathError> &matches, const MatchScales &bounds)
{
  if (matches.empty()) return 0.0;
  std::size_t ok = 0;
  for (const auto &m : matches)
    if (m.dod <= bounds.dod && m.doa <= bounds.doa && m.tdoa <= bounds.tdoa) ++ok;
  return static_cast<double>(ok) / static_cast<double>(matches.size());
}

std::string report_json(const MetricsReport &report, const MatchScales &scales)
{
  ordered_json j;
  j["schema"] = "mmtrack.report/1";
  j["percentile_method"] = "nearest-rank";
  j["match_metric"] = {{"formula", "dDoD/s_dod + dDoA/s_doa + |dTDoA|/s_tdoa"},
                       {"s_dod_deg", rad2deg(scales.dod)},
                       {"s_doa_deg", rad2deg(scales.doa)},
                       {"s_tdoa_ns", scales.tdoa * 1e9}};
  j["frames"] = report.frames;
  j["full_frames"] = report.full_frames;
  j["modes"] = report.modes;
  j["localization_m"] = {{"initial", percentile_json(report.initial)},
                         {"kf", percentile_json(report.kf)},
                         {"corrected", percentile_json(report.corrected)}};
  j["corrected_frames"] = report.corrected.size();
  j["reference_m"] = {{"initial", reference_json(0.058, 0.418, 0.833, 1.611)},
                      {"kf", reference_json(0.027, 0.171, 0.575, 1.574)},
                      {"corrected", reference_json(0.014, 0.065, 0.120, 0.197)},
                      {"note", "published ray-traced results, for side-by-side reading only"}};

  std::vector<double> dod, doa, tdoa;
  for (const auto &m : report.matches) {
    dod.push_back(rad2deg(m.dod));
    doa.push_back(rad2deg(m.doa));
    tdoa.push_back(m.tdoa * 1e9);
  }
  j["matched_paths"] = {{"count", report.matches.size()},
                        {"dod_deg", percentile_json(dod)},
                        {"doa_deg", percentile_json(doa)},
                        {"tdoa_ns", percentile_json(tdoa)},
                        {"within_3deg_8deg_7ns", fraction_within(report.matches, {})}};
  j["complexity"] = {{"atoms_scored_full_mean", report.atoms_scored_full},
                     {"atoms_scored_reduced_mean", report.atoms_scored_reduced},
                     {"product_full_mean", report.product_full},
                     {"product_reduced_mean", report.product_reduced}};
  j["wall_seconds"] = report.wall_seconds;
  return j.dump(2) + "\n";
}

std::string cdf_csv(const MetricsReport &report)
{
  std::string out = "method,error_m,cdf\n";
  const std::pair<const char *, const std::vector<double> *> methods[] = {
      {"initial", &report.initial}, {"kf", &report.kf}, {"corrected", &report.corrected}};
  for (const auto &[name, values] : methods) {
    std::vector<double> v = *values;
    std::sort(v.begin(), v.end());
    for (std::size_t i = 0; i < v.size(); ++i) {
      out += name;
      out += ',';
      out += format_double(v[i]);
      out += ',';
      out += format_double(static_cast<double>(i + 1) / static_cast<double>(v.size()));
      out += '\n';
    }
  }
  return out;
}

std::string overlay_csv(const std::vector<FrameRecord> &records)
{
  std::string out = "traj,index,t,true_x,true_y,est_x,est_y,kf_x,kf_y,mode\n";
  for (const auto &r : records) {
    const double vals[] = {r.t, r.truth.x(), r.truth.y(), r.pos.xy.x(), r.pos.xy.y(), r.kf_xy.x(), r.kf_xy.y()};
    out += std::to_string(r.traj) + ',' + std::to_string(r.index);
    for (double v : vals) out += ',' + format_double(v);
    out += ',';
    out += to_string(r.pos.mode);
    out += '\n';
  }
  return out;
}

} // namespace mmtrack
