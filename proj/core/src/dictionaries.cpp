#include "mmtrack/dictionaries.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace mmtrack
{
namespace
{

// floor() that tolerates ratios like 2.9999999999999996 meant to be 3.
int robust_floor(double x) { return static_cast<int>(std::floor(x + 1e-9)); }

std::size_t nearest_in(const std::vector<double> &values, double x)
{
  auto it = std::lower_bound(values.begin(), values.end(), x);
  if (it == values.begin()) return 0;
  if (it == values.end()) return values.size() - 1;
  const std::size_t hi = static_cast<std::size_t>(it - values.begin());
  // ties go to the lower index
  return (x - values[hi - 1] <= values[hi] - x) ? hi - 1 : hi;
}

std::vector<double> merge_points(std::vector<double> pts, double min_gap)
{
  std::sort(pts.begin(), pts.end());
  std::vector<double> out;
  for (double p : pts)
    if (out.empty() || p - out.back() >= min_gap) out.push_back(p);
  return out;
}

} // namespace

std::string_view to_string(GridKind kind)
{
  switch (kind) {
  case GridKind::TxX: return "tx_x";
  case GridKind::TxY: return "tx_y";
  case GridKind::RxX: return "rx_x";
  case GridKind::RxY: return "rx_y";
  case GridKind::Delay: return "delay";
  }
  return "unknown";
}

FullResolution FullResolution::from_steps(double d_angle, double d_tau, const WaveformConfig &cfg)
{
  if (!(d_angle > 0.0) || !(d_tau > 0.0)) throw Error(ErrorCode::InvalidArgument, "resolutions must be positive");
  const int na = static_cast<int>(std::ceil(kPi / d_angle - 1e-9));
  const int nd = static_cast<int>(std::ceil(cfg.nd * cfg.ts / d_tau - 1e-9));
  return {na, na, na, na, nd};
}

long double DictionarySet::product_size() const
{
  long double n = 1.0L;
  for (const auto &g : grids) n *= static_cast<long double>(g.size());
  return n;
}

void DictionarySet::check_index(const AtomIndex &j) const
{
  for (int k = 0; k < 5; ++k)
    if (j[k] < 0 || j[k] >= atoms(k))
      throw Error(ErrorCode::IndexOutOfRange, "atom index " + std::to_string(j[k]) + " out of range for dimension " +
                                                  std::string(to_string(grids[k].kind)));
}

PathParams DictionarySet::decode(const AtomIndex &j) const
{
  check_index(j);
  PathParams p;
  const AzEl dod = az_el(from_cone(tx, {grids[0].values[j[0]], grids[1].values[j[1]]}));
  const AzEl doa = az_el(from_cone(rx, {grids[2].values[j[2]], grids[3].values[j[3]]}));
  p.dod_az = dod.az;
  p.dod_el = dod.el;
  p.doa_az = doa.az;
  p.doa_el = doa.el;
  p.toa = grids[4].values[j[4]];
  return p;
}

AtomIndex DictionarySet::nearest(const PathParams &path) const
{
  const ConeAngles ct = to_cone(tx, unit_direction(path.dod_az, path.dod_el));
  const ConeAngles cr = to_cone(rx, unit_direction(path.doa_az, path.doa_el));
  return {static_cast<int>(nearest_in(grids[0].values, ct.x)), static_cast<int>(nearest_in(grids[1].values, ct.y)),
          static_cast<int>(nearest_in(grids[2].values, cr.x)), static_cast<int>(nearest_in(grids[3].values, cr.y)),
          static_cast<int>(nearest_in(grids[4].values, path.toa))};
}

CVec dictionary_column(GridKind kind, double value, const WaveformConfig &cfg, const ArrayGeometry &tx,
                       const ArrayGeometry &rx)
{
  switch (kind) {
  case GridKind::TxX: return axis_response(tx.nx, tx.spacing, std::cos(value)).conjugate();
  case GridKind::TxY: return axis_response(tx.ny, tx.spacing, std::cos(value)).conjugate();
  case GridKind::RxX: return axis_response(rx.nx, rx.spacing, std::cos(value));
  case GridKind::RxY: return axis_response(rx.ny, rx.spacing, std::cos(value));
  case GridKind::Delay: return delay_response(value - cfg.t_off, cfg).cast<cd>();
  }
  throw Error(ErrorCode::InvalidArgument, "unknown grid kind");
}

void materialize(DictionarySet &set)
{
  set.dims = {set.tx.nx, set.tx.ny, set.rx.nx, set.rx.ny, set.cfg.nd};
  for (int k = 0; k < 5; ++k) {
    const Grid1D &g = set.grids[k];
    if (g.values.empty()) throw Error(ErrorCode::InvalidArgument, "empty grid for " + std::string(to_string(g.kind)));
    CMat psi(set.dims[k], static_cast<Eigen::Index>(g.size()));
    for (std::size_t c = 0; c < g.size(); ++c)
      psi.col(static_cast<Eigen::Index>(c)) = dictionary_column(g.kind, g.values[c], set.cfg, set.tx, set.rx);
    set.psi[k] = std::move(psi);
  }
}

DictionarySet build_full(const WaveformConfig &cfg, const ArrayGeometry &tx, const ArrayGeometry &rx,
                         const FullResolution &res, int max_atoms_per_dim)
{
  const std::array<int, 5> counts{res.tx_x, res.tx_y, res.rx_x, res.rx_y, res.delay};
  for (int n : counts) {
    if (n < 1) throw Error(ErrorCode::InvalidArgument, "resolution counts must be >= 1");
    if (n > max_atoms_per_dim)
      throw Error(ErrorCode::ResolutionTooFine,
                  std::to_string(n) + " atoms requested, cap is " + std::to_string(max_atoms_per_dim));
  }
  DictionarySet set;
  set.cfg = cfg;
  set.tx = tx;
  set.rx = rx;
  const std::array<GridKind, 5> kinds{GridKind::TxX, GridKind::TxY, GridKind::RxX, GridKind::RxY, GridKind::Delay};
  for (int k = 0; k < 4; ++k) {
    set.grids[k].kind = kinds[k];
    for (int i = 0; i < counts[k]; ++i) set.grids[k].values.push_back(i * kPi / counts[k]);
  }
  set.grids[4].kind = GridKind::Delay;
  const double span = cfg.nd * cfg.ts;
  for (int i = 0; i < counts[4]; ++i) set.grids[4].values.push_back(cfg.t_off + i * span / counts[4]);
  materialize(set);
  return set;
}

std::vector<double> sector_points(double centre, double omega, double d_omega)
{
  const int steps = robust_floor(2.0 * omega / d_omega);
  std::vector<double> pts;
  pts.reserve(steps + 1);
  for (int k = 0; k <= steps; ++k) pts.push_back(centre - omega + k * d_omega);
  return pts;
}

std::array<Grid1D, 4> build_reduced_angular(const ChannelEstimate &prev, double omega, double d_omega,
                                            const ArrayGeometry &tx, const ArrayGeometry &rx)
{
  if (prev.paths.empty()) throw Error(ErrorCode::EmptyEstimate, "previous estimate has no paths");
  if (!(omega > 0.0) || !(d_omega > 0.0)) throw Error(ErrorCode::InvalidArgument, "omega and d_omega must be positive");
  std::array<std::vector<double>, 4> raw;
  for (const auto &p : prev.paths) {
    const ConeAngles ct = to_cone(tx, unit_direction(p.dod_az, p.dod_el));
    const ConeAngles cr = to_cone(rx, unit_direction(p.doa_az, p.doa_el));
    const std::array<double, 4> centres{ct.x, ct.y, cr.x, cr.y};
    for (int k = 0; k < 4; ++k)
      for (double v : sector_points(centres[k], omega, d_omega))
        if (v >= 0.0 && v <= kPi) raw[k].push_back(v);
  }
  const std::array<GridKind, 4> kinds{GridKind::TxX, GridKind::TxY, GridKind::RxX, GridKind::RxY};
  std::array<Grid1D, 4> out;
  for (int k = 0; k < 4; ++k) {
    out[k].kind = kinds[k];
    out[k].values = merge_points(std::move(raw[k]), d_omega / 2.0);
    if (out[k].values.empty()) throw Error(ErrorCode::EmptyEstimate, "reduced grid is empty after clipping");
  }
  return out;
}

Grid1D build_reduced_delay(const ChannelEstimate &prev, double eps, double d_tau, double eps_low)
{
  if (prev.paths.empty()) throw Error(ErrorCode::EmptyEstimate, "previous estimate has no paths");
  if (eps < 0.0 || eps_low < 0.0 || !(d_tau > 0.0))
    throw Error(ErrorCode::InvalidArgument, "need eps >= 0, eps_low >= 0 and d_tau > 0");
  double t_min = std::numeric_limits<double>::infinity();
  double t_max = -std::numeric_limits<double>::infinity();
  for (const auto &p : prev.paths) {
    t_min = std::min(t_min, p.toa);
    t_max = std::max(t_max, p.toa);
  }
  const int below = robust_floor(eps_low / d_tau);
  const int steps = robust_floor((t_max - t_min + eps) / d_tau);
  Grid1D g;
  g.kind = GridKind::Delay;
  g.values.reserve(below + steps + 1);
  for (int k = -below; k <= steps; ++k) g.values.push_back(t_min + k * d_tau);
  return g;
}

DictionarySet build_reduced(const ChannelEstimate &prev, const ReducedParams &params, const WaveformConfig &cfg,
                            const ArrayGeometry &tx, const ArrayGeometry &rx)
{
  DictionarySet set;
  set.cfg = cfg;
  set.tx = tx;
  set.rx = rx;
  const auto ang = build_reduced_angular(prev, params.omega, params.d_omega, tx, rx);
  for (int k = 0; k < 4; ++k) set.grids[k] = ang[k];
  set.grids[4] = build_reduced_delay(prev, params.eps, params.d_tau, params.eps_low);
  materialize(set);
  return set;
}

} // namespace mmtrack
