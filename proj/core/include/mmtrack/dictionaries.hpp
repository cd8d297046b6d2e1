#pragma once

#include <array>
#include <cstddef>

#include "mmtrack/common.hpp"
#include "mmtrack/geometry.hpp"
#include "mmtrack/signal_model.hpp"

namespace mmtrack
{

/// Per-axis cone angles for the four angular dimensions, absolute ToA for
/// the delay dimension.
enum class GridKind
{
  TxX,
  TxY,
  RxX,
  RxY,
  Delay,
};

std::string_view to_string(GridKind kind);

struct Grid1D
{
  std::vector<double> values;
  GridKind kind = GridKind::TxX;

  std::size_t size() const { return values.size(); }
};

/// Atom multi-index (j1..j5) into the five dictionaries.
using AtomIndex = std::array<int, 5>;

/// Number of grid points per dimension for the full-range dictionaries.
struct FullResolution
{
  int tx_x = 180;
  int tx_y = 180;
  int rx_x = 180;
  int rx_y = 180;
  int delay = 640;

  /// Counts matching angular step `d_angle` over [0, pi) and delay step
  /// `d_tau` over [0, nd*ts).
  static FullResolution from_steps(double d_angle, double d_tau, const WaveformConfig &cfg);
};

struct ReducedParams
{
  double omega = deg2rad(15.0);
  double d_omega = deg2rad(0.175);
  double eps = 0.2e-9;
  double d_tau = 0.01e-9;
  double eps_low = 0.0; // extra delay margin below the earliest arrival
};

/// Psi_1..Psi_5. Psi_1/Psi_2 hold conjugated tx axis responses, Psi_3/Psi_4
/// rx axis responses, Psi_5 the real delay responses p(t - t_off) stored as
/// complex. Columns are not normalised.
struct DictionarySet
{
  std::array<CMat, 5> psi;
  std::array<Grid1D, 5> grids;
  std::array<int, 5> dims{};
  WaveformConfig cfg;
  ArrayGeometry tx;
  ArrayGeometry rx;

  int atoms(int k) const { return static_cast<int>(grids[k].size()); }
  /// Size of the full product space; long double because it overflows 64 bits
  /// at fine resolutions.
  long double product_size() const;
  void check_index(const AtomIndex &j) const;
  /// Angles and absolute ToA of an atom; gain zero, order Unknown.
  PathParams decode(const AtomIndex &j) const;
  /// Nearest grid point per dimension to the path's parameters.
  AtomIndex nearest(const PathParams &path) const;
};

/// Column of the dictionary of kind `kind` at parameter `value`.
CVec dictionary_column(GridKind kind, double value, const WaveformConfig &cfg, const ArrayGeometry &tx,
                       const ArrayGeometry &rx);

/// Builds psi/dims from grids already placed in `set.grids`.
void materialize(DictionarySet &set);

/// Full-range dictionaries: angular grids k*pi/N over [0, pi), delay grid
/// t_off + k*nd*ts/N. Throws ResolutionTooFine when any dimension exceeds
/// `max_atoms_per_dim`.
DictionarySet build_full(const WaveformConfig &cfg, const ArrayGeometry &tx, const ArrayGeometry &rx,
                         const FullResolution &res, int max_atoms_per_dim = 1 << 16);

/// Union of sectors {c - omega + k*d_omega : k = 0..floor(2 omega/d_omega)}
/// around each path's cone angle, clipped to [0, pi], points closer than
/// d_omega/2 to an already kept point dropped.
std::array<Grid1D, 4> build_reduced_angular(const ChannelEstimate &prev, double omega, double d_omega,
                                            const ArrayGeometry &tx, const ArrayGeometry &rx);

/// {t_min, t_min + d_tau, ..., t_min + tau_max + eps} with t_min the earliest
/// ToA and tau_max the largest TDoA of `prev`. A positive `eps_low` starts
/// the grid at t_min - eps_low instead, same step.
Grid1D build_reduced_delay(const ChannelEstimate &prev, double eps, double d_tau, double eps_low = 0.0);

DictionarySet build_reduced(const ChannelEstimate &prev, const ReducedParams &params, const WaveformConfig &cfg,
                            const ArrayGeometry &tx, const ArrayGeometry &rx);

/// Sector points generated for a single centre, before clipping.
std::vector<double> sector_points(double centre, double omega, double d_omega);

} // namespace mmtrack
