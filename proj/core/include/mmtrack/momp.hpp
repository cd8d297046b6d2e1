#pragma once

#include <cstdint>

#include "mmtrack/dictionaries.hpp"
#include "mmtrack/signal_model.hpp"

namespace mmtrack
{

/// How the first candidate of each greedy iteration is picked before the
/// alternating sweeps.
enum class InitMode
{
  Auto,       // Seeded if seeds given, else Exhaustive if small enough, else Coarse
  Exhaustive, // score every multi-index (strided when above exhaustive_limit)
  Coarse,     // delay marginal, then tx 2-D with rx marginalised, then rx 2-D
  Seeded,     // nearest grid atoms to the seed paths
};

std::string_view to_string(InitMode mode);

struct MompOptions
{
  int n_paths = 5;
  int refine_sweeps = 3;
  InitMode init = InitMode::Auto;
  std::vector<PathParams> seeds;
  double exhaustive_limit = 2e5;          // product-space size scored exhaustively
  double coarse_angle_step = deg2rad(1.0); // Coarse init stride (rad)
  double coarse_delay_step = 0.1;          // Coarse init stride (fraction of ts)
  double noise_floor_factor = 1.05;
};

struct MompDiagnostics
{
  int iterations = 0;
  std::vector<int> sweeps;              // sweeps used per iteration
  std::vector<double> residual_curve;   // ||r|| after each refit, first entry ||y||
  std::uint64_t atoms_scored = 0;       // candidate atoms whose score was evaluated
  long double product_size = 0.0L;      // exhaustive cost of one iteration
  int rank_drops = 0;
  InitMode init_used = InitMode::Auto;
};

struct SparseSolution
{
  std::vector<AtomIndex> atoms;
  std::vector<cd> coeffs; // whitened-domain coefficients, gain * sqrt(P_t)
  double residual_norm = 0.0;
  std::vector<PathParams> params;
  std::vector<bool> below_noise_floor;
  MompDiagnostics diag;
};

/// Column of the sensing operator times the Kronecker dictionary for atom j,
/// stacked like MeasurementBatch::stacked(). Built from the per-dimension
/// factors; the operator itself is never formed.
CVec apply_atom(const MeasurementBatch &batch, const AtomIndex &j, const DictionarySet &dict);

SparseSolution momp_solve(const MeasurementBatch &batch, const DictionarySet &dict, const MompOptions &opts);

/// Rows sorted by descending |gain|, TDoA referenced to the earliest row.
ChannelEstimate to_estimate(const SparseSolution &sol, double timestamp);

ChannelEstimate estimate_channel(const MeasurementBatch &batch, const DictionarySet &dict, int n_paths);

} // namespace mmtrack
