#pragma once

#include <cstdint>
#include <random>
#include <span>

#include "mmtrack/common.hpp"
#include "mmtrack/geometry.hpp"

namespace mmtrack
{

/// Waveform and link-budget parameters. `t_off` is the start of the receive
/// window on the receiver clock: tap d samples the channel at d*ts + t_off.
struct WaveformConfig
{
  double fc = 73e9;
  double bandwidth = 1e9;
  double ts = 1e-9;
  int nd = 64;
  double rolloff = 0.4;
  int q = 64;
  double pt_dbm = 40.0;
  double noise_var = 1.9952623149688828e-11; // -77 dBm: kTB at 1 GHz plus 7 dB NF
  double t_off = 0.0;
  int guard_taps = 4;

  double wavelength() const { return kSpeedOfLight / fc; }
  double pt_watts() const;
};

void validate(const WaveformConfig &cfg);

/// Noise variance (W) for a bandwidth and receiver noise figure.
double thermal_noise_var(double bandwidth, double noise_figure_db);

/// exp(j*2*pi*spacing*i*dir_cos) for i = 0..n-1.
CVec axis_response(int n, double spacing, double dir_cos);

CVec steering_vector(const ArrayGeometry &geom, const Vec3 &world_dir);
CVec steering_vector(const ArrayGeometry &geom, double az, double el);

double raised_cosine(double t, const WaveformConfig &cfg);

/// [p(t)]_n = f_p(n*ts - t), n = 0..nd-1, with t measured from the window start.
RVec delay_response(double t, const WaveformConfig &cfg);

/// nd taps, each N_r x N_t.
using ChannelTensor = std::vector<CMat>;

/// Paths whose window-relative delay t - t_off falls outside
/// [0, (nd-1-guard_taps)*ts] raise PathOutOfWindow.
ChannelTensor channel_taps(std::span<const PathParams> paths, const WaveformConfig &cfg,
                           const ArrayGeometry &tx, const ArrayGeometry &rx);

bool in_window(double toa, const WaveformConfig &cfg);

/// Training beams for M measurements. Pilot m is an N_s x Q sequence; the
/// shifted block matrix S_m of the received-signal model is built from it by
/// shifted_pilot_matrix(). Whitener L_m satisfies W_m^* W_m = L_m L_m^*.
struct BeamformerSet
{
  std::vector<CMat> precoders;
  std::vector<CMat> combiners;
  std::vector<CMat> pilots;
  std::vector<CMat> whiteners;
  std::vector<int> tx_beam; // pair bookkeeping; -1 when unstructured
  std::vector<int> rx_beam;

  std::size_t size() const { return precoders.size(); }
};

/// Fills `whiteners` by Cholesky factorisation of each W_m^* W_m.
void compute_whiteners(BeamformerSet &bf);

/// Every rx beam paired with every tx beam, m = r * M_t + t, one shared pilot
/// row (N_s = 1). Whiteners are computed.
BeamformerSet make_beam_pairs(const std::vector<CVec> &tx_beams, const std::vector<CVec> &rx_beams,
                              const RVec &pilot);

/// Sylvester Hadamard matrix; q must be a power of two.
RMat hadamard(int q);

/// Row of the q x q Hadamard matrix whose shifted-pilot Gram (nd delays) is
/// best conditioned.
int best_pilot_row(int q, int nd);

/// [S]_{:,q} = [s[q]; s[q-1]; ...; s[q-nd+1]] with zeros for negative time.
CMat shifted_pilot_matrix(const CMat &pilot, int nd);

/// Unit-norm analog beams with uniformly random phases.
std::vector<CVec> random_phase_beams(int n_elements, int count, std::mt19937_64 &rng);

/// Orthogonal 2-D DFT codebook of the array (nx*ny unit-norm beams).
std::vector<CVec> dft_codebook(const ArrayGeometry &geom);

/// `count` codebook beams sampled without replacement.
std::vector<CVec> sample_dft_beams(const ArrayGeometry &geom, int count, std::mt19937_64 &rng);

/// The `count` codebook beams whose pointing direction is closest (in
/// direction-cosine space) to `center`.
std::vector<CVec> dft_beams_around(const ArrayGeometry &geom, const ConeAngles &center, int count);

/// Whitened observations Y_m (N_s x Q) plus everything needed to rebuild the
/// sensing operator: precoders F_m, whitened combiners W_m L_m^{-*}, pilots.
struct MeasurementBatch
{
  std::vector<CMat> blocks;
  std::vector<CMat> precoders;
  std::vector<CMat> whitened_combiners;
  std::vector<CMat> pilots;
  std::vector<int> pilot_id; // equal ids <=> identical pilot sequences
  std::vector<int> tx_beam;
  std::vector<int> rx_beam;
  WaveformConfig cfg;

  std::size_t size() const { return blocks.size(); }
  int streams() const { return blocks.empty() ? 0 : static_cast<int>(blocks.front().rows()); }
  std::size_t sample_count() const;
  /// [vec(Y_1); ...; vec(Y_M)], column-major per block.
  CVec stacked() const;
  /// True when the batch is a full tx x rx beam grid.
  bool pair_structured() const;
};

/// Y_m = L_m^{-1} W_m^* ( sqrt(P_t) [H_0..H_{nd-1}] (I kron F_m) S_m + n ),
/// n ~ CN(0, noise_var I_{N_r}) per sample, deterministic in `seed`.
MeasurementBatch measure(const ChannelTensor &h, const BeamformerSet &bf, const WaveformConfig &cfg,
                         std::uint64_t seed);

/// Same observation model evaluated path by path without forming the
/// channel tensor. Noise is drawn directly in the whitened domain, so the
/// noise realisation differs from measure() for the same seed; noiseless
/// outputs agree.
MeasurementBatch measure_paths(std::span<const PathParams> paths, const BeamformerSet &bf,
                               const WaveformConfig &cfg, const ArrayGeometry &tx, const ArrayGeometry &rx,
                               std::uint64_t seed);

/// Circularly-symmetric complex Gaussian sample with total variance `var`.
cd complex_normal(std::mt19937_64 &rng, double var);

} // namespace mmtrack
