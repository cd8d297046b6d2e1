#include "mmtrack/signal_model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace mmtrack
{
namespace
{

double sinc(double x)
{
  if (std::abs(x) < 1e-12) return 1.0;
  return std::sin(kPi * x) / (kPi * x);
}

std::vector<int> group_pilots(const std::vector<CMat> &pilots)
{
  std::vector<int> ids(pilots.size(), -1);
  std::vector<std::size_t> reps;
  for (std::size_t m = 0; m < pilots.size(); ++m) {
    for (std::size_t k = 0; k < reps.size(); ++k) {
      const CMat &r = pilots[reps[k]];
      if (r.rows() == pilots[m].rows() && r.cols() == pilots[m].cols() && r == pilots[m]) {
        ids[m] = static_cast<int>(k);
        break;
      }
    }
    if (ids[m] < 0) {
      ids[m] = static_cast<int>(reps.size());
      reps.push_back(m);
    }
  }
  return ids;
}

void check_beams(const BeamformerSet &bf, int n_t, int n_r, const WaveformConfig &cfg)
{
  const std::size_t m = bf.size();
  if (m == 0) throw Error(ErrorCode::DimensionMismatch, "beamformer set is empty");
  if (bf.combiners.size() != m || bf.pilots.size() != m || bf.whiteners.size() != m)
    throw Error(ErrorCode::DimensionMismatch, "beamformer set has inconsistent measurement counts");
  const Eigen::Index ns = bf.precoders.front().cols();
  for (std::size_t i = 0; i < m; ++i) {
    if (bf.precoders[i].rows() != n_t || bf.precoders[i].cols() != ns)
      throw Error(ErrorCode::DimensionMismatch, "precoder shape does not match the tx array");
    if (bf.combiners[i].rows() != n_r || bf.combiners[i].cols() != ns)
      throw Error(ErrorCode::DimensionMismatch, "combiner shape does not match the rx array");
    if (bf.pilots[i].rows() != ns || bf.pilots[i].cols() != cfg.q)
      throw Error(ErrorCode::DimensionMismatch, "pilot must be N_s x Q");
    if (bf.whiteners[i].rows() != ns || bf.whiteners[i].cols() != ns)
      throw Error(ErrorCode::DimensionMismatch, "whitener must be N_s x N_s");
  }
}

MeasurementBatch batch_skeleton(const BeamformerSet &bf, const WaveformConfig &cfg)
{
  MeasurementBatch batch;
  batch.cfg = cfg;
  batch.precoders = bf.precoders;
  batch.pilots = bf.pilots;
  batch.pilot_id = group_pilots(bf.pilots);
  batch.tx_beam = bf.tx_beam;
  batch.rx_beam = bf.rx_beam;
  batch.tx_beam.resize(bf.size(), -1);
  batch.rx_beam.resize(bf.size(), -1);
  batch.whitened_combiners.reserve(bf.size());
  for (std::size_t m = 0; m < bf.size(); ++m) {
    // W L^{-*} = (L^{-1} W^*)^*
    CMat wh = bf.whiteners[m].triangularView<Eigen::Lower>().solve(bf.combiners[m].adjoint());
    batch.whitened_combiners.push_back(wh.adjoint());
  }
  return batch;
}

} // namespace

double WaveformConfig::pt_watts() const { return std::pow(10.0, (pt_dbm - 30.0) / 10.0); }

void validate(const WaveformConfig &cfg)
{
  if (!(cfg.bandwidth > 0.0) || !(cfg.ts > 0.0)) throw Error(ErrorCode::InvalidArgument, "bandwidth and ts must be positive");
  if (std::abs(cfg.ts * cfg.bandwidth - 1.0) > 1e-9) throw Error(ErrorCode::InvalidArgument, "ts must equal 1/bandwidth");
  if (cfg.nd < 1) throw Error(ErrorCode::InvalidArgument, "nd must be >= 1");
  if (cfg.q < 1) throw Error(ErrorCode::InvalidArgument, "q must be >= 1");
  if (cfg.rolloff < 0.0 || cfg.rolloff > 1.0) throw Error(ErrorCode::InvalidArgument, "rolloff must lie in [0, 1]");
  if (cfg.noise_var < 0.0) throw Error(ErrorCode::InvalidArgument, "noise variance must be >= 0");
  if (cfg.guard_taps < 0) throw Error(ErrorCode::InvalidArgument, "guard_taps must be >= 0");
}

double thermal_noise_var(double bandwidth, double noise_figure_db)
{
  const double dbm = -174.0 + 10.0 * std::log10(bandwidth) + noise_figure_db;
  return std::pow(10.0, (dbm - 30.0) / 10.0);
}

CVec axis_response(int n, double spacing, double dir_cos)
{
  CVec a(n);
  const double k = 2.0 * kPi * spacing * dir_cos;
  for (int i = 0; i < n; ++i) a[i] = std::polar(1.0, k * i);
  return a;
}

CVec steering_vector(const ArrayGeometry &geom, const Vec3 &world_dir)
{
  const Vec3 u = geom.to_local(world_dir.normalized());
  const CVec ax = axis_response(geom.nx, geom.spacing, u.x());
  const CVec ay = axis_response(geom.ny, geom.spacing, u.y());
  CVec a(geom.size());
  for (int ix = 0; ix < geom.nx; ++ix)
    for (int iy = 0; iy < geom.ny; ++iy) a[ix * geom.ny + iy] = ax[ix] * ay[iy];
  return a;
}

CVec steering_vector(const ArrayGeometry &geom, double az, double el)
{
  return steering_vector(geom, unit_direction(az, el));
}

double raised_cosine(double t, const WaveformConfig &cfg)
{
  const double x = t / cfg.ts;
  const double beta = cfg.rolloff;
  if (beta == 0.0) return sinc(x);
  const double denom = 1.0 - (2.0 * beta * x) * (2.0 * beta * x);
  if (std::abs(denom) < 1e-10) return kPi / 4.0 * sinc(1.0 / (2.0 * beta));
  return sinc(x) * std::cos(kPi * beta * x) / denom;
}

RVec delay_response(double t, const WaveformConfig &cfg)
{
  RVec p(cfg.nd);
  for (int n = 0; n < cfg.nd; ++n) p[n] = raised_cosine(n * cfg.ts - t, cfg);
  return p;
}

bool in_window(double toa, const WaveformConfig &cfg)
{
  const double rel = toa - cfg.t_off;
  const double upper = (cfg.nd - 1 - cfg.guard_taps) * cfg.ts;
  return rel >= -1e-15 && rel <= upper + 1e-15;
}

ChannelTensor channel_taps(std::span<const PathParams> paths, const WaveformConfig &cfg, const ArrayGeometry &tx,
                           const ArrayGeometry &rx)
{
  ChannelTensor h(cfg.nd, CMat::Zero(rx.size(), tx.size()));
  for (const auto &path : paths) {
    if (!in_window(path.toa, cfg))
      throw Error(ErrorCode::PathOutOfWindow, "path delay " + std::to_string(path.toa - cfg.t_off) + " s outside the tap window");
    const CVec ar = steering_vector(rx, path.doa_az, path.doa_el);
    const CVec at = steering_vector(tx, path.dod_az, path.dod_el);
    const CMat outer = ar * at.adjoint();
    const RVec p = delay_response(path.toa - cfg.t_off, cfg);
    for (int d = 0; d < cfg.nd; ++d)
      if (p[d] != 0.0) h[d] += (path.gain * p[d]) * outer;
  }
  return h;
}

void compute_whiteners(BeamformerSet &bf)
{
  bf.whiteners.clear();
  bf.whiteners.reserve(bf.combiners.size());
  for (const auto &w : bf.combiners) {
    const CMat gram = w.adjoint() * w;
    Eigen::LLT<CMat> llt(gram);
    if (llt.info() != Eigen::Success) throw Error(ErrorCode::InvalidArgument, "combiner does not have full column rank");
    bf.whiteners.push_back(llt.matrixL());
  }
}

BeamformerSet make_beam_pairs(const std::vector<CVec> &tx_beams, const std::vector<CVec> &rx_beams, const RVec &pilot)
{
  if (tx_beams.empty() || rx_beams.empty()) throw Error(ErrorCode::InvalidArgument, "need at least one tx and one rx beam");
  BeamformerSet bf;
  const CMat s = pilot.transpose().cast<cd>();
  for (std::size_t r = 0; r < rx_beams.size(); ++r) {
    for (std::size_t t = 0; t < tx_beams.size(); ++t) {
      bf.precoders.emplace_back(tx_beams[t]);
      bf.combiners.emplace_back(rx_beams[r]);
      bf.pilots.push_back(s);
      bf.tx_beam.push_back(static_cast<int>(t));
      bf.rx_beam.push_back(static_cast<int>(r));
    }
  }
  compute_whiteners(bf);
  return bf;
}

RMat hadamard(int q)
{
  if (q < 1 || (q & (q - 1)) != 0) throw Error(ErrorCode::InvalidArgument, "Hadamard size must be a power of two");
  RMat h = RMat::Ones(1, 1);
  while (h.rows() < q) {
    const Eigen::Index n = h.rows();
    RMat next(2 * n, 2 * n);
    next << h, h, h, -h;
    h = std::move(next);
  }
  return h;
}

CMat shifted_pilot_matrix(const CMat &pilot, int nd)
{
  const Eigen::Index ns = pilot.rows();
  const Eigen::Index q = pilot.cols();
  CMat s = CMat::Zero(ns * nd, q);
  for (Eigen::Index col = 0; col < q; ++col)
    for (int d = 0; d < nd && d <= col; ++d) s.block(d * ns, col, ns, 1) = pilot.col(col - d);
  return s;
}

int best_pilot_row(int q, int nd)
{
  const RMat h = hadamard(q);
  int best = 0;
  double best_cond = -1.0;
  for (int row = 0; row < q; ++row) {
    const CMat s = shifted_pilot_matrix(h.row(row).cast<cd>(), nd);
    const RMat gram = (s * s.adjoint()).real();
    Eigen::SelfAdjointEigenSolver<RMat> eig(gram, Eigen::EigenvaluesOnly);
    const double ratio = eig.eigenvalues().minCoeff() / eig.eigenvalues().maxCoeff();
    if (ratio > best_cond) {
      best_cond = ratio;
      best = row;
    }
  }
  return best;
}

std::vector<CVec> random_phase_beams(int n_elements, int count, std::mt19937_64 &rng)
{
  std::uniform_real_distribution<double> phase(0.0, 2.0 * kPi);
  std::vector<CVec> beams;
  beams.reserve(count);
  const double amp = 1.0 / std::sqrt(static_cast<double>(n_elements));
  for (int b = 0; b < count; ++b) {
    CVec f(n_elements);
    for (int i = 0; i < n_elements; ++i) f[i] = std::polar(amp, phase(rng));
    beams.push_back(std::move(f));
  }
  return beams;
}

namespace
{

double dft_cosine(int k, int n, double spacing)
{
  // u = k / (n * spacing), wrapped into [-1/(2 spacing), 1/(2 spacing))
  const double period = 1.0 / spacing;
  double u = static_cast<double>(k) / (n * spacing);
  if (u >= period / 2.0) u -= period;
  return u;
}

CVec dft_beam(const ArrayGeometry &geom, double ux, double uy)
{
  const CVec ax = axis_response(geom.nx, geom.spacing, ux);
  const CVec ay = axis_response(geom.ny, geom.spacing, uy);
  CVec b(geom.size());
  for (int ix = 0; ix < geom.nx; ++ix)
    for (int iy = 0; iy < geom.ny; ++iy) b[ix * geom.ny + iy] = ax[ix] * ay[iy];
  return b / std::sqrt(static_cast<double>(geom.size()));
}

} // namespace

std::vector<CVec> dft_codebook(const ArrayGeometry &geom)
{
  std::vector<CVec> beams;
  beams.reserve(geom.size());
  for (int kx = 0; kx < geom.nx; ++kx)
    for (int ky = 0; ky < geom.ny; ++ky)
      beams.push_back(dft_beam(geom, dft_cosine(kx, geom.nx, geom.spacing), dft_cosine(ky, geom.ny, geom.spacing)));
  return beams;
}

std::vector<CVec> sample_dft_beams(const ArrayGeometry &geom, int count, std::mt19937_64 &rng)
{
  auto book = dft_codebook(geom);
  if (count > static_cast<int>(book.size())) throw Error(ErrorCode::InvalidArgument, "more beams requested than the codebook holds");
  std::vector<int> idx(book.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::shuffle(idx.begin(), idx.end(), rng);
  std::vector<CVec> out;
  for (int i = 0; i < count; ++i) out.push_back(book[idx[i]]);
  return out;
}

std::vector<CVec> dft_beams_around(const ArrayGeometry &geom, const ConeAngles &center, int count)
{
  if (count > geom.size()) throw Error(ErrorCode::InvalidArgument, "more beams requested than the codebook holds");
  const double cx = std::cos(center.x);
  const double cy = std::cos(center.y);
  struct Entry
  {
    double dist;
    int kx, ky;
  };
  std::vector<Entry> entries;
  for (int kx = 0; kx < geom.nx; ++kx)
    for (int ky = 0; ky < geom.ny; ++ky) {
      const double dx = dft_cosine(kx, geom.nx, geom.spacing) - cx;
      const double dy = dft_cosine(ky, geom.ny, geom.spacing) - cy;
      entries.push_back({dx * dx + dy * dy, kx, ky});
    }
  std::stable_sort(entries.begin(), entries.end(), [](const Entry &a, const Entry &b) { return a.dist < b.dist; });
  std::vector<CVec> out;
  for (int i = 0; i < count; ++i)
    out.push_back(dft_beam(geom, dft_cosine(entries[i].kx, geom.nx, geom.spacing),
                           dft_cosine(entries[i].ky, geom.ny, geom.spacing)));
  return out;
}

std::size_t MeasurementBatch::sample_count() const
{
  std::size_t n = 0;
  for (const auto &b : blocks) n += static_cast<std::size_t>(b.size());
  return n;
}

CVec MeasurementBatch::stacked() const
{
  CVec y(sample_count());
  Eigen::Index off = 0;
  for (const auto &b : blocks) {
    y.segment(off, b.size()) = b.reshaped();
    off += b.size();
  }
  return y;
}

bool MeasurementBatch::pair_structured() const
{
  if (blocks.empty()) return false;
  int n_t = 0;
  int n_r = 0;
  for (std::size_t m = 0; m < size(); ++m) {
    if (tx_beam[m] < 0 || rx_beam[m] < 0) return false;
    n_t = std::max(n_t, tx_beam[m] + 1);
    n_r = std::max(n_r, rx_beam[m] + 1);
  }
  if (static_cast<std::size_t>(n_t) * n_r != size()) return false;
  std::vector<char> seen(size(), 0);
  for (std::size_t m = 0; m < size(); ++m) {
    auto &s = seen[static_cast<std::size_t>(rx_beam[m]) * n_t + tx_beam[m]];
    if (s) return false;
    s = 1;
  }
  return true;
}

cd complex_normal(std::mt19937_64 &rng, double var)
{
  std::normal_distribution<double> n01(0.0, 1.0);
  const double sd = std::sqrt(var / 2.0);
  const double re = n01(rng);
  const double im = n01(rng);
  return {sd * re, sd * im};
}

MeasurementBatch measure(const ChannelTensor &h, const BeamformerSet &bf, const WaveformConfig &cfg, std::uint64_t seed)
{
  if (static_cast<int>(h.size()) != cfg.nd) throw Error(ErrorCode::DimensionMismatch, "channel tensor must have nd taps");
  const Eigen::Index n_r = h.front().rows();
  const Eigen::Index n_t = h.front().cols();
  for (const auto &tap : h)
    if (tap.rows() != n_r || tap.cols() != n_t) throw Error(ErrorCode::DimensionMismatch, "channel taps differ in shape");
  check_beams(bf, static_cast<int>(n_t), static_cast<int>(n_r), cfg);

  MeasurementBatch batch = batch_skeleton(bf, cfg);
  std::mt19937_64 rng(seed);
  const double amp = std::sqrt(cfg.pt_watts());
  for (std::size_t m = 0; m < bf.size(); ++m) {
    const CMat &f = bf.precoders[m];
    const CMat &s = bf.pilots[m];
    std::vector<CMat> hf(cfg.nd);
    for (int d = 0; d < cfg.nd; ++d) hf[d] = h[d] * f;
    CMat x = CMat::Zero(n_r, cfg.q);
    for (int q = 0; q < cfg.q; ++q)
      for (int d = 0; d < cfg.nd && d <= q; ++d) x.col(q) += hf[d] * s.col(q - d);
    x *= amp;
    if (cfg.noise_var > 0.0)
      for (int q = 0; q < cfg.q; ++q)
        for (Eigen::Index r = 0; r < n_r; ++r) x(r, q) += complex_normal(rng, cfg.noise_var);
    const CMat combined = bf.combiners[m].adjoint() * x;
    batch.blocks.push_back(bf.whiteners[m].triangularView<Eigen::Lower>().solve(combined));
  }
  return batch;
}

MeasurementBatch measure_paths(std::span<const PathParams> paths, const BeamformerSet &bf, const WaveformConfig &cfg,
                               const ArrayGeometry &tx, const ArrayGeometry &rx, std::uint64_t seed)
{
  check_beams(bf, tx.size(), rx.size(), cfg);
  MeasurementBatch batch = batch_skeleton(bf, cfg);
  const Eigen::Index ns = bf.precoders.front().cols();
  for (std::size_t m = 0; m < bf.size(); ++m) batch.blocks.push_back(CMat::Zero(ns, cfg.q));

  const double amp = std::sqrt(cfg.pt_watts());
  for (const auto &path : paths) {
    if (!in_window(path.toa, cfg))
      throw Error(ErrorCode::PathOutOfWindow, "path delay " + std::to_string(path.toa - cfg.t_off) + " s outside the tap window");
    const CVec ar = steering_vector(rx, path.doa_az, path.doa_el);
    const CVec at = steering_vector(tx, path.dod_az, path.dod_el);
    const RVec p = delay_response(path.toa - cfg.t_off, cfg);
    for (std::size_t m = 0; m < bf.size(); ++m) {
      const CVec u = batch.whitened_combiners[m].adjoint() * ar;
      const Eigen::RowVectorXcd v = at.adjoint() * bf.precoders[m];
      const Eigen::RowVectorXcd sigma = v * bf.pilots[m];
      Eigen::RowVectorXcd c = Eigen::RowVectorXcd::Zero(cfg.q);
      for (int q = 0; q < cfg.q; ++q) {
        cd acc = 0.0;
        for (int d = 0; d < cfg.nd && d <= q; ++d) acc += p[d] * sigma[q - d];
        c[q] = acc;
      }
      batch.blocks[m].noalias() += (amp * path.gain) * (u * c);
    }
  }
  if (cfg.noise_var > 0.0) {
    std::mt19937_64 rng(seed);
    for (auto &block : batch.blocks)
      for (Eigen::Index q = 0; q < block.cols(); ++q)
        for (Eigen::Index i = 0; i < block.rows(); ++i) block(i, q) += complex_normal(rng, cfg.noise_var);
  }
  return batch;
}

} // namespace mmtrack
