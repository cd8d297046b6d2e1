#include "mmtrack/momp.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace mmtrack
{
namespace
{

struct Candidate
{
  AtomIndex j{};
  double score = -1.0;
};

bool better(double score, const AtomIndex &j, const Candidate &best)
{
  return score > best.score || (score == best.score && j < best.j);
}

double ratio(double num2, double den) { return den > 0.0 ? num2 / den : 0.0; }

class Solver
{
public:
  Solver(const MeasurementBatch &batch, const DictionarySet &dict, const MompOptions &opts)
    : b_(batch), d_(dict), o_(opts)
  {
    if (b_.size() == 0) throw Error(ErrorCode::DimensionMismatch, "measurement batch is empty");
    if (o_.n_paths < 1) throw Error(ErrorCode::InvalidArgument, "n_paths must be >= 1");
    m_ = static_cast<int>(b_.size());
    ns_ = b_.streams();
    q_ = b_.cfg.q;
    nd_ = b_.cfg.nd;
    if (d_.cfg.nd != nd_) throw Error(ErrorCode::DimensionMismatch, "dictionary and batch disagree on nd");
    for (int m = 0; m < m_; ++m) {
      if (b_.blocks[m].rows() != ns_ || b_.blocks[m].cols() != q_)
        throw Error(ErrorCode::DimensionMismatch, "observation block must be N_s x Q");
      if (b_.precoders[m].rows() != d_.tx.size() || b_.whitened_combiners[m].rows() != d_.rx.size())
        throw Error(ErrorCode::DimensionMismatch, "beamformers do not match dictionary arrays");
    }
    prepare_beams();
    prepare_pilots();
  }

  SparseSolution run();
  CVec atom_vector(const AtomIndex &j) const;

private:
  // Per-atom factors: V (N_s x M) tx responses, U (N_s x M) rx responses,
  // E[g] (N_s x Q) delay waveforms per pilot group.
  CMat tx_factor(int j1, int j2) const;
  CMat rx_factor(int j3, int j4) const;
  std::vector<CMat> delay_factor(int j5) const;
  CMat waveform(int m, const CMat &v, const std::vector<CMat> &e) const
  {
    return v.col(m).transpose() * e[group_[m]];
  }
  std::vector<CMat> delay_factor_col(const RVec &p) const;

  double atom_score(const AtomIndex &j) const;
  bool forbidden(const AtomIndex &j) const;
  int sweep_angle(int dim, AtomIndex &j);
  int sweep_delay(AtomIndex &j);
  int pick_angle(int dim, const AtomIndex &j, const CMat &psi, const CVec &gamma, const CMat &k);

  Candidate init_exhaustive();
  Candidate init_coarse();
  Candidate init_seeded();
  Candidate initial_candidate();
  int refine(AtomIndex &j);

  void prepare_beams();
  void prepare_pilots();

  const MeasurementBatch &b_;
  const DictionarySet &d_;
  const MompOptions &o_;
  int m_ = 0, ns_ = 0, q_ = 0, nd_ = 0;

  std::vector<std::vector<CMat>> fmat_; // [m][s] tx precoder as nx x ny
  std::vector<std::vector<CMat>> wmat_; // [m][i] conj(whitened combiner) as nx x ny
  std::vector<int> group_;              // pilot group per measurement
  std::vector<CMat> pilot_;             // group pilot N_s x Q
  RMat p5_;                              // real delay dictionary
  std::vector<CMat> tau_;                // [g] (N_s*N_s) x N5 pilot-weighted delay energies

  std::vector<CMat> r_;                  // residual blocks
  std::vector<AtomIndex> selected_;
  std::vector<AtomIndex> dropped_;
  MompDiagnostics diag_;
};

void Solver::prepare_beams()
{
  const ArrayGeometry &tx = d_.tx;
  const ArrayGeometry &rx = d_.rx;
  fmat_.resize(m_);
  wmat_.resize(m_);
  for (int m = 0; m < m_; ++m) {
    for (int s = 0; s < ns_; ++s) {
      const CVec f = b_.precoders[m].col(s);
      fmat_[m].push_back(Eigen::Map<const CMat>(f.data(), tx.ny, tx.nx).transpose());
      const CVec w = b_.whitened_combiners[m].col(s);
      wmat_[m].push_back(Eigen::Map<const CMat>(w.data(), rx.ny, rx.nx).transpose().conjugate());
    }
  }
}

void Solver::prepare_pilots()
{
  group_ = b_.pilot_id;
  if (static_cast<int>(group_.size()) != m_) {
    group_.assign(m_, 0);
    for (int m = 0; m < m_; ++m) group_[m] = m; // no grouping information
  }
  const int n_groups = *std::max_element(group_.begin(), group_.end()) + 1;
  pilot_.assign(n_groups, CMat());
  for (int m = 0; m < m_; ++m)
    if (pilot_[group_[m]].size() == 0) pilot_[group_[m]] = b_.pilots[m];

  p5_ = d_.psi[4].real();
  const Eigen::Index n5 = p5_.cols();
  tau_.assign(n_groups, CMat());
  for (int g = 0; g < n_groups; ++g) {
    const CMat &s = pilot_[g];
    // E_s = Conv_s * P5 where Conv_s[q, d] = s[s, q - d]
    std::vector<CMat> es(ns_);
    for (int st = 0; st < ns_; ++st) {
      RMat conv_re = RMat::Zero(q_, nd_);
      RMat conv_im = RMat::Zero(q_, nd_);
      for (int q = 0; q < q_; ++q)
        for (int d = 0; d < nd_ && d <= q; ++d) {
          conv_re(q, d) = s(st, q - d).real();
          conv_im(q, d) = s(st, q - d).imag();
        }
      CMat e(q_, n5);
      e.real() = conv_re * p5_;
      if (conv_im.isZero(0.0))
        e.imag().setZero();
      else
        e.imag() = conv_im * p5_;
      es[st] = std::move(e);
    }
    CMat t(ns_ * ns_, n5);
    for (int a = 0; a < ns_; ++a)
      for (int c = 0; c < ns_; ++c)
        for (Eigen::Index k = 0; k < n5; ++k) t(a * ns_ + c, k) = es[a].col(k).dot(es[c].col(k));
    tau_[g] = std::move(t);
  }
}

CMat Solver::tx_factor(int j1, int j2) const
{
  const auto psi1 = d_.psi[0].col(j1);
  const auto psi2 = d_.psi[1].col(j2);
  CMat v(ns_, m_);
  for (int m = 0; m < m_; ++m)
    for (int s = 0; s < ns_; ++s) v(s, m) = psi1.transpose() * (fmat_[m][s] * psi2);
  return v;
}

CMat Solver::rx_factor(int j3, int j4) const
{
  const auto psi3 = d_.psi[2].col(j3);
  const auto psi4 = d_.psi[3].col(j4);
  CMat u(ns_, m_);
  for (int m = 0; m < m_; ++m)
    for (int i = 0; i < ns_; ++i) u(i, m) = psi3.transpose() * (wmat_[m][i] * psi4);
  return u;
}

std::vector<CMat> Solver::delay_factor_col(const RVec &p) const
{
  std::vector<CMat> e(pilot_.size());
  for (std::size_t g = 0; g < pilot_.size(); ++g) {
    CMat eg = CMat::Zero(ns_, q_);
    for (int q = 0; q < q_; ++q)
      for (int d = 0; d < nd_ && d <= q; ++d)
        if (p[d] != 0.0) eg.col(q) += p[d] * pilot_[g].col(q - d);
    e[g] = std::move(eg);
  }
  return e;
}

std::vector<CMat> Solver::delay_factor(int j5) const { return delay_factor_col(p5_.col(j5)); }

CVec Solver::atom_vector(const AtomIndex &j) const
{
  d_.check_index(j);
  const CMat v = tx_factor(j[0], j[1]);
  const CMat u = rx_factor(j[2], j[3]);
  const auto e = delay_factor(j[4]);
  CVec out(static_cast<Eigen::Index>(m_) * ns_ * q_);
  Eigen::Index off = 0;
  for (int m = 0; m < m_; ++m) {
    const CMat block = u.col(m) * waveform(m, v, e);
    out.segment(off, block.size()) = block.reshaped();
    off += block.size();
  }
  return out;
}

double Solver::atom_score(const AtomIndex &j) const
{
  const CMat v = tx_factor(j[0], j[1]);
  const CMat u = rx_factor(j[2], j[3]);
  const auto e = delay_factor(j[4]);
  cd num = 0.0;
  double den = 0.0;
  for (int m = 0; m < m_; ++m) {
    const Eigen::RowVectorXcd c = waveform(m, v, e);
    num += u.col(m).dot(r_[m] * c.adjoint());
    den += u.col(m).squaredNorm() * c.squaredNorm();
  }
  return ratio(std::norm(num), den);
}

bool Solver::forbidden(const AtomIndex &j) const
{
  return std::find(selected_.begin(), selected_.end(), j) != selected_.end() ||
         std::find(dropped_.begin(), dropped_.end(), j) != dropped_.end();
}

int Solver::pick_angle(int dim, const AtomIndex &j, const CMat &psi, const CVec &gamma, const CMat &k)
{
  const CVec num = psi.adjoint() * gamma;
  const CMat kp = k * psi;
  int best_idx = -1;
  double best_score = -1.0;
  for (Eigen::Index c = 0; c < psi.cols(); ++c) {
    AtomIndex cand = j;
    cand[dim] = static_cast<int>(c);
    if (forbidden(cand)) continue;
    const double den = psi.col(c).dot(kp.col(c)).real();
    const double s = ratio(std::norm(num[c]), den);
    if (s > best_score) {
      best_score = s;
      best_idx = static_cast<int>(c);
    }
  }
  diag_.atoms_scored += static_cast<std::uint64_t>(psi.cols());
  return best_idx < 0 ? j[dim] : best_idx;
}

int Solver::sweep_angle(int dim, AtomIndex &j)
{
  const bool tx = dim < 2;
  const CMat &psi = d_.psi[dim];
  const Eigen::Index n = psi.rows();
  const Eigen::Index cols = static_cast<Eigen::Index>(m_) * ns_;
  const CMat v = tx_factor(j[0], j[1]);
  const CMat u = rx_factor(j[2], j[3]);
  const auto e = delay_factor(j[4]);
  // gamma = conj(H) coef and K = conj(H) T, with H stacking the responses of
  // the other axis per measurement/stream and T the matching weighted rows
  CMat h(n, cols);
  CMat t(cols, n);
  CVec coef(cols);
  if (tx) {
    const auto other = d_.psi[dim == 0 ? 1 : 0].col(j[dim == 0 ? 1 : 0]);
    std::vector<CMat> gram(pilot_.size());
    for (std::size_t g = 0; g < pilot_.size(); ++g) gram[g] = e[g].conjugate() * e[g].transpose();
    for (int m = 0; m < m_; ++m) {
      const Eigen::Index c0 = static_cast<Eigen::Index>(m) * ns_;
      for (int s = 0; s < ns_; ++s)
        h.col(c0 + s) = dim == 0 ? CVec(fmat_[m][s] * other) : CVec(fmat_[m][s].transpose() * other);
      const CVec g = r_[m].transpose() * u.col(m).conjugate();
      const CMat &eg = e[group_[m]];
      for (int s = 0; s < ns_; ++s) coef[c0 + s] = (eg.row(s).conjugate() * g).value();
      t.middleRows(c0, ns_) = u.col(m).squaredNorm() * gram[group_[m]] * h.middleCols(c0, ns_).transpose();
    }
  } else {
    const auto other = d_.psi[dim == 2 ? 3 : 2].col(j[dim == 2 ? 3 : 2]);
    for (int m = 0; m < m_; ++m) {
      const Eigen::RowVectorXcd c = waveform(m, v, e);
      const CVec zeta = r_[m] * c.adjoint();
      const double cn = c.squaredNorm();
      const Eigen::Index c0 = static_cast<Eigen::Index>(m) * ns_;
      for (int i = 0; i < ns_; ++i) {
        h.col(c0 + i) = dim == 2 ? CVec(wmat_[m][i] * other) : CVec(wmat_[m][i].transpose() * other);
        coef[c0 + i] = zeta[i];
        t.row(c0 + i) = cn * h.col(c0 + i).transpose();
      }
    }
  }
  const CVec gamma = h.conjugate() * coef;
  const CMat k = h.conjugate() * t;
  const int idx = pick_angle(dim, j, psi, gamma, k);
  const int changed = idx != j[dim];
  j[dim] = idx;
  return changed;
}

int Solver::sweep_delay(AtomIndex &j)
{
  const CMat v = tx_factor(j[0], j[1]);
  const CMat u = rx_factor(j[2], j[3]);
  const std::size_t ng = pilot_.size();
  std::vector<CMat> agg(ng, CMat::Zero(ns_, q_));
  std::vector<CMat> omega(ng, CMat::Zero(ns_, ns_));
  for (int m = 0; m < m_; ++m) {
    const Eigen::RowVectorXcd g = (r_[m].transpose() * u.col(m).conjugate()).transpose();
    const int gi = group_[m];
    for (int s = 0; s < ns_; ++s) agg[gi].row(s) += std::conj(v(s, m)) * g;
    omega[gi] += u.col(m).squaredNorm() * (v.col(m).conjugate() * v.col(m).transpose());
  }
  CVec beta = CVec::Zero(nd_);
  for (std::size_t gi = 0; gi < ng; ++gi)
    for (int s = 0; s < ns_; ++s)
      for (int d = 0; d < nd_; ++d) {
        cd acc = 0.0;
        for (int q = d; q < q_; ++q) acc += agg[gi](s, q) * std::conj(pilot_[gi](s, q - d));
        beta[d] += acc;
      }
  const Eigen::Index n5 = p5_.cols();
  CVec num(n5);
  num.real() = p5_.transpose() * beta.real();
  num.imag() = p5_.transpose() * beta.imag();
  RVec den = RVec::Zero(n5);
  for (std::size_t gi = 0; gi < ng; ++gi)
    for (int a = 0; a < ns_; ++a)
      for (int c = 0; c < ns_; ++c)
        den += (omega[gi](a, c) * tau_[gi].row(a * ns_ + c).transpose()).real();
  int best_idx = -1;
  double best_score = -1.0;
  for (Eigen::Index k = 0; k < n5; ++k) {
    AtomIndex cand = j;
    cand[4] = static_cast<int>(k);
    if (forbidden(cand)) continue;
    const double s = ratio(std::norm(num[k]), den[k]);
    if (s > best_score) {
      best_score = s;
      best_idx = static_cast<int>(k);
    }
  }
  diag_.atoms_scored += static_cast<std::uint64_t>(n5);
  if (best_idx < 0) return 0;
  const int changed = best_idx != j[4];
  j[4] = best_idx;
  return changed;
}

int Solver::refine(AtomIndex &j)
{
  int sweeps = 0;
  for (; sweeps < o_.refine_sweeps;) {
    int changed = 0;
    for (int dim = 0; dim < 4; ++dim) changed += sweep_angle(dim, j);
    changed += sweep_delay(j);
    ++sweeps;
    if (!changed) break;
  }
  return sweeps;
}

namespace
{
std::vector<int> strided(int n, int stride)
{
  std::vector<int> idx;
  for (int i = 0; i < n; i += stride) idx.push_back(i);
  return idx;
}
} // namespace

Candidate Solver::init_exhaustive()
{
  std::array<int, 5> stride{1, 1, 1, 1, 1};
  auto product = [&] {
    double p = 1.0;
    for (int k = 0; k < 5; ++k) p *= std::ceil(static_cast<double>(d_.atoms(k)) / stride[k]);
    return p;
  };
  while (product() > o_.exhaustive_limit) {
    // widen the stride of the dimension with the most remaining points
    int widest = 0;
    double most = 0.0;
    for (int k = 0; k < 5; ++k) {
      const double n = std::ceil(static_cast<double>(d_.atoms(k)) / stride[k]);
      if (n > most) {
        most = n;
        widest = k;
      }
    }
    if (most <= 1.0) break;
    stride[widest] *= 2;
  }
  std::array<std::vector<int>, 5> idx;
  for (int k = 0; k < 5; ++k) idx[k] = strided(d_.atoms(k), stride[k]);

  const std::size_t n12 = idx[0].size() * idx[1].size();
  const std::size_t n34 = idx[2].size() * idx[3].size();
  std::vector<CMat> vs, us;
  vs.reserve(n12);
  us.reserve(n34);
  for (int a : idx[0])
    for (int b : idx[1]) vs.push_back(tx_factor(a, b));
  for (int a : idx[2])
    for (int b : idx[3]) us.push_back(rx_factor(a, b));
  RMat unorm(m_, n34);
  for (std::size_t c = 0; c < n34; ++c) unorm.col(c) = us[c].colwise().squaredNorm().transpose();

  Candidate best;
  for (int j5 : idx[4]) {
    const auto e = delay_factor(j5);
    std::vector<CMat> gram(pilot_.size());
    for (std::size_t g = 0; g < pilot_.size(); ++g) gram[g] = e[g].conjugate() * e[g].transpose();
    std::vector<CMat> z(m_);
    for (int m = 0; m < m_; ++m) z[m] = r_[m] * e[group_[m]].adjoint();
    for (std::size_t c12 = 0; c12 < n12; ++c12) {
      const CMat &v = vs[c12];
      // w_m = Z_m conj(v_m); ||c_m||^2 = v_m^H G v_m
      CMat w(ns_, m_);
      RVec cn(m_);
      for (int m = 0; m < m_; ++m) {
        w.col(m) = z[m] * v.col(m).conjugate();
        cn[m] = v.col(m).dot(gram[group_[m]] * v.col(m)).real();
      }
      for (std::size_t c34 = 0; c34 < n34; ++c34) {
        const CMat &u = us[c34];
        cd num = 0.0;
        for (int m = 0; m < m_; ++m) num += u.col(m).dot(w.col(m));
        const double den = unorm.col(c34).dot(cn);
        const AtomIndex j{idx[0][c12 / idx[1].size()], idx[1][c12 % idx[1].size()], idx[2][c34 / idx[3].size()],
                          idx[3][c34 % idx[3].size()], j5};
        if (forbidden(j)) continue;
        const double s = ratio(std::norm(num), den);
        if (better(s, j, best)) best = {j, s};
      }
    }
  }
  diag_.atoms_scored += static_cast<std::uint64_t>(n12 * n34 * idx[4].size());
  return best;
}

Candidate Solver::init_coarse()
{
  int mt = 0, mr = 0;
  for (int m = 0; m < m_; ++m) {
    mt = std::max(mt, b_.tx_beam[m] + 1);
    mr = std::max(mr, b_.rx_beam[m] + 1);
  }
  std::vector<int> tx_m(mt, -1), rx_m(mr, -1);
  for (int m = 0; m < m_; ++m) {
    if (tx_m[b_.tx_beam[m]] < 0) tx_m[b_.tx_beam[m]] = m;
    if (rx_m[b_.rx_beam[m]] < 0) rx_m[b_.rx_beam[m]] = m;
  }

  // delay from the spatially marginalised matched filter
  const Eigen::Index n5 = p5_.cols();
  const double d5 = n5 > 1 ? d_.grids[4].values[1] - d_.grids[4].values[0] : b_.cfg.ts;
  const int stride5 = std::max(1, static_cast<int>(std::lround(o_.coarse_delay_step * b_.cfg.ts / d5)));
  const std::vector<int> cand5 = strided(static_cast<int>(n5), stride5);
  RMat psub(nd_, cand5.size());
  for (std::size_t k = 0; k < cand5.size(); ++k) psub.col(k) = p5_.col(cand5[k]);
  CMat rm(m_, nd_);
  for (int m = 0; m < m_; ++m) {
    const CMat &s = pilot_[group_[m]];
    for (int d = 0; d < nd_; ++d) {
      cd acc = 0.0;
      for (int q = d; q < q_; ++q) acc += r_[m](0, q) * std::conj(s(0, q - d));
      rm(m, d) = acc;
    }
  }
  CMat zk(m_, cand5.size());
  zk.real() = rm.real() * psub;
  zk.imag() = rm.imag() * psub;
  int best5 = cand5.front();
  int best5_col = 0;
  double best5_score = -1.0;
  for (std::size_t k = 0; k < cand5.size(); ++k) {
    double s = 0.0;
    for (int m = 0; m < m_; ++m) s += ratio(std::norm(zk(m, k)), tau_[group_[m]](0, cand5[k]).real());
    if (s > best5_score) {
      best5_score = s;
      best5 = cand5[k];
      best5_col = static_cast<int>(k);
    }
  }
  diag_.atoms_scored += cand5.size();

  CMat z(mr, mt);
  for (int m = 0; m < m_; ++m) z(b_.rx_beam[m], b_.tx_beam[m]) = zk(m, best5_col);

  auto angle_stride = [&](int dim) {
    const auto &g = d_.grids[dim].values;
    const double step = g.size() > 1 ? (g.back() - g.front()) / (g.size() - 1) : 1.0;
    return std::max(1, static_cast<int>(std::lround(o_.coarse_angle_step / step)));
  };

  // tx 2-D with rx free
  const auto c1 = strided(d_.atoms(0), angle_stride(0));
  const auto c2 = strided(d_.atoms(1), angle_stride(1));
  CMat p1(d_.psi[0].rows(), c1.size()), p2(d_.psi[1].rows(), c2.size());
  for (std::size_t k = 0; k < c1.size(); ++k) p1.col(k) = d_.psi[0].col(c1[k]);
  for (std::size_t k = 0; k < c2.size(); ++k) p2.col(k) = d_.psi[1].col(c2[k]);
  std::vector<CMat> vt(mt);
  for (int t = 0; t < mt; ++t) vt[t] = p1.transpose() * (fmat_[tx_m[t]][0] * p2);
  int b1 = c1.front(), b2 = c2.front();
  double best_tx = -1.0;
  CVec vbest(mt);
  for (std::size_t a = 0; a < c1.size(); ++a)
    for (std::size_t c = 0; c < c2.size(); ++c) {
      CVec v(mt);
      for (int t = 0; t < mt; ++t) v[t] = vt[t](a, c);
      const double s = ratio((z * v.conjugate()).squaredNorm(), v.squaredNorm());
      if (s > best_tx) {
        best_tx = s;
        b1 = c1[a];
        b2 = c2[c];
        vbest = v;
      }
    }
  diag_.atoms_scored += c1.size() * c2.size();

  // rx 2-D given tx
  const CVec zeta = z * vbest.conjugate();
  const auto c3 = strided(d_.atoms(2), angle_stride(2));
  const auto c4 = strided(d_.atoms(3), angle_stride(3));
  CMat p3(d_.psi[2].rows(), c3.size()), p4(d_.psi[3].rows(), c4.size());
  for (std::size_t k = 0; k < c3.size(); ++k) p3.col(k) = d_.psi[2].col(c3[k]);
  for (std::size_t k = 0; k < c4.size(); ++k) p4.col(k) = d_.psi[3].col(c4[k]);
  std::vector<CMat> ur(mr);
  for (int r = 0; r < mr; ++r) ur[r] = p3.transpose() * (wmat_[rx_m[r]][0] * p4);
  Candidate best;
  for (std::size_t a = 0; a < c3.size(); ++a)
    for (std::size_t c = 0; c < c4.size(); ++c) {
      cd num = 0.0;
      double un = 0.0;
      for (int r = 0; r < mr; ++r) {
        num += std::conj(ur[r](a, c)) * zeta[r];
        un += std::norm(ur[r](a, c));
      }
      const AtomIndex j{b1, b2, c3[a], c4[c], best5};
      if (forbidden(j)) continue;
      const double s = ratio(std::norm(num), un);
      if (better(s, j, best)) best = {j, s};
    }
  diag_.atoms_scored += c3.size() * c4.size();
  if (best.score < 0.0) best.j = {b1, b2, c3.front(), c4.front(), best5};
  return best;
}

Candidate Solver::init_seeded()
{
  Candidate best;
  for (const auto &seed : o_.seeds) {
    const AtomIndex j = d_.nearest(seed);
    if (forbidden(j)) continue;
    const double s = atom_score(j);
    ++diag_.atoms_scored;
    if (better(s, j, best)) best = {j, s};
  }
  return best;
}

Candidate Solver::initial_candidate()
{
  InitMode mode = o_.init;
  if (mode == InitMode::Auto) {
    if (!o_.seeds.empty())
      mode = InitMode::Seeded;
    else if (static_cast<double>(d_.product_size()) <= o_.exhaustive_limit)
      mode = InitMode::Exhaustive;
    else
      mode = InitMode::Coarse;
  }
  if (mode == InitMode::Coarse && !(b_.pair_structured() && ns_ == 1)) mode = InitMode::Exhaustive;
  diag_.init_used = mode;
  if (mode == InitMode::Seeded) {
    Candidate c = init_seeded();
    if (c.score >= 0.0) return c;
    // every seed already used: fall back to a global search
    mode = (b_.pair_structured() && ns_ == 1 && static_cast<double>(d_.product_size()) > o_.exhaustive_limit)
               ? InitMode::Coarse
               : InitMode::Exhaustive;
  }
  return mode == InitMode::Coarse ? init_coarse() : init_exhaustive();
}

SparseSolution Solver::run()
{
  const CVec y = b_.stacked();
  const double floor = o_.noise_floor_factor * b_.cfg.noise_var * static_cast<double>(y.size());
  r_ = b_.blocks;
  diag_.product_size = d_.product_size();
  diag_.residual_curve.push_back(y.norm());

  SparseSolution sol;
  CMat a(y.size(), 0);
  CVec x;
  CVec resid = y;
  const int max_attempts = 3 * o_.n_paths + 3;
  int attempts = 0;
  while (static_cast<int>(selected_.size()) < o_.n_paths && attempts++ < max_attempts) {
    const bool flagged = resid.squaredNorm() < floor;
    Candidate c = initial_candidate();
    AtomIndex j = c.j;
    const int sweeps = refine(j);
    if (forbidden(j)) {
      // sweeps only move to admissible atoms, so this is the init itself
      dropped_.push_back(j);
      continue;
    }
    CMat trial(y.size(), a.cols() + 1);
    trial.leftCols(a.cols()) = a;
    trial.col(a.cols()) = atom_vector(j);
    Eigen::ColPivHouseholderQR<CMat> qr(trial);
    if (qr.rank() < trial.cols()) {
      dropped_.push_back(j);
      ++diag_.rank_drops;
      continue;
    }
    a = std::move(trial);
    x = qr.solve(y);
    resid = y - a * x;
    selected_.push_back(j);
    sol.below_noise_floor.push_back(flagged);
    diag_.sweeps.push_back(sweeps);
    diag_.residual_curve.push_back(resid.norm());
    ++diag_.iterations;
    Eigen::Index off = 0;
    for (int m = 0; m < m_; ++m) {
      r_[m] = resid.segment(off, static_cast<Eigen::Index>(ns_) * q_).reshaped(ns_, q_);
      off += static_cast<Eigen::Index>(ns_) * q_;
    }
  }

  sol.atoms = selected_;
  sol.residual_norm = resid.norm();
  const double amp = std::sqrt(b_.cfg.pt_watts());
  for (std::size_t k = 0; k < selected_.size(); ++k) {
    sol.coeffs.push_back(x[static_cast<Eigen::Index>(k)]);
    PathParams p = d_.decode(selected_[k]);
    p.gain = x[static_cast<Eigen::Index>(k)] / amp;
    sol.params.push_back(p);
  }
  reference_tdoa(sol.params);
  sol.diag = diag_;
  return sol;
}

} // namespace

std::string_view to_string(InitMode mode)
{
  switch (mode) {
  case InitMode::Auto: return "auto";
  case InitMode::Exhaustive: return "exhaustive";
  case InitMode::Coarse: return "coarse";
  case InitMode::Seeded: return "seeded";
  }
  return "unknown";
}

CVec apply_atom(const MeasurementBatch &batch, const AtomIndex &j, const DictionarySet &dict)
{
  MompOptions opts;
  opts.n_paths = 1;
  return Solver(batch, dict, opts).atom_vector(j);
}

SparseSolution momp_solve(const MeasurementBatch &batch, const DictionarySet &dict, const MompOptions &opts)
{
  return Solver(batch, dict, opts).run();
}

ChannelEstimate to_estimate(const SparseSolution &sol, double timestamp)
{
  ChannelEstimate est;
  est.timestamp = timestamp;
  std::vector<std::size_t> order(sol.params.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return std::abs(sol.params[a].gain) > std::abs(sol.params[b].gain);
  });
  for (std::size_t k : order) {
    est.paths.push_back(sol.params[k]);
    est.below_noise_floor.push_back(sol.below_noise_floor[k]);
  }
  est.t_min = reference_tdoa(est.paths);
  return est;
}

ChannelEstimate estimate_channel(const MeasurementBatch &batch, const DictionarySet &dict, int n_paths)
{
  MompOptions opts;
  opts.n_paths = n_paths;
  return to_estimate(momp_solve(batch, dict, opts), 0.0);
}

} // namespace mmtrack
