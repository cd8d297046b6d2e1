#include "doctest.h"

#include <random>

#include "mmtrack/signal_model.hpp"
#include "support/oracles.hpp"

using namespace mmtrack;

TEST_CASE("steering vector of a single element is one")
{
  ArrayGeometry g;
  const CVec a = steering_vector(g, 0.0, 0.0);
  REQUIRE(a.size() == 1);
  CHECK(a[0] == cd(1.0, 0.0));
}

TEST_CASE("half-wavelength endfire pair")
{
  ArrayGeometry g;
  g.nx = 2;
  const CVec a = steering_vector(g, 0.0, 0.0);
  CHECK(std::abs(a[0] - cd(1.0, 0.0)) < 1e-15);
  CHECK(std::abs(a[1] - cd(-1.0, 0.0)) < 1e-15);
}

TEST_CASE("16x16 steering vector matches element loop")
{
  ArrayGeometry g;
  g.nx = 16;
  g.ny = 16;
  g.orientation = frame_from_broadside(Vec3(0.2, -1.0, -0.3).normalized(), Vec3::UnitX());
  const double az = 0.3, el = 0.1;
  const CVec a = steering_vector(g, az, el);
  const Vec3 u = g.orientation.transpose() * Vec3(std::cos(el) * std::cos(az), std::cos(el) * std::sin(az), std::sin(el));
  double worst = 0.0;
  for (int ix = 0; ix < 16; ++ix)
    for (int iy = 0; iy < 16; ++iy) {
      const cd ref = std::exp(cd(0.0, 2.0 * kPi * 0.5 * (ix * u.x() + iy * u.y())));
      worst = std::max(worst, std::abs(a[ix * 16 + iy] - ref));
    }
  CHECK(worst < 1e-12);
  CHECK(a.norm() == doctest::Approx(16.0).epsilon(1e-12));

  // Kronecker split into the two axis factors
  const CVec k = oracle::kron(axis_response(16, 0.5, u.x()), axis_response(16, 0.5, u.y()));
  CHECK((k - a).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("raised cosine")
{
  WaveformConfig cfg;
  CHECK(raised_cosine(0.0, cfg) == 1.0);
  CHECK(std::abs(raised_cosine(3 * cfg.ts, cfg)) < 1e-12);
  CHECK(std::abs(raised_cosine(-7 * cfg.ts, cfg)) < 1e-12);

  SUBCASE("removable singularity")
  {
    const double t0 = cfg.ts / (2.0 * cfg.rolloff);
    const double x = 1.0 / (2.0 * cfg.rolloff);
    const double expected = kPi / 4.0 * std::sin(kPi * x) / (kPi * x);
    CHECK(raised_cosine(t0, cfg) == doctest::Approx(expected).epsilon(1e-12));
    const double h = 1e-9 * cfg.ts;
    const double limit = 0.5 * (raised_cosine(t0 - h, cfg) + raised_cosine(t0 + h, cfg));
    CHECK(std::abs(raised_cosine(t0, cfg) - limit) < 1e-6);
  }

  SUBCASE("pulse energy stays confined in the window")
  {
    for (int k = 0; k <= 200; ++k) {
      const double t = k * (cfg.nd - 1 - cfg.guard_taps) * cfg.ts / 200.0;
      const double e = delay_response(t, cfg).squaredNorm();
      CHECK(e >= 0.5);
      CHECK(e <= 1.5);
    }
  }
}

TEST_CASE("channel taps")
{
  WaveformConfig cfg;
  cfg.nd = 16;
  ArrayGeometry one;

  CHECK(channel_taps({}, cfg, one, one).size() == 16);
  for (const auto &tap : channel_taps({}, cfg, one, one)) CHECK(tap.isZero(0.0));

  PathParams p;
  p.gain = 1.0;
  p.toa = 5 * cfg.ts;
  const std::vector<PathParams> single{p};
  const auto h = channel_taps(single, cfg, one, one);
  for (int d = 0; d < 16; ++d) CHECK(std::abs(h[d](0, 0) - (d == 5 ? 1.0 : 0.0)) < 1e-12);

  SUBCASE("superposition")
  {
    ArrayGeometry tx, rx;
    tx.nx = 4;
    tx.ny = 2;
    rx.nx = 3;
    PathParams a, b;
    a.gain = cd(0.3, -0.2);
    a.toa = 2.3e-9;
    a.dod_az = 0.4;
    a.doa_el = -0.2;
    b.gain = cd(-0.1, 0.5);
    b.toa = 7.9e-9;
    b.dod_el = 0.3;
    b.doa_az = 2.0;
    const std::vector<PathParams> both{a, b}, only_a{a}, only_b{b};
    const auto hab = channel_taps(both, cfg, tx, rx);
    const auto ha = channel_taps(only_a, cfg, tx, rx);
    const auto hb = channel_taps(only_b, cfg, tx, rx);
    for (int d = 0; d < 16; ++d) CHECK((hab[d] - ha[d] - hb[d]).cwiseAbs().maxCoeff() < 1e-12);
  }

  SUBCASE("window violations")
  {
    PathParams late;
    late.toa = (cfg.nd - cfg.guard_taps) * cfg.ts;
    const std::vector<PathParams> v{late};
    CHECK_THROWS_AS(channel_taps(v, cfg, one, one), Error);
    PathParams early;
    early.toa = -0.1e-9;
    const std::vector<PathParams> w{early};
    CHECK_THROWS_AS(channel_taps(w, cfg, one, one), Error);
  }
}

TEST_CASE("whiteners reconstruct W^H W")
{
  std::mt19937_64 rng(4);
  BeamformerSet bf;
  for (int m = 0; m < 3; ++m) {
    CMat w(8, 3);
    for (int c = 0; c < 3; ++c) w.col(c) = oracle::random_unit(8, rng) * (1.0 + c);
    bf.combiners.push_back(w);
  }
  compute_whiteners(bf);
  for (std::size_t m = 0; m < 3; ++m) {
    const CMat &l = bf.whiteners[m];
    const CMat gram = bf.combiners[m].adjoint() * bf.combiners[m];
    CHECK((gram - l * l.adjoint()).norm() <= 1e-10 * gram.norm());
    CHECK(l.isLowerTriangular(0.0));
    for (int i = 0; i < 3; ++i) {
      CHECK(l(i, i).imag() == 0.0);
      CHECK(l(i, i).real() > 0.0);
    }
  }
}

TEST_CASE("shifted pilot matrix")
{
  CMat s(1, 4);
  s << 1.0, 2.0, 3.0, 4.0;
  const CMat big = shifted_pilot_matrix(s, 3);
  REQUIRE(big.rows() == 3);
  REQUIRE(big.cols() == 4);
  CHECK(big(0, 2) == cd(3.0));
  CHECK(big(1, 2) == cd(2.0));
  CHECK(big(2, 2) == cd(1.0));
  CHECK(big(2, 1) == cd(0.0));
}

namespace
{

struct Link
{
  WaveformConfig cfg;
  ArrayGeometry tx, rx;
  BeamformerSet bf;
};

Link small_link(std::uint64_t seed)
{
  Link l;
  l.cfg.nd = 16;
  l.cfg.q = 32;
  l.tx.nx = 4;
  l.tx.ny = 2;
  l.rx.nx = 2;
  l.rx.ny = 2;
  std::mt19937_64 rng(seed);
  l.bf = oracle::tiny_beams(l.tx.size(), l.rx.size(), 3, 3, l.cfg.q, rng);
  return l;
}

std::vector<PathParams> two_paths()
{
  PathParams a, b;
  a.gain = cd(1e-5, 2e-6);
  a.toa = 3.3e-9;
  a.dod_az = -0.3;
  a.dod_el = 0.1;
  a.doa_az = 2.1;
  b.gain = cd(-4e-6, 3e-6);
  b.toa = 8.1e-9;
  b.dod_az = 0.5;
  b.doa_az = -2.0;
  b.doa_el = 0.2;
  return {a, b};
}

} // namespace

TEST_CASE("measure")
{
  Link l = small_link(11);

  SUBCASE("noiseless zero channel gives zeros")
  {
    l.cfg.noise_var = 0.0;
    const ChannelTensor zero(l.cfg.nd, CMat::Zero(l.rx.size(), l.tx.size()));
    const auto b = measure(zero, l.bf, l.cfg, 3);
    for (const auto &y : b.blocks) CHECK(y.isZero(0.0));
  }

  SUBCASE("orthonormal combiner leaves the identity whitener")
  {
    BeamformerSet bf = l.bf;
    for (auto &w : bf.combiners) w = w / w.norm();
    compute_whiteners(bf);
    for (const auto &lm : bf.whiteners) CHECK(std::abs(lm(0, 0) - 1.0) < 1e-15);
  }

  SUBCASE("tensor and path-by-path models agree when noiseless")
  {
    l.cfg.noise_var = 0.0;
    const auto paths = two_paths();
    const auto a = measure(channel_taps(paths, l.cfg, l.tx, l.rx), l.bf, l.cfg, 1);
    const auto b = measure_paths(paths, l.bf, l.cfg, l.tx, l.rx, 1);
    CHECK((a.stacked() - b.stacked()).cwiseAbs().maxCoeff() < 1e-12 * a.stacked().cwiseAbs().maxCoeff());
  }

  SUBCASE("linearity with matched noise seeds")
  {
    const auto paths = two_paths();
    const std::vector<PathParams> p1{paths[0]}, p2{paths[1]};
    const auto h12 = channel_taps(paths, l.cfg, l.tx, l.rx);
    const auto h2 = channel_taps(p2, l.cfg, l.tx, l.rx);
    WaveformConfig quiet = l.cfg;
    quiet.noise_var = 0.0;
    const CVec lhs = measure(h12, l.bf, l.cfg, 9).stacked() - measure(h2, l.bf, l.cfg, 9).stacked();
    const CVec rhs = measure(channel_taps(p1, l.cfg, l.tx, l.rx), l.bf, quiet, 9).stacked();
    CHECK((lhs - rhs).cwiseAbs().maxCoeff() < 1e-12 * rhs.cwiseAbs().maxCoeff());
  }

  SUBCASE("same seed, same draw")
  {
    const ChannelTensor zero(l.cfg.nd, CMat::Zero(l.rx.size(), l.tx.size()));
    CHECK(measure(zero, l.bf, l.cfg, 5).stacked() == measure(zero, l.bf, l.cfg, 5).stacked());
    CHECK(measure(zero, l.bf, l.cfg, 5).stacked() != measure(zero, l.bf, l.cfg, 6).stacked());
  }
}

TEST_CASE("whitened noise covariance")
{
  // small Monte Carlo here; the 10^4-draw check lives in the acceptance suite
  WaveformConfig cfg;
  cfg.nd = 4;
  cfg.q = 64;
  cfg.noise_var = 1.0;
  std::mt19937_64 rng(2);
  BeamformerSet bf;
  CMat w(6, 2);
  w.col(0) = oracle::random_unit(6, rng);
  w.col(1) = 0.6 * w.col(0) + 0.8 * oracle::random_unit(6, rng);
  bf.precoders.push_back(CMat::Ones(1, 2));
  bf.combiners.push_back(w);
  bf.pilots.push_back(CMat::Ones(2, cfg.q));
  compute_whiteners(bf);
  const ChannelTensor zero(cfg.nd, CMat::Zero(6, 1));
  CMat cov = CMat::Zero(2, 2);
  int n = 0;
  for (std::uint64_t s = 0; s < 40; ++s) {
    const CMat y = measure(zero, bf, cfg, s).blocks[0];
    cov += y * y.adjoint();
    n += static_cast<int>(y.cols());
  }
  cov /= n;
  const double err = (cov - CMat::Identity(2, 2)).jacobiSvd().singularValues()[0];
  CHECK(err < 0.15);
}

TEST_CASE("hadamard pilots")
{
  const RMat h = hadamard(8);
  CHECK((h * h.transpose() - 8.0 * RMat::Identity(8, 8)).cwiseAbs().maxCoeff() == 0.0);
  CHECK_THROWS_AS(hadamard(12), Error);
  const int row = best_pilot_row(64, 64);
  CHECK(row >= 0);
  CHECK(row < 64);
}
