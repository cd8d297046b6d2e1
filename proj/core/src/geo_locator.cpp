#include "mmtrack/geo_locator.hpp"

#include <cmath>

#include "mmtrack/geometry.hpp"

namespace mmtrack
{
namespace
{

struct Problem
{
  Vec3 bs;
  double c;
  bool has_los;
  Vec3 phi0;
  double tdoa0 = 0.0;
  std::vector<Vec3> phi, theta;
  std::vector<double> tdoa;

  int unknowns() const { return 4 + static_cast<int>(phi.size()); }
  int equations() const { return 3 * (static_cast<int>(phi.size()) + (has_los ? 1 : 0)); }

  // x = [p(3), d0, beta_1..beta_n]
  RVec residual(const RVec &x, RMat *jac) const
  {
    const Vec3 p = x.head<3>();
    const double d0 = x[3];
    RVec r(equations());
    if (jac) *jac = RMat::Zero(equations(), unknowns());
    int row = 0;
    if (has_los) {
      const double l = d0 + c * tdoa0;
      r.segment<3>(row) = bs + l * phi0 - p;
      if (jac) {
        jac->block<3, 3>(row, 0) = -Mat3::Identity();
        jac->block<3, 1>(row, 3) = phi0;
      }
      row += 3;
    }
    for (std::size_t k = 0; k < phi.size(); ++k) {
      const double beta = x[4 + static_cast<Eigen::Index>(k)];
      const double l = d0 + c * tdoa[k];
      const double s2 = std::sin(beta) * std::sin(beta);
      const double c2 = std::cos(beta) * std::cos(beta);
      r.segment<3>(row) = bs + (l * s2) * phi[k] - p - (l * c2) * theta[k];
      if (jac) {
        jac->block<3, 3>(row, 0) = -Mat3::Identity();
        jac->block<3, 1>(row, 3) = s2 * phi[k] - c2 * theta[k];
        jac->block<3, 1>(row, 4 + static_cast<Eigen::Index>(k)) = (l * std::sin(2.0 * beta)) * (phi[k] + theta[k]);
      }
      row += 3;
    }
    return r;
  }

  // Unconstrained linear model over (p, d0, a_k) with b_k = L_k - a_k.
  std::optional<RVec> linear_init() const
  {
    const int n = static_cast<int>(phi.size());
    RMat a = RMat::Zero(equations(), 4 + n);
    RVec rhs(equations());
    int row = 0;
    if (has_los) {
      a.block<3, 3>(row, 0) = -Mat3::Identity();
      a.block<3, 1>(row, 3) = phi0;
      rhs.segment<3>(row) = -bs - c * tdoa0 * phi0;
      row += 3;
    }
    for (int k = 0; k < n; ++k) {
      a.block<3, 3>(row, 0) = -Mat3::Identity();
      a.block<3, 1>(row, 3) = -theta[k];
      a.block<3, 1>(row, 4 + k) = phi[k] + theta[k];
      rhs.segment<3>(row) = -bs + c * tdoa[k] * theta[k];
      row += 3;
    }
    Eigen::ColPivHouseholderQR<RMat> qr(a);
    if (qr.rank() < a.cols()) return std::nullopt;
    const RVec sol = qr.solve(rhs);
    RVec x(unknowns());
    x.head<4>() = sol.head<4>();
    for (int k = 0; k < n; ++k) {
      const double l = sol[3] + c * tdoa[k];
      const double frac = l > 0.0 ? std::clamp(sol[4 + k] / l, 0.0, 1.0) : 0.5;
      x[4 + k] = std::asin(std::sqrt(frac));
    }
    return x;
  }

  RVec fallback_init(const std::optional<Vec3> &guess) const
  {
    RVec x(unknowns());
    Vec3 p = guess ? *guess : bs + 10.0 * (has_los ? phi0 : phi.front());
    x.head<3>() = p;
    x[3] = (p - bs).norm() - (has_los ? c * tdoa0 : 0.0);
    for (std::size_t k = 0; k < phi.size(); ++k) x[4 + static_cast<Eigen::Index>(k)] = kPi / 4.0;
    return x;
  }
};

} // namespace

std::string_view to_string(LocMode mode)
{
  switch (mode) {
  case LocMode::LOS_Geometric: return "LOS_Geometric";
  case LocMode::NLOS_Geometric: return "NLOS_Geometric";
  case LocMode::DeadReckoning: return "DeadReckoning";
  }
  return "Unknown";
}

Localizability localizable(const std::vector<PathParams> &paths)
{
  int los = 0, first = 0;
  for (const auto &p : paths) {
    if (p.order == PathOrder::LOS) ++los;
    if (p.order == PathOrder::FirstOrder) ++first;
  }
  if (los > 0 && first >= 1) return {true, LocMode::LOS_Geometric};
  if (los == 0 && first >= 3) return {true, LocMode::NLOS_Geometric};
  return {false, LocMode::DeadReckoning};
}

PositionEstimate solve_position(const LocalizationInput &inp, const SolverSettings &settings)
{
  const Localizability loc = localizable(inp.paths);
  if (!loc.ok) throw Error(ErrorCode::NotLocalizable, "need LOS + 1 first-order path or 3 first-order paths");

  Problem pb;
  pb.bs = inp.bs_position;
  pb.c = inp.c;
  pb.has_los = loc.mode == LocMode::LOS_Geometric;
  bool los_taken = false;
  for (const auto &p : inp.paths) {
    if (p.order == PathOrder::LOS && !los_taken) {
      pb.phi0 = unit_direction(p.dod_az, p.dod_el);
      pb.tdoa0 = p.tdoa;
      los_taken = true;
    } else if (p.order == PathOrder::FirstOrder) {
      pb.phi.push_back(unit_direction(p.dod_az, p.dod_el));
      pb.theta.push_back(unit_direction(p.doa_az, p.doa_el));
      pb.tdoa.push_back(p.tdoa);
    }
  }

  RVec x = pb.linear_init().value_or(pb.fallback_init(inp.initial_guess));
  RMat jac;
  RVec r = pb.residual(x, &jac);
  double cost = r.squaredNorm();
  double lambda = 1e-3;
  PositionEstimate out;
  out.mode = loc.mode;
  out.converged = false;
  int it = 0;
  for (; it < settings.max_iterations; ++it) {
    const RMat jtj = jac.transpose() * jac;
    const RVec g = jac.transpose() * r;
    if (g.norm() == 0.0) {
      out.converged = true;
      break;
    }
    bool accepted = false;
    RVec step;
    for (int tries = 0; tries < 30 && !accepted; ++tries) {
      RMat damped = jtj;
      damped.diagonal() += lambda * (jtj.diagonal().array() + 1e-12).matrix();
      step = damped.ldlt().solve(-g);
      const RVec xn = x + step;
      RMat jn;
      const RVec rn = pb.residual(xn, &jn);
      const double cn = rn.squaredNorm();
      if (cn <= cost) {
        x = xn;
        r = rn;
        jac = std::move(jn);
        cost = cn;
        lambda = std::max(lambda * 0.3, 1e-12);
        accepted = true;
      } else {
        lambda *= 10.0;
      }
    }
    if (!accepted || step.norm() < settings.step_tol) {
      out.converged = true;
      break;
    }
  }
  out.iterations = it;
  out.xyz = x.head<3>();
  out.xy = out.xyz.head<2>();
  out.residual = std::sqrt(cost);
  return out;
}

Vec2 dead_reckon(const Vec2 &prev_xy, const Vec2 &speed, double tp)
{
  return {prev_xy.x() + tp * speed.x(), prev_xy.y() + tp * speed.y()};
}

} // namespace mmtrack
