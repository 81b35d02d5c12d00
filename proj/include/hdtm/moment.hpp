#pragma once

// The orthogonalized score
//   psi = -I - II + III + c_theta
//   I   = h4 / (2 h2)
//   II  = (Lambda_theta(y) - h1)(dLambda_theta(y) - h3) / h2
//   III = h4 (Lambda_theta(y) - h1)^2 / (2 h2^2)
//   c   = dLambda'_theta(y) / Lambda'_theta(y)
// together with its empirical average and a numerical probe of the
// orthogonality condition (the r-derivative of the perturbed moment at 0).

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "hdtm/dataset.hpp"
#include "hdtm/errors.hpp"
#include "hdtm/nuisance.hpp"
#include "hdtm/stats.hpp"
#include "hdtm/transform.hpp"

namespace hdtm {

struct ScoreParts {
  double part_I = 0.0;
  double part_II = 0.0;
  double part_III = 0.0;
  double part_c = 0.0;
  double psi = 0.0;
};

inline ScoreParts psi_single(double y, double theta, const TransformationFamily& family,
                             double h1, double h2, double h3, double h4) {
  if (!(h2 > 0.0)) throw VarianceError("psi_single: h2 must be positive");
  ScoreParts out;
  const double eps = eval(family, theta, y) - h1;
  const double eps_dot = dtheta(family, theta, y) - h3;
  out.part_I = h4 / (2.0 * h2);
  out.part_II = eps * eps_dot / h2;
  out.part_III = h4 * eps * eps / (2.0 * h2 * h2);
  out.part_c = c_ratio(family, theta, y);
  out.psi = -out.part_I - out.part_II + out.part_III + out.part_c;
  return out;
}

struct EmpiricalMoment {
  double mean_psi = 0.0;
  Eigen::VectorXd per_obs;
};

inline EmpiricalMoment empirical_moment(const Dataset& data, const TransformationFamily& family,
                                        double theta, const NuisanceAtTheta& nuis) {
  if (data.n() == 0) throw InputError("empirical_moment: empty data");
  if (nuis.m_hat.size() != data.n()) throw InputError("empirical_moment: nuisance size mismatch");
  if (std::abs(nuis.theta - theta) > 1e-12)
    throw InputError("empirical_moment: nuisance fitted at a different theta");
  EmpiricalMoment out;
  out.per_obs.resize(data.n());
  for (Eigen::Index i = 0; i < data.n(); ++i)
    out.per_obs(i) = psi_single(data.y(i), theta, family, nuis.m_hat(i), nuis.sigma2,
                                nuis.mdot_hat(i), nuis.sigma2dot)
                         .psi;
  out.mean_psi = compensated_mean(out.per_obs.data(), static_cast<std::size_t>(out.per_obs.size()));
  return out;
}

struct OrthogonalityProbe {
  double linear_coef = 0.0;  // a in g(r) ~ g(0) + a r + b r^2
  double quad_coef = 0.0;    // b
  std::vector<double> g_values;
};

// Evaluates g(r) = E_n[psi(theta0, h0 + r (h~ - h0))] componentwise over
// r_grid and least-squares fits a quadratic. Orthogonality of the score
// means the linear coefficient vanishes up to sampling noise.
// `drop_part_three` removes III from psi, a deliberately non-orthogonal
// variant used as a negative control.
inline OrthogonalityProbe orthogonality_probe(const Dataset& data,
                                              const TransformationFamily& family, double theta0,
                                              const NuisanceAtTheta& nuis_true,
                                              const NuisanceAtTheta& nuis_perturbed,
                                              const std::vector<double>& r_grid,
                                              bool drop_part_three = false) {
  if (r_grid.size() < 3) throw InputError("orthogonality_probe: need at least three r values");
  if (std::abs(nuis_true.theta - theta0) > 1e-12 || std::abs(nuis_perturbed.theta - theta0) > 1e-12)
    throw InputError("orthogonality_probe: nuisance objects must be fitted at theta0");

  OrthogonalityProbe out;
  out.g_values.reserve(r_grid.size());
  std::vector<double> per(static_cast<std::size_t>(data.n()));
  for (double r : r_grid) {
    if (!(r >= 0.0 && r < 1.0)) throw InputError("orthogonality_probe: r outside [0, 1)");
    const double h2 = nuis_true.sigma2 + r * (nuis_perturbed.sigma2 - nuis_true.sigma2);
    const double h4 = nuis_true.sigma2dot + r * (nuis_perturbed.sigma2dot - nuis_true.sigma2dot);
    for (Eigen::Index i = 0; i < data.n(); ++i) {
      const double h1 = nuis_true.m_hat(i) + r * (nuis_perturbed.m_hat(i) - nuis_true.m_hat(i));
      const double h3 =
          nuis_true.mdot_hat(i) + r * (nuis_perturbed.mdot_hat(i) - nuis_true.mdot_hat(i));
      const ScoreParts parts = psi_single(data.y(i), theta0, family, h1, h2, h3, h4);
      per[static_cast<std::size_t>(i)] = drop_part_three ? parts.psi - parts.part_III : parts.psi;
    }
    out.g_values.push_back(compensated_mean(per.data(), per.size()));
  }

  Eigen::MatrixXd D(static_cast<Eigen::Index>(r_grid.size()), 3);
  Eigen::VectorXd g(static_cast<Eigen::Index>(r_grid.size()));
  for (std::size_t k = 0; k < r_grid.size(); ++k) {
    D(static_cast<Eigen::Index>(k), 0) = 1.0;
    D(static_cast<Eigen::Index>(k), 1) = r_grid[k];
    D(static_cast<Eigen::Index>(k), 2) = r_grid[k] * r_grid[k];
    g(static_cast<Eigen::Index>(k)) = out.g_values[k];
  }
  const Eigen::VectorXd coef = D.colPivHouseholderQr().solve(g);
  out.linear_coef = coef(1);
  out.quad_coef = coef(2);
  return out;
}

inline std::vector<double> default_r_grid() {
  std::vector<double> r;
  for (int k = 0; k <= 10; ++k) r.push_back(0.05 * k);
  return r;
}

}  // namespace hdtm
