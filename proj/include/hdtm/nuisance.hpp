#pragma once

// Nuisance estimation at a fixed theta: lasso regressions of the transformed
// response and of its theta-derivative on X, plus the variance quantities
//   sigma2    = (1/n) sum resid_i^2
//   sigma2dot = (2/n) sum resid_i * residdot_i
// computed exactly as displayed (no degrees-of-freedom correction).

#include <Eigen/Dense>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "hdtm/dataset.hpp"
#include "hdtm/errors.hpp"
#include "hdtm/lasso.hpp"
#include "hdtm/transform.hpp"

namespace hdtm {

struct NuisanceAtTheta {
  double theta = 0.0;
  LassoFit fit_m;     // Lambda_theta(Y) on X
  LassoFit fit_mdot;  // dLambda_theta(Y)/dtheta on X
  double sigma2 = 0.0;
  double sigma2dot = 0.0;
  Eigen::VectorXd m_hat;      // intercept + x beta per observation
  Eigen::VectorXd mdot_hat;
  Eigen::VectorXd resid;      // Lambda_theta(y_i) - m_hat_i
  Eigen::VectorXd resid_dot;

  // Assembles a nuisance object from externally supplied h-values (oracle
  // or perturbed functions). sigma2/sigma2dot are taken as given, so the
  // fitted-object identities do not apply here.
  static NuisanceAtTheta from_values(const Dataset& data, const TransformationFamily& family,
                                     double theta, const Eigen::VectorXd& h1, double h2,
                                     const Eigen::VectorXd& h3, double h4) {
    if (h1.size() != data.n() || h3.size() != data.n())
      throw InputError("nuisance: h-value length mismatch");
    NuisanceAtTheta out;
    out.theta = theta;
    out.m_hat = h1;
    out.mdot_hat = h3;
    out.sigma2 = h2;
    out.sigma2dot = h4;
    out.resid.resize(data.n());
    out.resid_dot.resize(data.n());
    for (Eigen::Index i = 0; i < data.n(); ++i) {
      out.resid(i) = eval(family, theta, data.y(i)) - h1(i);
      out.resid_dot(i) = dtheta(family, theta, data.y(i)) - h3(i);
    }
    return out;
  }
};

inline NuisanceAtTheta fit_at_theta(const Dataset& data, const TransformationFamily& family,
                                    double theta, const LassoConfig& config,
                                    const NuisanceAtTheta* warm = nullptr) {
  data.validate();
  const Eigen::Index n = data.n();
  Eigen::VectorXd z(n), zdot(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    z(i) = eval(family, theta, data.y(i));
    zdot(i) = dtheta(family, theta, data.y(i));
  }

  const double z_scale = 1.0 + z.squaredNorm() / static_cast<double>(n);
  const double z_var = (z.array() - z.mean()).square().sum() / static_cast<double>(n);
  if (z_var <= 1e-14 * z_scale)
    throw DegenerateModelError("nuisance: transformed response has no variation");

  NuisanceAtTheta out;
  out.theta = theta;
  out.fit_m = fit_lasso(data.X, z, config, warm ? &warm->fit_m.beta : nullptr);
  out.fit_mdot = fit_lasso(data.X, zdot, config, warm ? &warm->fit_mdot.beta : nullptr);

  out.m_hat = (data.X * out.fit_m.beta).array() + out.fit_m.intercept;
  out.mdot_hat = (data.X * out.fit_mdot.beta).array() + out.fit_mdot.intercept;
  out.resid = z - out.m_hat;
  out.resid_dot = zdot - out.mdot_hat;
  out.sigma2 = out.resid.squaredNorm() / static_cast<double>(n);
  out.sigma2dot = 2.0 * out.resid.dot(out.resid_dot) / static_cast<double>(n);

  if (out.sigma2 < 1e-14 * z_scale)
    throw DegenerateModelError("nuisance: residual variance numerically zero");
  return out;
}

struct NuisanceGridPoint {
  double theta = 0.0;
  std::optional<NuisanceAtTheta> fit;
  std::string error;  // set when this theta failed
};

// Sweeps a sorted theta grid, warm-starting each fit from its predecessor.
// Failures are recorded per entry and do not abort the sweep.
inline std::vector<NuisanceGridPoint> fit_grid(const Dataset& data,
                                               const TransformationFamily& family,
                                               const std::vector<double>& thetas,
                                               const LassoConfig& config) {
  std::vector<NuisanceGridPoint> out(thetas.size());
  const NuisanceAtTheta* warm = nullptr;
  for (std::size_t k = 0; k < thetas.size(); ++k) {
    if (k > 0 && thetas[k] < thetas[k - 1]) throw InputError("fit_grid: thetas must be sorted");
    out[k].theta = thetas[k];
    try {
      out[k].fit = fit_at_theta(data, family, thetas[k], config, warm);
      warm = &*out[k].fit;
    } catch (const Error& e) {
      out[k].error = e.what();
    }
  }
  return out;
}

}  // namespace hdtm
