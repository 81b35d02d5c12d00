#pragma once

// Weighted-penalty lasso by cyclic coordinate descent with an active-set
// strategy. Minimizes
//
//   (1/n) ||y - a*1 - X b||_2^2 + (lambda/n) sum_j psi_j |b_j|
//
// with the intercept a unpenalized (handled by centering). The default
// penalty level is lambda = 2 c sqrt(n) PhiInv(1 - gamma/(2p)) with
// gamma = 0.1/log(max(p, n)); the loadings follow the data-driven rule
// psi_j = sqrt(E_n[x_j^2 eps^2]), refreshed from post-fit residuals.

#include <Eigen/Dense>
#include <algorithm>
#include <cassert>
#include <cmath>
#include <optional>
#include <vector>

#include "hdtm/errors.hpp"
#include "hdtm/stats.hpp"

namespace hdtm {

struct LassoConfig {
  std::optional<double> lambda_override;
  double c_mult = 1.1;
  std::optional<double> gamma;  // default 0.1/log(max(p, n))
  int max_iter = 20000;         // total coordinate sweeps
  double tol = 1e-9;            // max coefficient change per sweep
  int loading_iters = 2;        // loading refreshes (first from centered y)
  bool penalize_intercept = false;
  std::optional<Eigen::VectorXd> loadings_override;
};

struct LassoFit {
  Eigen::VectorXd beta;
  double intercept = 0.0;
  std::vector<int> active_set;
  double lambda_used = 0.0;
  Eigen::VectorXd loadings;
  int iterations = 0;
  bool converged = false;
};

inline double default_lambda(Eigen::Index n, Eigen::Index p, const LassoConfig& config) {
  if (n < 2 || p < 1) throw InputError("default_lambda: need n >= 2 and p >= 1");
  const double gamma =
      config.gamma ? *config.gamma : 0.1 / std::log(static_cast<double>(std::max(p, n)));
  if (!(gamma > 0.0 && gamma <= 1.0)) throw InputError("default_lambda: gamma outside (0, 1]");
  const double q = 1.0 - gamma / (2.0 * static_cast<double>(p));
  return 2.0 * config.c_mult * std::sqrt(static_cast<double>(n)) * normal_icdf(q);
}

namespace detail {

inline double soft_threshold(double z, double t) {
  if (z > t) return z - t;
  if (z < -t) return z + t;
  return 0.0;
}

// Data scale used to make the KKT tolerance meaningful for responses far
// from unit variance.
inline double kkt_scale(const Eigen::VectorXd& y) {
  const double ym = y.mean();
  return 1.0 + (y.array() - ym).square().sum() / static_cast<double>(y.size());
}

#ifndef NDEBUG
inline double lasso_objective(const Eigen::MatrixXd& Xc, const Eigen::VectorXd& yc,
                              const Eigen::VectorXd& beta, double lambda,
                              const Eigen::VectorXd& psi) {
  const double n = static_cast<double>(yc.size());
  const double fit = (yc - Xc * beta).squaredNorm() / n;
  const double pen = (psi.array() * beta.array().abs()).sum() * lambda / n;
  return fit + pen;
}
#endif

// Residuals of the unpenalized least-squares fit on the given columns.
inline Eigen::VectorXd ols_residuals(const Eigen::MatrixXd& Xc, const Eigen::VectorXd& yc,
                                     const std::vector<Eigen::Index>& cols) {
  if (cols.empty() || static_cast<Eigen::Index>(cols.size()) >= yc.size()) return yc;
  Eigen::MatrixXd Z(yc.size(), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t k = 0; k < cols.size(); ++k) Z.col(static_cast<Eigen::Index>(k)) = Xc.col(cols[k]);
  const Eigen::VectorXd coef = Z.colPivHouseholderQr().solve(yc);
  return yc - Z * coef;
}

// Loading refresh residuals: unpenalized refit on the active set, so
// leftover shrinkage signal does not inflate the next round's penalty.
inline Eigen::VectorXd refit_residuals(const Eigen::MatrixXd& Xc, const Eigen::VectorXd& yc,
                                       const Eigen::VectorXd& beta) {
  std::vector<Eigen::Index> act;
  for (Eigen::Index j = 0; j < beta.size(); ++j)
    if (beta(j) != 0.0) act.push_back(j);
  if (static_cast<Eigen::Index>(act.size()) >= yc.size()) return yc - Xc * beta;
  return ols_residuals(Xc, yc, act);
}

// Initial residual proxy: least squares on the few columns most correlated
// with the response. Starting from the centered response instead leaves the
// signal inside the first-round loadings, which inflates the thresholds of
// exactly the relevant coordinates and can lock them out of the model.
inline Eigen::VectorXd initial_residuals(const Eigen::MatrixXd& Xc, const Eigen::VectorXd& yc) {
  const Eigen::Index p = Xc.cols();
  const Eigen::Index k_init = std::min<Eigen::Index>({5, p, yc.size() - 2});
  if (k_init < 1) return yc;
  std::vector<std::pair<double, Eigen::Index>> score(static_cast<std::size_t>(p));
  for (Eigen::Index j = 0; j < p; ++j) {
    const double nrm = Xc.col(j).norm();
    score[static_cast<std::size_t>(j)] = {nrm > 0.0 ? std::abs(Xc.col(j).dot(yc)) / nrm : 0.0, j};
  }
  std::sort(score.begin(), score.end(), [](const auto& a, const auto& b) {
    return a.first != b.first ? a.first > b.first : a.second < b.second;
  });
  std::vector<Eigen::Index> cols;
  for (Eigen::Index k = 0; k < k_init; ++k) cols.push_back(score[static_cast<std::size_t>(k)].second);
  return ols_residuals(Xc, yc, cols);
}

// One coordinate-descent pass. Returns the largest coefficient change.
// `which` selects the coordinates to visit (nullptr = all).
inline double cd_sweep(const Eigen::MatrixXd& Xc, Eigen::VectorXd& r, Eigen::VectorXd& beta,
                       const Eigen::VectorXd& colsq, const Eigen::VectorXd& thresh,
                       const std::vector<int>* which) {
  const double n = static_cast<double>(r.size());
  double max_change = 0.0;
  const Eigen::Index p = beta.size();
  const Eigen::Index count = which ? static_cast<Eigen::Index>(which->size()) : p;
  for (Eigen::Index k = 0; k < count; ++k) {
    const Eigen::Index j = which ? (*which)[static_cast<std::size_t>(k)] : k;
    if (colsq(j) <= 0.0) continue;
    const double rho = Xc.col(j).dot(r) / n + colsq(j) * beta(j);
    const double bj = soft_threshold(rho, thresh(j)) / colsq(j);
    const double change = bj - beta(j);
    if (change != 0.0) {
      r -= Xc.col(j) * change;
      beta(j) = bj;
      max_change = std::max(max_change, std::abs(change));
    }
  }
  return max_change;
}

}  // namespace detail

// Gradient-style KKT residuals g_j = (2/n) x_j' (y - a - X b).
inline Eigen::VectorXd kkt_residuals(const LassoFit& fit, const Eigen::MatrixXd& X,
                                     const Eigen::VectorXd& y) {
  if (X.rows() != y.size() || X.cols() != fit.beta.size())
    throw InputError("kkt_residuals: dimension mismatch");
  const Eigen::VectorXd resid =
      y - Eigen::VectorXd::Constant(y.size(), fit.intercept) - X * fit.beta;
  return (2.0 / static_cast<double>(y.size())) * (X.transpose() * resid);
}

// Checks the stationarity conditions at tolerance tol scaled by the response
// variance: active coordinates sit on the penalty boundary, inactive ones
// inside it.
inline bool kkt_ok(const LassoFit& fit, const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                   double tol) {
  const Eigen::VectorXd g = kkt_residuals(fit, X, y);
  const double n = static_cast<double>(y.size());
  const double slack = tol * detail::kkt_scale(y);
  for (Eigen::Index j = 0; j < fit.beta.size(); ++j) {
    const double bound = fit.lambda_used * fit.loadings(j) / n;
    if (fit.beta(j) != 0.0) {
      const double sign = fit.beta(j) > 0.0 ? 1.0 : -1.0;
      if (std::abs(g(j) - sign * bound) > slack) return false;
    } else if (std::abs(g(j)) > bound + slack) {
      return false;
    }
  }
  return true;
}

inline LassoFit fit_lasso(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                          const LassoConfig& config,
                          const Eigen::VectorXd* warm_beta = nullptr) {
  const Eigen::Index n = X.rows();
  const Eigen::Index p = X.cols();
  if (n < 2 || p < 1) throw InputError("fit_lasso: need n >= 2 and p >= 1");
  if (y.size() != n) throw InputError("fit_lasso: X rows and y length disagree");
  if (!X.allFinite() || !y.allFinite()) throw InputError("fit_lasso: non-finite input");
  if (config.tol <= 0.0 || config.max_iter < 1 || config.loading_iters < 1)
    throw InputError("fit_lasso: invalid config");

  const double nn = static_cast<double>(n);
  const Eigen::RowVectorXd xmean =
      config.penalize_intercept ? Eigen::RowVectorXd::Zero(p).eval() : X.colwise().mean().eval();
  const double ymean = config.penalize_intercept ? 0.0 : y.mean();
  const Eigen::MatrixXd Xc = X.rowwise() - xmean;
  const Eigen::VectorXd yc = y.array() - ymean;
  const Eigen::VectorXd colsq = Xc.colwise().squaredNorm() / nn;

  const double lambda =
      config.lambda_override ? *config.lambda_override : default_lambda(n, p, config);
  if (lambda < 0.0) throw InputError("fit_lasso: negative lambda");

  LassoFit fit;
  fit.lambda_used = lambda;
  fit.beta = warm_beta && warm_beta->size() == p ? *warm_beta : Eigen::VectorXd::Zero(p);

  Eigen::VectorXd resid = yc - Xc * fit.beta;
  const int loading_rounds = config.loadings_override ? 1 : config.loading_iters;
  int sweeps = 0;
  const Eigen::MatrixXd Xsq = X.array().square().matrix();  // raw columns feed the loadings

  for (int round = 0; round < loading_rounds; ++round) {
    if (config.loadings_override) {
      if (config.loadings_override->size() != p)
        throw InputError("fit_lasso: loadings_override size mismatch");
      fit.loadings = *config.loadings_override;
    } else {
      // Round 0 proxies the residuals by a small most-correlated-columns
      // refit; later rounds use residuals of the refit on the previous
      // support, following the convention behind this penalty rule. A warm
      // start only seeds the iterate, never the loadings, so the solved
      // problem is a function of (X, y, config) alone.
      const Eigen::VectorXd eps =
          round == 0 ? detail::initial_residuals(Xc, yc) : detail::refit_residuals(Xc, yc, fit.beta);
      fit.loadings = ((Xsq.transpose() * eps.array().square().matrix()) / nn).cwiseSqrt();
    }
    const double floor = 1e-10 * std::max(1.0, fit.loadings.maxCoeff());
    fit.loadings = fit.loadings.cwiseMax(floor);
    if ((fit.loadings.array() <= 0.0).any()) throw InputError("fit_lasso: nonpositive loading");

    const Eigen::VectorXd thresh = lambda * fit.loadings / (2.0 * nn);
    const bool last_round = round == loading_rounds - 1;

#ifndef NDEBUG
    double prev_obj = detail::lasso_objective(Xc, yc, fit.beta, lambda, fit.loadings);
#endif
    fit.converged = false;
    while (sweeps < config.max_iter) {
      // full pass, then iterate the nonzero set until it is stable
      double change = detail::cd_sweep(Xc, resid, fit.beta, colsq, thresh, nullptr);
      ++sweeps;
#ifndef NDEBUG
      const double obj = detail::lasso_objective(Xc, yc, fit.beta, lambda, fit.loadings);
      assert(obj <= prev_obj + 1e-10 * (1.0 + std::abs(prev_obj)));
      prev_obj = obj;
#endif
      std::vector<int> active;
      for (Eigen::Index j = 0; j < p; ++j)
        if (fit.beta(j) != 0.0) active.push_back(static_cast<int>(j));
      while (change > config.tol && sweeps < config.max_iter && !active.empty()) {
        change = detail::cd_sweep(Xc, resid, fit.beta, colsq, thresh, &active);
        ++sweeps;
      }
      // refresh the residual to shed accumulated drift, then test optimality
      resid = yc - Xc * fit.beta;
      const double full_change = detail::cd_sweep(Xc, resid, fit.beta, colsq, thresh, nullptr);
      ++sweeps;
      if (full_change <= config.tol) {
        fit.intercept = config.penalize_intercept ? 0.0 : ymean - xmean * fit.beta;
        if (!last_round || kkt_ok(fit, X, y, config.tol)) {
          fit.converged = true;
          break;
        }
      }
    }
  }

  fit.iterations = sweeps;
  fit.intercept = config.penalize_intercept ? 0.0 : ymean - xmean * fit.beta;
  fit.active_set.clear();
  for (Eigen::Index j = 0; j < p; ++j)
    if (fit.beta(j) != 0.0) fit.active_set.push_back(static_cast<int>(j));
  return fit;
}

}  // namespace hdtm
