#pragma once

// Data-generating processes and the Monte Carlo study harness. Per
// replication: draw a training and a testing sample from
//   Lambda_theta0(Y) = X beta0 + eps,  X ~ N(0, Sigma), eps ~ N(0, sigma2),
// estimate theta, bootstrap-test H0: theta = theta0, and measure the
// out-of-sample MSE of the fitted regression on the true-theta0 scale.
// sigma2 is calibrated so Var(X beta0) / sigma2 equals the configured SNR.

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "hdtm/dataset.hpp"
#include "hdtm/errors.hpp"
#include "hdtm/estimator.hpp"
#include "hdtm/parallel.hpp"
#include "hdtm/rng.hpp"
#include "hdtm/stats.hpp"
#include "hdtm/transform.hpp"

namespace hdtm {

enum class CovKind { Identity, Toeplitz, Equi };

inline const char* cov_kind_name(CovKind k) {
  switch (k) {
    case CovKind::Identity: return "identity";
    case CovKind::Toeplitz: return "toeplitz";
    case CovKind::Equi: return "equi";
  }
  return "?";
}

struct SimConfig {
  TransformationFamily family = box_cox();
  double theta0 = 0.0;
  int n = 200;
  int n_test = 200;
  int p = 20;
  int s = 5;
  double snr = 1.0;
  CovKind cov_kind = CovKind::Identity;
  double c = 0.35;
  int reps = 500;
  int n_boot = 100;     // 0 disables the bootstrap test (estimates only)
  double alpha = 0.05;
  std::uint64_t base_seed = 1;
  LassoConfig lasso;
  SolverConfig solver;
  int threads = 1;

  void validate() const {
    if (n < 2 || n_test < 1 || p < 1) throw InputError("sim config: invalid sizes");
    if (s < 0 || s > p) throw InputError("sim config: sparsity index must satisfy 0 <= s <= p");
    if (!(snr > 0.0)) throw InputError("sim config: snr must be positive");
    if (reps < 1) throw InputError("sim config: need at least one repetition");
    if (!(alpha > 0.0 && alpha < 1.0)) throw InputError("sim config: alpha outside (0, 1)");
    if (std::abs(c) >= 1.0) throw InputError("sim config: |c| must be below 1");
    if (!family.contains(theta0)) throw InputError("sim config: theta0 outside the family domain");
  }

  Eigen::VectorXd beta0() const {
    Eigen::VectorXd b = Eigen::VectorXd::Zero(p);
    for (int j = 0; j < s; ++j) b(j) = 1.0;
    return b;
  }
};

inline Eigen::MatrixXd make_covariance(CovKind kind, int p, double c) {
  if (p < 1) throw InputError("make_covariance: p must be positive");
  if (std::abs(c) >= 1.0) throw InputError("make_covariance: |c| must be below 1");
  Eigen::MatrixXd cov(p, p);
  switch (kind) {
    case CovKind::Identity:
      cov.setIdentity();
      break;
    case CovKind::Toeplitz:
      for (int i = 0; i < p; ++i)
        for (int j = 0; j < p; ++j) cov(i, j) = std::pow(c, std::abs(i - j));
      break;
    case CovKind::Equi:
      for (int i = 0; i < p; ++i)
        for (int j = 0; j < p; ++j) cov(i, j) = std::pow(c, p - std::abs(i - j));
      cov.diagonal().array() += 1.0 - std::pow(c, p);
      break;
  }
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() != Eigen::Success)
    throw MatrixError("make_covariance: matrix is not positive definite");
  return cov;
}

inline double calibrate_sigma(const Eigen::VectorXd& beta, const Eigen::MatrixXd& cov,
                              double snr) {
  if (!(snr > 0.0)) throw InputError("calibrate_sigma: snr must be positive");
  if (beta.size() != cov.rows() || cov.rows() != cov.cols())
    throw InputError("calibrate_sigma: dimension mismatch");
  const double signal = beta.transpose() * cov * beta;
  if (!(signal > 0.0)) throw CalibrationError("calibrate_sigma: zero signal variance");
  return signal / snr;
}

namespace detail {

struct DgpContext {
  Eigen::MatrixXd chol;  // lower factor of Sigma
  Eigen::VectorXd beta;
  double sigma = 0.0;    // noise sd
};

// Draws one sample of `rows` observations, redrawing rows whose latent
// value leaves the range of the transformation. Returns the redraw count.
inline int draw_block(const SimConfig& cfg, const DgpContext& ctx, std::mt19937_64& eng, int rows,
                      Dataset& out) {
  std::normal_distribution<double> g;
  out.X.resize(rows, cfg.p);
  out.y.resize(rows);
  Eigen::VectorXd z(cfg.p);
  int redraws = 0;
  for (int i = 0; i < rows; ++i) {
    for (int attempt = 0;; ++attempt) {
      if (attempt >= 1000) throw DgpError("dgp: could not draw an in-range observation");
      for (int j = 0; j < cfg.p; ++j) z(j) = g(eng);
      const Eigen::VectorXd x = ctx.chol * z;
      const double latent = x.dot(ctx.beta) + ctx.sigma * g(eng);
      try {
        out.y(i) = inverse(cfg.family, cfg.theta0, latent);
      } catch (const RangeError&) {
        ++redraws;
        continue;
      }
      out.X.row(i) = x;
      break;
    }
  }
  return redraws;
}

// OLS refit on the selected support; used for the prediction metric so the
// penalty's shrinkage does not leak into the MSE.
inline Eigen::VectorXd post_ols(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                const std::vector<int>& support) {
  const Eigen::Index n = X.rows();
  Eigen::MatrixXd Z(n, static_cast<Eigen::Index>(support.size()) + 1);
  Z.col(0).setOnes();
  for (std::size_t k = 0; k < support.size(); ++k) Z.col(static_cast<Eigen::Index>(k) + 1) = X.col(support[k]);
  return Z.colPivHouseholderQr().solve(y);
}

inline double predict_mse(const Eigen::MatrixXd& Xt, const Eigen::VectorXd& zt,
                          const std::vector<int>& support, const Eigen::VectorXd& coef) {
  Eigen::VectorXd pred = Eigen::VectorXd::Constant(Xt.rows(), coef(0));
  for (std::size_t k = 0; k < support.size(); ++k)
    pred += Xt.col(support[k]) * coef(static_cast<Eigen::Index>(k) + 1);
  return (zt - pred).squaredNorm() / static_cast<double>(Xt.rows());
}

}  // namespace detail

// One training sample plus one testing sample, deterministic in rep_seed.
inline std::pair<Dataset, Dataset> draw_dataset(const SimConfig& cfg, std::uint64_t rep_seed) {
  cfg.validate();
  detail::DgpContext ctx;
  const Eigen::MatrixXd cov = make_covariance(cfg.cov_kind, cfg.p, cfg.c);
  ctx.chol = Eigen::LLT<Eigen::MatrixXd>(cov).matrixL();
  ctx.beta = cfg.beta0();
  ctx.sigma = std::sqrt(calibrate_sigma(ctx.beta, cov, cfg.snr));

  auto eng = make_engine(rep_seed);
  Dataset train, test;
  int redraws = detail::draw_block(cfg, ctx, eng, cfg.n, train);
  redraws += detail::draw_block(cfg, ctx, eng, cfg.n_test, test);
  if (redraws * 10 > cfg.n + cfg.n_test)
    throw DgpError("dgp: more than 10% of latent draws fell outside the transformation range");
  train.response_name = test.response_name = "y";
  train.column_names.clear();
  for (int j = 0; j < cfg.p; ++j) train.column_names.push_back("x" + std::to_string(j + 1));
  test.column_names = train.column_names;
  return {train, test};
}

struct RepRecord {
  int rep = 0;
  bool failed = false;
  std::string error;
  double theta_hat = 0.0;
  bool accepted = false;
  double mse = 0.0;
  double sigma_boot = 0.0;
};

struct SimulationReport {
  double mean_estimator = 0.0;
  double acceptance_rate = 0.0;  // NaN when n_boot == 0
  double mae = 0.0;
  double rel_mse = 0.0;          // mse / sigma2_true
  double mse = 0.0;
  double sigma2_true = 0.0;
  int failures = 0;
  std::vector<RepRecord> reps;
};

inline SimulationReport run_study(const SimConfig& cfg) {
  cfg.validate();
  const Eigen::MatrixXd cov = make_covariance(cfg.cov_kind, cfg.p, cfg.c);
  const double sigma2 = calibrate_sigma(cfg.beta0(), cov, cfg.snr);

  std::vector<RepRecord> records(static_cast<std::size_t>(cfg.reps));
  parallel_for(static_cast<std::size_t>(cfg.reps), cfg.threads, [&](std::size_t r) {
    RepRecord rec;
    rec.rep = static_cast<int>(r);
    const std::uint64_t rep_seed = derive_seed(cfg.base_seed, r);
    try {
      auto [train, test] = draw_dataset(cfg, rep_seed);
      auto [outcome, nuis] = solve_with_nuisance(train, cfg.family, cfg.lasso, cfg.solver);
      rec.theta_hat = outcome.theta_hat;

      if (cfg.n_boot > 0) {
        auto boot = bootstrap_variance(train, cfg.family, cfg.lasso, cfg.solver, cfg.n_boot,
                                       derive_seed(rep_seed, 0xB001), 1);
        rec.sigma_boot = boot.sigma_boot;
        EstimationResult er;
        er.theta_hat = rec.theta_hat;
        er.sigma_boot = boot.sigma_boot;
        er.alpha = cfg.alpha;
        rec.accepted = !test_null(er, cfg.theta0).reject;
      }

      // out-of-sample MSE on the true-theta0 scale with the support refit
      Eigen::VectorXd zt(test.n());
      for (Eigen::Index i = 0; i < test.n(); ++i)
        zt(i) = eval(cfg.family, cfg.theta0, test.y(i));
      Eigen::VectorXd ztr(train.n());
      for (Eigen::Index i = 0; i < train.n(); ++i)
        ztr(i) = eval(cfg.family, rec.theta_hat, train.y(i));
      const Eigen::VectorXd coef = detail::post_ols(train.X, ztr, nuis.fit_m.active_set);
      rec.mse = detail::predict_mse(test.X, zt, nuis.fit_m.active_set, coef);
    } catch (const Error& e) {
      rec.failed = true;
      rec.error = e.what();
    }
    records[r] = std::move(rec);
  });

  SimulationReport rep;
  rep.sigma2_true = sigma2;
  rep.reps = std::move(records);
  std::vector<double> thetas, mses;
  int accepted = 0;
  for (const auto& r : rep.reps) {
    if (r.failed) {
      ++rep.failures;
      continue;
    }
    thetas.push_back(r.theta_hat);
    mses.push_back(r.mse);
    if (r.accepted) ++accepted;
  }
  if (rep.failures * 5 > cfg.reps)
    throw StudyError("study: more than 20% of repetitions failed");
  const int ok = static_cast<int>(thetas.size());
  rep.mean_estimator = mean(thetas);
  std::vector<double> abs_err(thetas.size());
  for (std::size_t k = 0; k < thetas.size(); ++k) abs_err[k] = std::abs(thetas[k] - cfg.theta0);
  rep.mae = mean(abs_err);
  rep.mse = mean(mses);
  rep.rel_mse = rep.mse / sigma2;
  rep.acceptance_rate = cfg.n_boot > 0 ? static_cast<double>(accepted) / ok
                                       : std::numeric_limits<double>::quiet_NaN();
  return rep;
}

// Raw estimator draws (no bootstrap) for distributional diagnostics.
inline std::vector<double> estimator_histogram(const SimConfig& cfg, int reps) {
  SimConfig c = cfg;
  c.reps = reps;
  c.validate();
  std::vector<std::optional<double>> slots(static_cast<std::size_t>(reps));
  parallel_for(static_cast<std::size_t>(reps), c.threads, [&](std::size_t r) {
    try {
      auto [train, test] = draw_dataset(c, derive_seed(c.base_seed, r));
      slots[r] = solve(train, c.family, c.lasso, c.solver).theta_hat;
    } catch (const Error&) {
      slots[r] = std::nullopt;
    }
  });
  std::vector<double> out;
  int failures = 0;
  for (const auto& s : slots) {
    if (s)
      out.push_back(*s);
    else
      ++failures;
  }
  if (failures * 5 > reps) throw StudyError("histogram: more than 20% of repetitions failed");
  return out;
}

}  // namespace hdtm
