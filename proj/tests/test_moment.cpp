#include "hdtm/moment.hpp"

#include <gtest/gtest.h>

#include <cmath>

#include "test_util.hpp"

namespace {

const hdtm::TransformationFamily kBc = hdtm::box_cox();
const hdtm::TransformationFamily kYj = hdtm::yeo_johnson();

TEST(Moment, PsiHandExamples) {
  // eps = 2, eps_dot = 1, h2 = 1, h4 = 0, c = 0 -> psi = -2
  // realized with the Yeo-Johnson identity-like point y = 0, where
  // Lambda = 0, Lambda_dot = 0, c = 0.
  auto p1 = hdtm::psi_single(0.0, 1.0, kYj, -2.0, 1.0, -1.0, 0.0);
  EXPECT_EQ(p1.part_I, 0.0);
  EXPECT_EQ(p1.part_II, 2.0);
  EXPECT_EQ(p1.part_III, 0.0);
  EXPECT_EQ(p1.part_c, 0.0);
  EXPECT_EQ(p1.psi, -2.0);

  // eps = 0, eps_dot = 0, h2 = 1, h4 = 2 -> psi = -1
  auto p2 = hdtm::psi_single(0.0, 1.0, kYj, 0.0, 1.0, 0.0, 2.0);
  EXPECT_EQ(p2.psi, -1.0);

  // BoxCox, theta = 0, y = e, h = (0, 1, 0, 0): Lambda = 1, Lambda_dot = 0.5,
  // c = 1 -> psi = -0 - 0.5 + 0 + 1 = 0.5
  auto p3 = hdtm::psi_single(std::exp(1.0), 0.0, kBc, 0.0, 1.0, 0.0, 0.0);
  EXPECT_NEAR(p3.psi, 0.5, 1e-13);

  EXPECT_THROW(hdtm::psi_single(1.0, 0.5, kBc, 0.0, 0.0, 0.0, 0.0), hdtm::VarianceError);
  EXPECT_THROW(hdtm::psi_single(1.0, 0.5, kBc, 0.0, -1.0, 0.0, 0.0), hdtm::VarianceError);
}

TEST(Moment, CompositionIsExact) {
  auto parts = hdtm::psi_single(2.5, 0.3, kBc, 0.4, 1.7, -0.2, 0.9);
  EXPECT_EQ(parts.psi, -parts.part_I - parts.part_II + parts.part_III + parts.part_c);
}

TEST(Moment, EmpiricalMomentEdges) {
  auto dgp = testutil::make_lognormal(2, 1, 1, 1.0, 5);
  auto nu = testutil::oracle_nuisance(dgp, kBc, 0.0);
  auto em = hdtm::empirical_moment(dgp.data, kBc, 0.0, nu);
  EXPECT_EQ(em.per_obs.size(), 2);
  // mean of a two-point sample equals the average of the two psi values
  EXPECT_NEAR(em.mean_psi, 0.5 * (em.per_obs(0) + em.per_obs(1)), 1e-15);

  hdtm::Dataset empty;
  empty.y.resize(0);
  empty.X.resize(0, 1);
  EXPECT_THROW(hdtm::empirical_moment(empty, kBc, 0.0, nu), hdtm::InputError);

  EXPECT_THROW(hdtm::empirical_moment(dgp.data, kBc, 0.5, nu), hdtm::InputError);
}

TEST(Moment, ZeroMeanAtTruthWithOracleNuisance) {
  int pass = 0;
  const int seeds = 20;
  for (int s = 0; s < seeds; ++s) {
    auto dgp = testutil::make_lognormal(5000, 10, 5, 1.0, 9000 + s);
    auto nu = testutil::oracle_nuisance(dgp, kBc, 0.0);
    auto em = hdtm::empirical_moment(dgp.data, kBc, 0.0, nu);
    const double sd = std::sqrt((em.per_obs.array() - em.mean_psi).square().sum() /
                                (em.per_obs.size() - 1.0));
    if (std::abs(em.mean_psi) <= 3.0 * sd / std::sqrt(5000.0)) ++pass;
  }
  EXPECT_GE(pass, 19);  // >= 95% of seeds
}

TEST(Moment, ScoreCrossesZeroOnceOnDefaultGridGoldenSeed) {
  auto dgp = testutil::make_lognormal(200, 20, 5, 1.0, 1717);
  std::vector<double> thetas;
  for (int k = 0; k <= 40; ++k) thetas.push_back(-2.0 + 0.1 * k);
  auto grid = hdtm::fit_grid(dgp.data, kBc, thetas, {});
  int crossings = 0;
  double prev = 0.0;
  bool have_prev = false;
  for (std::size_t k = 0; k < grid.size(); ++k) {
    ASSERT_TRUE(grid[k].fit.has_value()) << grid[k].error;
    const double m = hdtm::empirical_moment(dgp.data, kBc, thetas[k], *grid[k].fit).mean_psi;
    if (have_prev && ((prev > 0 && m < 0) || (prev < 0 && m > 0))) ++crossings;
    prev = m;
    have_prev = true;
  }
  EXPECT_EQ(crossings, 1);
}

TEST(Moment, ProbeIsZeroForIdenticalNuisance) {
  auto dgp = testutil::make_lognormal(200, 5, 2, 1.0, 88);
  auto nu = testutil::oracle_nuisance(dgp, kBc, 0.0);
  auto probe = hdtm::orthogonality_probe(dgp.data, kBc, 0.0, nu, nu, hdtm::default_r_grid());
  EXPECT_NEAR(probe.linear_coef, 0.0, 1e-12);
  EXPECT_NEAR(probe.quad_coef, 0.0, 1e-12);
}

// Orthogonality at population scale: perturbing the oracle nuisance inside
// the realization set moves the moment only at second order in r, while the
// same probe with part III removed picks up a first-order term. Perturbation
// sizes are chosen so that three Monte Carlo standard errors of the linear
// coefficient stay under the 0.05 * max(|b|, 0.01) bound at n = 50000.
TEST(Moment, OrthogonalityProbeAndNegativeControl) {
  auto dgp = testutil::make_lognormal(50000, 10, 5, 1.0, 4242);
  auto nu0 = testutil::oracle_nuisance(dgp, kBc, 0.0);

  Eigen::VectorXd h1 = nu0.m_hat + (dgp.data.X.col(0) * 0.015).eval();
  Eigen::VectorXd h3 = nu0.mdot_hat + (dgp.data.X.col(2) * 0.02).eval();
  const double h2 = nu0.sigma2 + 0.02;
  const double h4 = nu0.sigma2dot + 0.08;
  auto nup = hdtm::NuisanceAtTheta::from_values(dgp.data, kBc, 0.0, h1, h2, h3, h4);

  auto probe = hdtm::orthogonality_probe(dgp.data, kBc, 0.0, nu0, nup, hdtm::default_r_grid());
  const double bound = 0.05 * std::max(std::abs(probe.quad_coef), 0.01);
  EXPECT_LE(std::abs(probe.linear_coef), bound)
      << "a=" << probe.linear_coef << " b=" << probe.quad_coef;

  auto control =
      hdtm::orthogonality_probe(dgp.data, kBc, 0.0, nu0, nup, hdtm::default_r_grid(), true);
  const double cbound = 0.05 * std::max(std::abs(control.quad_coef), 0.01);
  EXPECT_GT(std::abs(control.linear_coef), cbound)
      << "a=" << control.linear_coef << " b=" << control.quad_coef;
}

}  // namespace
