#include "hdtm/transform.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

namespace {

using hdtm::box_cox;
using hdtm::yeo_johnson;

const hdtm::TransformationFamily kBc = box_cox();
const hdtm::TransformationFamily kYj = yeo_johnson();

// Central finite difference in theta of a transform quantity.
template <typename F>
double fd_theta(F f, double theta, double y, double step = 1e-5) {
  return (f(theta + step, y) - f(theta - step, y)) / (2.0 * step);
}

TEST(Transform, BoxCoxEvalKnownValues) {
  EXPECT_NEAR(hdtm::eval(kBc, 0.0, std::exp(1.0)), 1.0, 1e-14);     // log branch
  EXPECT_NEAR(hdtm::eval(kBc, 1.0, 3.0), 2.0, 1e-14);               // (3-1)/1
  EXPECT_NEAR(hdtm::eval(kBc, 0.5, 4.0), 2.0, 1e-14);               // (2-1)/0.5
  EXPECT_NEAR(hdtm::eval(kBc, -1.0, 2.0), 0.5, 1e-14);              // (1/2-1)/(-1)
}

TEST(Transform, YeoJohnsonEvalKnownValues) {
  EXPECT_NEAR(hdtm::eval(kYj, 2.0, -1.0), -std::log(2.0), 1e-14);   // -log(-y+1) branch
  EXPECT_NEAR(hdtm::eval(kYj, 1.0, 5.0), 5.0, 1e-14);               // ((5+1)^1-1)/1
  EXPECT_NEAR(hdtm::eval(kYj, 0.0, 1.0), std::log(2.0), 1e-14);     // log(y+1)
  EXPECT_NEAR(hdtm::eval(kYj, 1.0, -3.0), -3.0, 1e-14);             // -((4)^1-1)/1
  EXPECT_EQ(hdtm::eval(kYj, 0.7, 0.0), 0.0);
}

TEST(Transform, DthetaKnownValues) {
  EXPECT_NEAR(hdtm::dtheta(kBc, 0.0, std::exp(1.0)), 0.5, 1e-13);   // (log y)^2 / 2
  EXPECT_NEAR(hdtm::dtheta(kBc, 1.0, std::exp(1.0)), 1.0, 1e-13);   // ((th L - 1) y^th + 1)/th^2
  EXPECT_EQ(hdtm::dtheta(kYj, 1.3, 0.0), 0.0);                      // Lambda_theta(0) = 0 for all theta
  EXPECT_EQ(hdtm::dtheta(kYj, -0.4, 0.0), 0.0);
}

TEST(Transform, DyKnownValues) {
  EXPECT_NEAR(hdtm::dy(kBc, 1.0, 7.0), 1.0, 1e-14);
  EXPECT_NEAR(hdtm::dy(kBc, 0.0, 2.0), 0.5, 1e-14);
  EXPECT_NEAR(hdtm::dy(kYj, 0.0, 1.0), 0.5, 1e-14);                 // d/dy log(y+1) at 1
  EXPECT_NEAR(hdtm::dy(kYj, 3.0, -1.0), 0.25, 1e-14);               // (1-y)^(1-theta) = 2^-2
}

TEST(Transform, CRatioKnownValues) {
  EXPECT_NEAR(hdtm::c_ratio(kBc, 0.5, std::exp(1.0)), 1.0, 1e-14);  // equals log y
  EXPECT_EQ(hdtm::c_ratio(kBc, 2.0, 1.0), 0.0);
  EXPECT_EQ(hdtm::c_ratio(kYj, 1.0, 0.0), 0.0);
  EXPECT_NEAR(hdtm::c_ratio(kYj, 0.3, -1.0), -std::log(2.0), 1e-14);
}

TEST(Transform, InverseKnownValues) {
  EXPECT_NEAR(hdtm::inverse(kBc, 0.0, 1.0), std::exp(1.0), 1e-12);
  EXPECT_NEAR(hdtm::inverse(kBc, 1.0, 2.0), 3.0, 1e-12);
  EXPECT_NEAR(hdtm::inverse(kYj, 2.0, -std::log(2.0)), -1.0, 1e-12);
}

TEST(Transform, Ddtheta2KnownValues) {
  EXPECT_EQ(hdtm::ddtheta2(kBc, 1.0, 1.0), 0.0);
  EXPECT_EQ(hdtm::ddtheta2(kYj, 0.8, 0.0), 0.0);
  // finite-difference oracle on dtheta
  const double y = std::exp(1.0);
  const double fd = fd_theta([&](double t, double v) { return hdtm::dtheta(kBc, t, v); }, 1.0, y);
  EXPECT_NEAR(hdtm::ddtheta2(kBc, 1.0, y), fd, 1e-6 * std::abs(fd));
}

TEST(Transform, DomainErrors) {
  EXPECT_THROW(hdtm::eval(kBc, 0.5, 0.0), hdtm::DomainError);
  EXPECT_THROW(hdtm::eval(kBc, 0.5, -1.0), hdtm::DomainError);
  EXPECT_THROW(hdtm::eval(kBc, 5.0, 1.0), hdtm::DomainError);       // theta outside domain
  EXPECT_THROW(hdtm::eval(kBc, 0.5, std::nan("")), hdtm::InputError);
  EXPECT_THROW(hdtm::inverse(kBc, 1.0, -2.0), hdtm::RangeError);    // needs z > -1/theta
  EXPECT_THROW(hdtm::inverse(kBc, -1.0, 2.0), hdtm::RangeError);
  // overflow guard must throw, never return inf
  auto wide = box_cox(-2.0, 2.0);
  EXPECT_THROW(hdtm::eval(wide, 2.0, 1e200), hdtm::OverflowError);
}

TEST(Transform, MonotoneInY) {
  std::mt19937_64 eng(991);
  std::uniform_real_distribution<double> uth;
  for (int rep = 0; rep < 1000; ++rep) {
    {
      const double th = -2.0 + 4.0 * uth(eng);
      double y1 = std::exp(std::uniform_real_distribution<double>(-6.0, 6.0)(eng));
      double y2 = std::exp(std::uniform_real_distribution<double>(-6.0, 6.0)(eng));
      if (y1 == y2) continue;
      if (y1 > y2) std::swap(y1, y2);
      EXPECT_LT(hdtm::eval(kBc, th, y1), hdtm::eval(kBc, th, y2));
    }
    {
      const double th = -1.0 + 4.0 * uth(eng);
      double y1 = std::uniform_real_distribution<double>(-40.0, 40.0)(eng);
      double y2 = std::uniform_real_distribution<double>(-40.0, 40.0)(eng);
      if (y1 == y2) continue;
      if (y1 > y2) std::swap(y1, y2);
      EXPECT_LT(hdtm::eval(kYj, th, y1), hdtm::eval(kYj, th, y2));
    }
  }
}

TEST(Transform, DerivativesMatchFiniteDifferences) {
  std::mt19937_64 eng(1234);
  std::uniform_real_distribution<double> u01;
  int checked = 0;
  for (int rep = 0; rep < 2000; ++rep) {
    const bool bc = rep % 2 == 0;
    const auto& fam = bc ? kBc : kYj;
    const double th = fam.theta_lo + (fam.theta_hi - fam.theta_lo) * u01(eng);
    const double y = bc ? std::exp(-4.0 + 8.0 * u01(eng)) : -20.0 + 40.0 * u01(eng);
    // keep away from the kernel branch points where the FD itself degrades
    const double L = bc ? std::log(y) : (y >= 0 ? std::log1p(y) : std::log1p(-y));
    const double uu = (bc ? th : (y >= 0 ? th : 2.0 - th)) * L;
    if (std::abs(uu) < 0.05 || std::abs(th) < 1e-3 || std::abs(th + 2e-5) > 1.99) continue;
    ++checked;

    const double step = 1e-5 * std::max(1.0, std::abs(th));
    const double want_dt = (hdtm::eval(fam, th + step, y) - hdtm::eval(fam, th - step, y)) / (2 * step);
    const double got_dt = hdtm::dtheta(fam, th, y);
    EXPECT_NEAR(got_dt, want_dt, 1e-6 * std::max(1.0, std::abs(want_dt))) << fam.name() << " " << th << " " << y;

    const double ystep = 1e-5 * std::max(1.0, std::abs(y));
    if (!bc || y - ystep > 0) {
      const double want_dy = (hdtm::eval(fam, th, y + ystep) - hdtm::eval(fam, th, y - ystep)) / (2 * ystep);
      EXPECT_NEAR(hdtm::dy(fam, th, y), want_dy, 1e-6 * std::max(1.0, std::abs(want_dy)));
    }

    // c_ratio * dy == d(dy)/dtheta
    const double want_mixed = (hdtm::dy(fam, th + step, y) - hdtm::dy(fam, th - step, y)) / (2 * step);
    const double got_mixed = hdtm::c_ratio(fam, th, y) * hdtm::dy(fam, th, y);
    EXPECT_NEAR(got_mixed, want_mixed, 1e-6 * std::max(1.0, std::abs(want_mixed)));

    const double want_dd = (hdtm::dtheta(fam, th + step, y) - hdtm::dtheta(fam, th - step, y)) / (2 * step);
    EXPECT_NEAR(hdtm::ddtheta2(fam, th, y), want_dd, 1e-6 * std::max(1.0, std::abs(want_dd)));
  }
  EXPECT_GT(checked, 500);
}

// The kernels switch between closed form and series; both routes must agree
// at the switch point, and crossing theta = 0 (or 2 for Yeo-Johnson) must
// introduce no jump beyond the smooth first-order drift delta * dtheta.
TEST(Transform, BranchContinuity) {
  const double delta = 1e-5;
  for (double y : {0.05, 0.5, 0.9, 1.1, 2.0, 20.0, 400.0}) {
    const double mid = hdtm::eval(kBc, 0.0, y);
    const double slope = hdtm::dtheta(kBc, 0.0, y);
    const double L = std::log(y);
    const double curv = delta * delta * std::abs(L * L * L);  // second-order remainder
    for (double s : {+1.0, -1.0}) {
      const double gap = hdtm::eval(kBc, s * delta, y) - mid - s * delta * slope;
      EXPECT_LE(std::abs(gap), 1e-8 * std::max(1.0, std::abs(mid)) + curv) << y << " " << s;
    }
    // exact two-route agreement at the series cut for the derivative kernels
    if (L != 0.0) {
      const double tcut = hdtm::detail::kSeriesCutG / L;
      if (std::abs(tcut) <= 2.0) {
        const double lo = hdtm::dtheta(kBc, std::nextafter(tcut, 0.0), y);
        const double hi = hdtm::dtheta(kBc, std::nextafter(tcut, 4.0 * tcut), y);
        EXPECT_NEAR(lo, hi, 1e-8 * std::max(1.0, std::abs(lo)));
      }
    }
  }
  // Yeo-Johnson second singular point theta = 2 (y < 0 branch)
  for (double y : {-0.5, -3.0, -15.0}) {
    const double mid = hdtm::eval(kYj, 2.0, y);
    const double slope = hdtm::dtheta(kYj, 2.0, y);
    const double dmid = hdtm::dtheta(kYj, 2.0, y);
    const double dslope = hdtm::ddtheta2(kYj, 2.0, y);
    const double L = std::log1p(-y);
    const double curv = delta * delta * std::max(1.0, L * L * L * L);
    for (double s : {+1.0, -1.0}) {
      const double gap = hdtm::eval(kYj, 2.0 + s * delta, y) - mid - s * delta * slope;
      EXPECT_LE(std::abs(gap), 1e-8 * std::max(1.0, std::abs(mid)) + curv) << y << " " << s;
      const double dgap = hdtm::dtheta(kYj, 2.0 + s * delta, y) - dmid - s * delta * dslope;
      EXPECT_LE(std::abs(dgap), 1e-8 * std::max(1.0, std::abs(dmid)) + curv) << y << " " << s;
    }
  }
}

TEST(Transform, InverseRoundTrip) {
  std::mt19937_64 eng(777);
  std::uniform_real_distribution<double> u01;
  for (int rep = 0; rep < 2000; ++rep) {
    {
      const double th = -2.0 + 4.0 * u01(eng);
      const double y = std::exp(-5.0 + 10.0 * u01(eng));
      const double z = hdtm::eval(kBc, th, y);
      const double back = hdtm::inverse(kBc, th, z);
      EXPECT_NEAR(back, y, 1e-10 * std::max(1.0, std::abs(y)));
      EXPECT_NEAR(hdtm::eval(kBc, th, back), z, 1e-10 * (1.0 + std::abs(z)));
    }
    {
      const double th = -1.0 + 4.0 * u01(eng);
      const double y = -30.0 + 60.0 * u01(eng);
      const double z = hdtm::eval(kYj, th, y);
      const double back = hdtm::inverse(kYj, th, z);
      EXPECT_NEAR(back, y, 1e-10 * std::max(1.0, std::abs(y)));
    }
  }
}

TEST(Transform, YeoJohnsonSign) {
  std::mt19937_64 eng(31);
  std::uniform_real_distribution<double> u01;
  for (int rep = 0; rep < 1000; ++rep) {
    const double th = -1.0 + 4.0 * u01(eng);
    const double y = -25.0 + 50.0 * u01(eng);
    const double v = hdtm::eval(kYj, th, y);
    EXPECT_EQ(v >= 0.0, y >= 0.0) << th << " " << y;
  }
}

}  // namespace
