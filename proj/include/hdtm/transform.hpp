#pragma once

// Box-Cox and Yeo-Johnson transformation families with the derivatives the
// profile score needs: d/dtheta, d/dy, the mixed ratio c_theta, the second
// theta-derivative, and the inverse map.
//
// Numerics: every quantity reduces to one of
//   e1(u) = expm1(u)/u
//   g(u)  = ((u-1)e^u + 1)/u^2        (theta-derivative kernel)
//   h(u)  = ((u^2-2u+2)e^u - 2)/u^3   (second-derivative kernel)
// evaluated at u = theta*log(y). e1 is exact through expm1; g and h switch
// to truncated Taylor series for small |u| where the closed forms cancel
// catastrophically. The series region covers the whole band |theta| < 1e-5
// for any representable y, and additionally y near the fixed point, so the
// evaluation is continuous in theta across the removable singularities.

#include <cmath>
#include <limits>
#include <string>

#include "hdtm/errors.hpp"

namespace hdtm {

enum class FamilyKind { BoxCox, YeoJohnson };

struct TransformationFamily {
  FamilyKind kind = FamilyKind::BoxCox;
  double theta_lo = -2.0;
  double theta_hi = 2.0;

  bool contains(double theta) const { return theta >= theta_lo && theta <= theta_hi; }
  const char* name() const { return kind == FamilyKind::BoxCox ? "box-cox" : "yeo-johnson"; }
};

inline TransformationFamily box_cox(double lo = -2.0, double hi = 2.0) {
  if (!(lo < hi)) throw InputError("box_cox: empty theta domain");
  return {FamilyKind::BoxCox, lo, hi};
}

inline TransformationFamily yeo_johnson(double lo = -1.0, double hi = 3.0) {
  if (!(lo < hi)) throw InputError("yeo_johnson: empty theta domain");
  return {FamilyKind::YeoJohnson, lo, hi};
}

namespace detail {

// exp(u) overflows past ~709.78; stay clear of it.
inline constexpr double kExpLimit = 700.0;
inline constexpr double kSeriesCutG = 1e-2;
inline constexpr double kSeriesCutH = 2e-2;

inline void check_exp_range(double u, const char* what) {
  if (u > kExpLimit) throw OverflowError(std::string(what) + ": power overflows double range");
}

inline double e1(double u) {  // expm1(u)/u, continuous at 0
  if (u == 0.0) return 1.0;
  check_exp_range(u, "transform");
  return std::expm1(u) / u;
}

inline double kernel_g(double u) {  // ((u-1)e^u + 1)/u^2 -> 1/2 at 0
  if (std::abs(u) <= kSeriesCutG)
    return 0.5 + u * (1.0 / 3.0 + u * (1.0 / 8.0 + u * (1.0 / 30.0 + u / 144.0)));
  check_exp_range(u, "transform");
  return ((u - 1.0) * std::exp(u) + 1.0) / (u * u);
}

inline double kernel_h(double u) {  // ((u^2-2u+2)e^u - 2)/u^3 -> 1/3 at 0
  if (std::abs(u) <= kSeriesCutH)
    return 1.0 / 3.0 + u * (0.25 + u * (0.1 + u * (1.0 / 36.0 + u / 168.0)));
  check_exp_range(u, "transform");
  return ((u * (u - 2.0) + 2.0) * std::exp(u) - 2.0) / (u * u * u);
}

// Box-Cox pieces expressed through L = log(y).

inline double bc_eval_log(double theta, double logy) {
  return logy * e1(theta * logy);
}

inline double bc_dtheta_log(double theta, double logy) {
  return logy * logy * kernel_g(theta * logy);
}

inline double bc_ddtheta2_log(double theta, double logy) {
  return logy * logy * logy * kernel_h(theta * logy);
}

inline double bc_dy_log(double theta, double logy) {
  const double ex = (theta - 1.0) * logy;
  check_exp_range(ex, "transform");
  return std::exp(ex);  // y^(theta-1)
}

// Inverse of z = (y^theta - 1)/theta; valid iff 1 + theta*z > 0.
inline double bc_inverse_log(double theta, double z, const char* what) {
  if (theta == 0.0) {
    check_exp_range(z, what);
    return std::exp(z);
  }
  const double w = theta * z;
  if (!(w > -1.0)) throw RangeError(std::string(what) + ": value outside the transformation range");
  const double ex = std::log1p(w) / theta;
  check_exp_range(ex, what);
  return std::exp(ex);
}

inline void require_finite(double v, const char* what) {
  if (!std::isfinite(v)) throw InputError(std::string(what) + ": non-finite argument");
}

inline double bc_log_arg(double y) {
  if (!(y > 0.0)) throw DomainError("box-cox: y must be positive");
  return std::log(y);
}

inline void check_theta(const TransformationFamily& f, double theta) {
  require_finite(theta, "transform");
  if (!f.contains(theta))
    throw DomainError(std::string("transform: theta outside [") + std::to_string(f.theta_lo) + ", " +
                      std::to_string(f.theta_hi) + "]");
}

}  // namespace detail

// Lambda_theta(y)
inline double eval(const TransformationFamily& f, double theta, double y) {
  detail::require_finite(y, "transform");
  detail::check_theta(f, theta);
  if (f.kind == FamilyKind::BoxCox) return detail::bc_eval_log(theta, detail::bc_log_arg(y));
  // Yeo-Johnson: shifted Box-Cox on y >= 0, mirrored with exponent 2-theta on y < 0.
  if (y >= 0.0) return detail::bc_eval_log(theta, std::log1p(y));
  return -detail::bc_eval_log(2.0 - theta, std::log1p(-y));
}

// d Lambda_theta(y) / d theta
inline double dtheta(const TransformationFamily& f, double theta, double y) {
  detail::require_finite(y, "transform");
  detail::check_theta(f, theta);
  if (f.kind == FamilyKind::BoxCox) return detail::bc_dtheta_log(theta, detail::bc_log_arg(y));
  if (y >= 0.0) return detail::bc_dtheta_log(theta, std::log1p(y));
  return detail::bc_dtheta_log(2.0 - theta, std::log1p(-y));
}

// d Lambda_theta(y) / d y, strictly positive on the domain
inline double dy(const TransformationFamily& f, double theta, double y) {
  detail::require_finite(y, "transform");
  detail::check_theta(f, theta);
  if (f.kind == FamilyKind::BoxCox) return detail::bc_dy_log(theta, detail::bc_log_arg(y));
  if (y >= 0.0) {
    const double ex = (theta - 1.0) * std::log1p(y);
    detail::check_exp_range(ex, "transform");
    return std::exp(ex);  // (y+1)^(theta-1)
  }
  const double ex = (1.0 - theta) * std::log1p(-y);
  detail::check_exp_range(ex, "transform");
  return std::exp(ex);  // (1-y)^(1-theta)
}

// c_theta = (d/dtheta Lambda'_theta)(y) / Lambda'_theta(y). The ratio
// simplifies to a logarithm, so it is computed directly rather than as a
// quotient of two rounded powers.
inline double c_ratio(const TransformationFamily& f, double theta, double y) {
  detail::require_finite(y, "transform");
  detail::check_theta(f, theta);
  if (f.kind == FamilyKind::BoxCox) return detail::bc_log_arg(y);
  return y >= 0.0 ? std::log1p(y) : -std::log1p(-y);
}

// d^2 Lambda_theta(y) / d theta^2 (diagnostics only)
inline double ddtheta2(const TransformationFamily& f, double theta, double y) {
  detail::require_finite(y, "transform");
  detail::check_theta(f, theta);
  if (f.kind == FamilyKind::BoxCox) return detail::bc_ddtheta2_log(theta, detail::bc_log_arg(y));
  if (y >= 0.0) return detail::bc_ddtheta2_log(theta, std::log1p(y));
  return -detail::bc_ddtheta2_log(2.0 - theta, std::log1p(-y));
}

// y with eval(f, theta, y) == z; throws RangeError when z is not attainable.
inline double inverse(const TransformationFamily& f, double theta, double z) {
  detail::require_finite(z, "transform");
  detail::check_theta(f, theta);
  if (f.kind == FamilyKind::BoxCox) return detail::bc_inverse_log(theta, z, "box-cox inverse");
  // Lambda_theta keeps the sign of y, so the branch is decided by sign(z).
  if (z >= 0.0) {
    const double phi = theta;
    if (phi == 0.0) return std::expm1(z);
    const double w = phi * z;
    if (!(w > -1.0)) throw RangeError("yeo-johnson inverse: value outside the transformation range");
    const double ex = std::log1p(w) / phi;
    detail::check_exp_range(ex, "yeo-johnson inverse");
    return std::expm1(ex);
  }
  const double phi = 2.0 - theta;
  if (phi == 0.0) return -std::expm1(-z);
  const double w = -phi * z;
  if (!(w > -1.0)) throw RangeError("yeo-johnson inverse: value outside the transformation range");
  const double ex = std::log1p(w) / phi;
  detail::check_exp_range(ex, "yeo-johnson inverse");
  return -std::expm1(ex);
}

}  // namespace hdtm
