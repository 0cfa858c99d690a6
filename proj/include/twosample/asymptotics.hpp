#pragma once

#include <cmath>

#include "error.hpp"

namespace twosample {

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

inline double normal_pdf(double x) {
  constexpr double inv_sqrt_2pi = 0.39894228040143267794;
  return inv_sqrt_2pi * std::exp(-0.5 * x * x);
}

// Acklam's rational approximation, then one Newton step on normal_cdf.
inline double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) fail(errc::domain_error, "quantile needs p in (0,1)");
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
                                 1.383577518672690e+02,  -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
                                 6.680131188771972e+01,  -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
                                 -2.549732539343734e+00, 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
                                 3.754408661907416e+00};
  constexpr double lo = 0.02425, hi = 1.0 - lo;
  double x;
  if (p < lo) {
    double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= hi) {
    double q = p - 0.5, r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    double q = std::sqrt(-2.0 * std::log1p(-p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  double dens = normal_pdf(x);
  if (dens > 0.0) x -= (normal_cdf(x) - p) / dens;
  return x;
}

inline void require_sigma(double sigma1) {
  if (!(sigma1 > 0.0) || !std::isfinite(sigma1)) fail(errc::degenerate_gradient, "sigma1 must be positive");
}

inline double power_one_sided(double theta, double sigma1, double alpha) {
  require_sigma(sigma1);
  return normal_cdf(theta / sigma1 - normal_quantile(1.0 - alpha));
}

inline double power_two_sided(double theta, double sigma1, double alpha) {
  require_sigma(sigma1);
  double u = normal_quantile(1.0 - alpha / 2.0);
  return normal_cdf(theta / sigma1 - u) + normal_cdf(-theta / sigma1 - u);
}

inline double d_opt(double norm1, double norm2) {
  if (!(norm1 > 0.0 && norm2 > 0.0)) fail(errc::degenerate_gradient, "both gradient norms must be positive");
  return norm2 / (norm1 + norm2);
}

// Envelope power along the curve with tangent (g1, g2); arguments are squared norms.
inline double np_benchmark_power(double t, double g1_norm2, double g2_norm2, double d, double alpha) {
  double s2 = (1.0 - d) * g1_norm2 + d * g2_norm2;
  if (!(s2 > 0.0)) fail(errc::degenerate_tangent, "tangent has zero norm");
  return normal_cdf(t * std::sqrt(s2) - normal_quantile(1.0 - alpha));
}

inline double gauss_shift_hellinger(double h_distance) {
  if (!(h_distance >= 0.0)) fail(errc::domain_error, "distance must be non-negative");
  return std::sqrt(-std::expm1(-h_distance * h_distance / 8.0));
}

}  // namespace twosample
