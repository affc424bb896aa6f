#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

namespace vafm {

inline constexpr double kLogTwoPi = 1.8378770664093454835606594728112;
inline constexpr double kInvSqrtTwoPi = 0.39894228040143267793994605993438;

inline double std_normal_pdf(double x) {
  return kInvSqrtTwoPi * std::exp(-0.5 * x * x);
}

inline double log_std_normal_pdf(double x) {
  return -0.5 * (x * x + kLogTwoPi);
}

// Standard normal CDF. Saturates at exactly 0/1 in the far tails.
inline double std_normal_cdf(double x) {
  return 0.5 * std::erfc(-x * M_SQRT1_2);
}

// log Phi(x), finite for all finite x. Three branches: log1p near the upper
// tail, direct erfc in the body, and a Mills-ratio expansion below -30 where
// erfc underflows.
inline double log_std_normal_cdf(double x) {
  if (x > -1.0) return std::log1p(-0.5 * std::erfc(x * M_SQRT1_2));
  if (x >= -30.0) return std::log(0.5 * std::erfc(-x * M_SQRT1_2));
  const double t = -x;
  const double t2 = t * t;
  // -1/t^2 + 3/t^4 - 15/t^6 + 105/t^8
  const double series =
      -(1.0 / t2) * (1.0 - (3.0 / t2) * (1.0 - (5.0 / t2) * (1.0 - 7.0 / t2)));
  return -0.5 * t2 - 0.5 * kLogTwoPi - std::log(t) + std::log1p(series);
}

namespace detail {

// Wichura's PPND16 rational approximations, |relative error| < 1e-15.
inline double normal_quantile_impl(double p) {
  static constexpr double a[8] = {
      3.3871328727963666080e0,  1.3314166789178437745e2,
      1.9715909503065514427e3,  1.3731693765509461125e4,
      4.5921953931549871457e4,  6.7265770927008700853e4,
      3.3430575583588128105e4,  2.5090809287301226727e3};
  static constexpr double b[8] = {
      1.0,                      4.2313330701600911252e1,
      6.8718700749205790830e2,  5.3941960214247511077e3,
      2.1213794301586595867e4,  3.9307895800092710610e4,
      2.8729085735721942674e4,  5.2264952788528545610e3};
  static constexpr double c[8] = {
      1.42343711074968357734e0,  4.63033784615654529590e0,
      5.76949722146069140550e0,  3.64784832476320460504e0,
      1.27045825245236838258e0,  2.41780725177450611770e-1,
      2.27238449892691845833e-2, 7.74545014278341407640e-4};
  static constexpr double d[8] = {
      1.0,                       2.05319162663775882187e0,
      1.67638483018380384940e0,  6.89767334985100004550e-1,
      1.48103976427480074590e-1, 1.51986665636164571966e-2,
      5.47593808499534494600e-4, 1.05075007164441684324e-9};
  static constexpr double e[8] = {
      6.65790464350110377720e0,  5.46378491116411436990e0,
      1.78482653991729133580e0,  2.96560571828504891230e-1,
      2.65321895265761230930e-2, 1.24266094738807843860e-3,
      2.71155556874348757815e-5, 2.01033439929228813265e-7};
  static constexpr double f[8] = {
      1.0,                       5.99832206555887937690e-1,
      1.36929880922735805310e-1, 1.48753612908506148525e-2,
      7.86869131145613259100e-4, 1.84631831751005468180e-5,
      1.42151175831644588870e-7, 2.04426310338993978564e-15};

  auto ratpoly = [](const double (&num)[8], const double (&den)[8], double r) {
    double n = num[7], m = den[7];
    for (int i = 6; i >= 0; --i) {
      n = n * r + num[i];
      m = m * r + den[i];
    }
    return n / m;
  };

  const double q = p - 0.5;
  if (std::fabs(q) <= 0.425) {
    const double r = 0.180625 - q * q;
    return q * ratpoly(a, b, r);
  }
  double r = (q < 0.0) ? p : 1.0 - p;
  r = std::sqrt(-std::log(r));
  double x;
  if (r <= 5.0) {
    x = ratpoly(c, d, r - 1.6);
  } else {
    x = ratpoly(e, f, r - 5.0);
  }
  return (q < 0.0) ? -x : x;
}

}  // namespace detail

// Inverse standard normal CDF for p in (0, 1).
inline double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0))
    throw std::invalid_argument("normal_quantile: p must lie in (0,1)");
  return detail::normal_quantile_impl(p);
}

// ln sum_i exp(v_i), max-shifted. Exact for a single entry; -inf entries are
// legal and an all-(-inf) input yields -inf.
inline double log_sum_exp(std::span<const double> values) {
  if (values.empty())
    throw std::invalid_argument("log_sum_exp: empty input");
  const double m = *std::max_element(values.begin(), values.end());
  if (!(m > -std::numeric_limits<double>::infinity())) return m;
  if (values.size() == 1) return m;
  double s = 0.0;
  for (double v : values) s += std::exp(v - m);
  return m + std::log(s);
}

// ln of the arithmetic mean of exp(v_i). When all entries are bit-identical
// the sum over N terms equals N exactly, so the result is exactly that entry
// regardless of N.
inline double log_mean_exp(std::span<const double> values) {
  if (values.empty())
    throw std::invalid_argument("log_mean_exp: empty input");
  const double m = *std::max_element(values.begin(), values.end());
  if (!(m > -std::numeric_limits<double>::infinity())) return m;
  double s = 0.0;
  for (double v : values) s += std::exp(v - m);
  return m + std::log(s / static_cast<double>(values.size()));
}

inline double log_sum_exp(const std::vector<double> &values) {
  return log_sum_exp(std::span<const double>(values));
}

inline double log_mean_exp(const std::vector<double> &values) {
  return log_mean_exp(std::span<const double>(values));
}

}  // namespace vafm
