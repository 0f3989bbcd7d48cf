#include "qif/scalar_normal.hpp"

#include <algorithm>
#include <cmath>

namespace qif {

namespace {

constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;

// Acklam's rational approximation to the inverse normal CDF,
// relative error below 1.15e-9 before refinement.
double phi_inv_estimate(double p) {
  static const double a[6] = {-3.969683028665376e+01, 2.209460984245205e+02,
                              -2.759285104469687e+02, 1.383577518672690e+02,
                              -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[5] = {-5.447609879822406e+01, 1.615858368580409e+02,
                              -1.556989798598866e+02, 6.680131188771972e+01,
                              -1.328068155288572e+01};
  static const double c[6] = {-7.784894002430293e-03, -3.223964580411365e-01,
                              -2.400758277161838e+00, -2.549732539343734e+00,
                              4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[4] = {7.784695709041462e-03, 3.224671290700398e-01,
                              2.445134137142996e+00, 3.754408661907416e+00};
  constexpr double p_low = 0.02425;

  if (p < p_low) {
    double q = std::sqrt(-2.0 * std::log(p));
    return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q +
            c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  if (p > 1.0 - p_low) {
    double q = std::sqrt(-2.0 * std::log(1.0 - p));
    return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q +
             c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  double q = p - 0.5;
  double r = q * q;
  return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r +
          a[5]) *
         q /
         (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
}

// Shifted-exponential rejection for a lower tail a >= 6 (b may be finite).
double sample_tail_rejection(double a, double b, RngStream& rng) {
  const double alpha = 0.5 * (a + std::sqrt(a * a + 4.0));
  for (int iter = 0; iter < 1'000'000; ++iter) {
    double z = a - std::log(rng.next_open01()) / alpha;
    if (z >= b) continue;
    double e = z - alpha;
    if (rng.next_open01() <= std::exp(-0.5 * e * e)) return z;
  }
  throw std::runtime_error("truncated normal: tail rejection budget exhausted");
}

}  // namespace

double sample_std_truncated(double a, double b, double u) {
  if (a >= 0.0) {
    // work with -Z on (-b, -a); keeps monotonicity in u
    double pa = phi_cdf(-a);
    double pb = phi_cdf(-b);
    double width = pa - pb;
    if (!(width > 0.0))
      throw unsampleable_tail("truncated normal: interval probability underflows");
    double p = pa - u * width;
    if (p <= 0.0) p = std::numeric_limits<double>::denorm_min();
    return -phi_inv(p);
  }
  double pa = phi_cdf(a);
  double pb = phi_cdf(b);
  double width = pb - pa;
  if (!(width > 0.0))
    throw unsampleable_tail("truncated normal: interval probability underflows");
  double p = pa + u * width;
  if (p >= 1.0) p = 1.0 - std::numeric_limits<double>::epsilon() / 2;
  return phi_inv(p);
}

double phi_pdf(double x) {
  return kInvSqrt2Pi * std::exp(-0.5 * x * x);
}

double phi_cdf(double x) {
  if (std::isnan(x)) throw std::invalid_argument("phi_cdf: NaN argument");
  return 0.5 * std::erfc(-x * kInvSqrt2);
}

double phi_inv(double p) {
  if (!(p > 0.0 && p < 1.0))
    throw std::invalid_argument("phi_inv: p must lie in (0, 1)");
  double x = phi_inv_estimate(p);
  // two Halley refinements against the high-precision CDF
  for (int pass = 0; pass < 2; ++pass) {
    double pdf = phi_pdf(x);
    if (!(pdf > 1e-290)) break;
    double r = (phi_cdf(x) - p) / pdf;
    x -= r / (1.0 + 0.5 * x * r);
  }
  return x;
}

double std_interval_prob(double a, double b) {
  if (!(a < b)) throw std::invalid_argument("std_interval_prob: requires a < b");
  if (a == -kInf && b == kInf) return 1.0;
  if (a >= 0.0)
    return 0.5 * (std::erfc(a * kInvSqrt2) - std::erfc(b * kInvSqrt2));
  if (b <= 0.0)
    return 0.5 * (std::erfc(-b * kInvSqrt2) - std::erfc(-a * kInvSqrt2));
  return 1.0 - 0.5 * (std::erfc(b * kInvSqrt2) + std::erfc(-a * kInvSqrt2));
}

double interval_prob(const Interval& iv, double mu, double sigma) {
  if (!(sigma > 0.0)) throw std::invalid_argument("interval_prob: sigma must be > 0");
  double a = iv.lo == -kInf ? -kInf : (iv.lo - mu) / sigma;
  double b = iv.hi == kInf ? kInf : (iv.hi - mu) / sigma;
  return std_interval_prob(a, b);
}

double sample_truncated_normal(const Interval& iv, double mu, double sigma,
                               double u) {
  if (!(sigma > 0.0))
    throw std::invalid_argument("sample_truncated_normal: sigma must be > 0");
  if (!(u > 0.0 && u < 1.0))
    throw std::invalid_argument("sample_truncated_normal: u must lie in (0, 1)");
  double a = iv.lo == -kInf ? -kInf : (iv.lo - mu) / sigma;
  double b = iv.hi == kInf ? kInf : (iv.hi - mu) / sigma;
  double r = mu + sigma * sample_std_truncated(a, b, u);
  if (r <= iv.lo) r = std::nextafter(iv.lo, kInf);
  if (r >= iv.hi) r = std::nextafter(iv.hi, -kInf);
  return r;
}

double sample_truncated_normal(const Interval& iv, double mu, double sigma,
                               RngStream& rng) {
  if (!(sigma > 0.0))
    throw std::invalid_argument("sample_truncated_normal: sigma must be > 0");
  double a = iv.lo == -kInf ? -kInf : (iv.lo - mu) / sigma;
  double b = iv.hi == kInf ? kInf : (iv.hi - mu) / sigma;
  double z;
  if (a >= 6.0) {
    z = sample_tail_rejection(a, b, rng);
  } else if (b <= -6.0) {
    z = -sample_tail_rejection(-b, -a, rng);
  } else {
    z = sample_std_truncated(a, b, rng.next_open01());
  }
  double r = mu + sigma * z;
  if (r <= iv.lo) r = std::nextafter(iv.lo, kInf);
  if (r >= iv.hi) r = std::nextafter(iv.hi, -kInf);
  return r;
}

double truncated_std_mean(const Interval& iv) {
  double p = std_interval_prob(iv.lo, iv.hi);
  if (!(p > 0.0))
    throw std::invalid_argument("truncated_std_mean: zero-probability interval");
  double na = iv.lo == -kInf ? 0.0 : phi_pdf(iv.lo);
  double nb = iv.hi == kInf ? 0.0 : phi_pdf(iv.hi);
  return (na - nb) / p;
}

double draw_std_normal(RngStream& rng) { return phi_inv(rng.next_open01()); }

}  // namespace qif
