#pragma once

#include <limits>
#include <stdexcept>

#include "qif/rng.hpp"

namespace qif {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

// Open interval on the extended real line; either endpoint may be infinite.
struct Interval {
  double lo;
  double hi;

  Interval(double lo_, double hi_) : lo(lo_), hi(hi_) {
    if (!(lo < hi)) throw std::invalid_argument("Interval: requires lo < hi");
  }
  static Interval whole() { return Interval(-kInf, kInf); }

  bool contains(double x) const { return lo < x && x < hi; }
  bool bounded() const { return lo > -kInf && hi < kInf; }
};

// Standard normal density.
double phi_pdf(double x);

// Standard normal CDF. Accepts +-inf; rejects NaN.
double phi_cdf(double x);

// Inverse standard normal CDF on (0, 1), refined to full double precision.
double phi_inv(double p);

// P(a < Z < b) for standard Z, stable when both endpoints sit in one tail.
double std_interval_prob(double a, double b);

// P(X in iv) for X ~ N(mu, sigma^2).
double interval_prob(const Interval& iv, double mu, double sigma);

// Raised when the interval probability underflows and the inverse-CDF
// transform cannot resolve the draw; callers fall back to rejection.
struct unsampleable_tail : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Inverse-CDF draw from the standard normal restricted to (a, b). Strictly
// increasing in u; tail intervals are reflected onto the side where the CDF
// values stay representable.
double sample_std_truncated(double a, double b, double u);

// Inverse-CDF draw from N(mu, sigma^2) restricted to iv. Strictly increasing
// in u and strictly inside the interval.
double sample_truncated_normal(const Interval& iv, double mu, double sigma,
                               double u);

// Drawing wrapper: inverse-CDF transform in the bulk; once both endpoints are
// beyond 6 sigma on the same side, switches to a shifted-exponential rejection
// sampler which stays exact arbitrarily deep in the tail.
double sample_truncated_normal(const Interval& iv, double mu, double sigma,
                               RngStream& rng);

// E[Z | Z in iv] for standard normal Z.
double truncated_std_mean(const Interval& iv);

// Standard normal draw (inverse-CDF transform of one uniform).
double draw_std_normal(RngStream& rng);

}  // namespace qif
