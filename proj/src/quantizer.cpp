#include "qif/quantizer.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace qif {

QuantizationScheme::QuantizationScheme(std::vector<double> thresholds)
    : thresholds_(std::move(thresholds)) {
  if (thresholds_.empty())
    throw std::invalid_argument("QuantizationScheme: needs at least one threshold");
  for (size_t i = 0; i < thresholds_.size(); ++i) {
    if (!std::isfinite(thresholds_[i]))
      throw std::invalid_argument("QuantizationScheme: thresholds must be finite");
    if (i > 0 && !(thresholds_[i - 1] < thresholds_[i]))
      throw std::invalid_argument("QuantizationScheme: thresholds must be strictly increasing");
  }
}

QuantizationScheme QuantizationScheme::sign() {
  return QuantizationScheme({0.0});
}

QuantizationScheme QuantizationScheme::two_bit() {
  return QuantizationScheme({-1.2437, -0.3823, 0.3823, 1.2437});
}

int quantize(const QuantizationScheme& scheme, double x) {
  if (std::isnan(x)) throw std::invalid_argument("quantize: NaN input");
  // count of thresholds strictly below x gives the left-open/right-closed bin
  const auto& t = scheme.thresholds();
  return static_cast<int>(std::lower_bound(t.begin(), t.end(), x) - t.begin());
}

Interval interval_of(const QuantizationScheme& scheme, int label) {
  const auto& t = scheme.thresholds();
  if (label < 0 || label >= scheme.num_labels())
    throw std::invalid_argument("interval_of: unknown label");
  double lo = label == 0 ? -kInf : t[static_cast<size_t>(label) - 1];
  double hi = label == scheme.num_labels() - 1 ? kInf : t[static_cast<size_t>(label)];
  return Interval(lo, hi);
}

Interval measurement_interval(const Interval& normalized, double yhat,
                              double std_dev) {
  if (!(std_dev > 0.0))
    throw std::invalid_argument("measurement_interval: std_dev must be > 0");
  double lo = normalized.lo == -kInf ? -kInf : normalized.lo * std_dev + yhat;
  double hi = normalized.hi == kInf ? kInf : normalized.hi * std_dev + yhat;
  return Interval(lo, hi);
}

}  // namespace qif
