#pragma once

#include <vector>

#include "qif/scalar_normal.hpp"

namespace qif {

// K-level threshold quantizer over the normalized innovation. Thresholds are
// the K-1 finite cut points; the outer bins extend to +-inf. Bins are
// left-open / right-closed: bin i covers (t[i-1], t[i]].
class QuantizationScheme {
 public:
  explicit QuantizationScheme(std::vector<double> thresholds);

  int num_labels() const { return static_cast<int>(thresholds_.size()) + 1; }
  const std::vector<double>& thresholds() const { return thresholds_; }

  static QuantizationScheme sign();     // single threshold at 0
  static QuantizationScheme two_bit();  // symmetric 5-bin scheme with a
                                        // dead zone (-0.3823, 0.3823)

 private:
  std::vector<double> thresholds_;
};

// Label index (0-based) of a normalized innovation; total over the reals.
int quantize(const QuantizationScheme& scheme, double normalized_innovation);

// Normalized-unit interval implied by a label.
Interval interval_of(const QuantizationScheme& scheme, int label);

// Maps a normalized interval to measurement space: endpoints scaled by the
// innovation deviation and shifted by the predicted measurement.
Interval measurement_interval(const Interval& normalized, double yhat,
                              double std_dev);

}  // namespace qif
