#pragma once

#include <Eigen/Dense>
#include <vector>

#include "qif/quantizer.hpp"

namespace qif {

enum class Phase { predicted, filtered };

struct KalmanState {
  Eigen::VectorXd xhat;
  Eigen::MatrixXd P;
  Phase phase = Phase::predicted;
};

// x <- A x, P <- A P A^T + W.
KalmanState kf_time_update(const KalmanState& state, const Eigen::MatrixXd& A,
                           const Eigen::MatrixXd& W);

// Scalar-measurement update with gain P H^T / (H P H^T + sigma_v2).
KalmanState kf_measurement_update(const KalmanState& state,
                                  const Eigen::RowVectorXd& H, double sigma_v2,
                                  double y);

// P(n/n) with the update term scaled by lambda in [0, 1].
Eigen::MatrixXd riccati_measurement_update(const Eigen::MatrixXd& P,
                                           const Eigen::RowVectorXd& H,
                                           double sigma_v2, double lambda);

// One full recursion step: the lambda-scaled measurement update followed by
// the time update. lambda = 1 is the classical Riccati, lambda = 0 the
// open-loop Lyapunov step.
Eigen::MatrixXd modified_riccati_step(const Eigen::MatrixXd& P,
                                      const Eigen::MatrixXd& A,
                                      const Eigen::MatrixXd& W,
                                      const Eigen::RowVectorXd& H,
                                      double sigma_v2, double lambda);

// Per-label gains for the quantized linear filter. gains[i] is the
// conditional mean of a standard normal given bin i; lambda is the resulting
// variance-reduction factor sum_i gains[i]^2 P(bin i).
struct LambdaScheme {
  double lambda = 0.0;
  std::vector<double> gains;
};

LambdaScheme lambda_scheme_of(const QuantizationScheme& scheme);

struct QuantizedLinearStep {
  KalmanState filtered;
  KalmanState predicted_next;
};

// Measurement update driven only by the bin label, then the time update.
// With the sign scheme this is the 1-bit innovation filter; with a multi-level
// scheme, its K-level generalization. The covariance recursion is the
// modified Riccati and does not depend on the label.
QuantizedLinearStep quantized_linear_filter_step(
    const KalmanState& predicted, const Eigen::MatrixXd& A,
    const Eigen::MatrixXd& W, const Eigen::RowVectorXd& H, double sigma_v2,
    const LambdaScheme& gains, int label);

}  // namespace qif
