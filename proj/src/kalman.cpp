#include "qif/kalman.hpp"

#include <cmath>
#include <stdexcept>

#include "qif/mvn.hpp"

namespace qif {

namespace {
void require_phase(const KalmanState& s, Phase want, const char* op) {
  if (s.phase != want)
    throw std::invalid_argument(std::string(op) + ": state is in the wrong phase");
}

double innovation_variance(const Eigen::MatrixXd& P, const Eigen::RowVectorXd& H,
                           double sigma_v2) {
  double r = (H * P * H.transpose())(0, 0) + sigma_v2;
  if (!(r > 0.0))
    throw std::runtime_error("kalman: H P H^T + sigma_v2 must be positive");
  return r;
}
}  // namespace

KalmanState kf_time_update(const KalmanState& state, const Eigen::MatrixXd& A,
                           const Eigen::MatrixXd& W) {
  require_phase(state, Phase::filtered, "kf_time_update");
  if (A.rows() != state.xhat.size() || A.cols() != state.xhat.size() ||
      W.rows() != A.rows() || W.cols() != A.cols())
    throw std::invalid_argument("kf_time_update: dimension mismatch");
  KalmanState out;
  out.xhat = A * state.xhat;
  out.P = symmetrized(A * state.P * A.transpose() + W);
  out.phase = Phase::predicted;
  return out;
}

KalmanState kf_measurement_update(const KalmanState& state,
                                  const Eigen::RowVectorXd& H, double sigma_v2,
                                  double y) {
  require_phase(state, Phase::predicted, "kf_measurement_update");
  if (H.cols() != state.xhat.size())
    throw std::invalid_argument("kf_measurement_update: dimension mismatch");
  double r = innovation_variance(state.P, H, sigma_v2);
  Eigen::VectorXd gain = state.P * H.transpose() / r;
  KalmanState out;
  out.xhat = state.xhat + gain * (y - H.dot(state.xhat));
  out.P = symmetrized(state.P - gain * (H * state.P));
  out.phase = Phase::filtered;
  return out;
}

Eigen::MatrixXd riccati_measurement_update(const Eigen::MatrixXd& P,
                                           const Eigen::RowVectorXd& H,
                                           double sigma_v2, double lambda) {
  if (!(lambda >= 0.0 && lambda <= 1.0))
    throw std::invalid_argument("riccati_measurement_update: lambda must lie in [0, 1]");
  double r = innovation_variance(P, H, sigma_v2);
  Eigen::VectorXd ph = P * H.transpose();
  return symmetrized(P - (lambda / r) * (ph * ph.transpose()));
}

Eigen::MatrixXd modified_riccati_step(const Eigen::MatrixXd& P,
                                      const Eigen::MatrixXd& A,
                                      const Eigen::MatrixXd& W,
                                      const Eigen::RowVectorXd& H,
                                      double sigma_v2, double lambda) {
  Eigen::MatrixXd pnn = riccati_measurement_update(P, H, sigma_v2, lambda);
  return symmetrized(A * pnn * A.transpose() + W);
}

LambdaScheme lambda_scheme_of(const QuantizationScheme& scheme) {
  LambdaScheme out;
  out.gains.reserve(static_cast<size_t>(scheme.num_labels()));
  for (int label = 0; label < scheme.num_labels(); ++label) {
    Interval bin = interval_of(scheme, label);
    double g = truncated_std_mean(bin);
    out.gains.push_back(g);
    out.lambda += g * g * std_interval_prob(bin.lo, bin.hi);
  }
  return out;
}

QuantizedLinearStep quantized_linear_filter_step(
    const KalmanState& predicted, const Eigen::MatrixXd& A,
    const Eigen::MatrixXd& W, const Eigen::RowVectorXd& H, double sigma_v2,
    const LambdaScheme& gains, int label) {
  require_phase(predicted, Phase::predicted, "quantized_linear_filter_step");
  if (label < 0 || static_cast<size_t>(label) >= gains.gains.size())
    throw std::invalid_argument("quantized_linear_filter_step: unknown label");
  double r = innovation_variance(predicted.P, H, sigma_v2);

  QuantizedLinearStep out;
  out.filtered.xhat = predicted.xhat + gains.gains[static_cast<size_t>(label)] *
                                           (predicted.P * H.transpose()) /
                                           std::sqrt(r);
  out.filtered.P = riccati_measurement_update(predicted.P, H, sigma_v2, gains.lambda);
  out.filtered.phase = Phase::filtered;
  out.predicted_next = kf_time_update(out.filtered, A, W);
  return out;
}

}  // namespace qif
