#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "qif/kalman.hpp"
#include "qif/model.hpp"
#include "qif/parallel.hpp"
#include "qif/quantizer.hpp"
#include "qif/rng.hpp"

namespace qif {

enum class Resampling { multinomial, systematic };

// Ancestor indices drawn with probability proportional to the weights.
// Throws on an all-zero weight vector.
std::vector<int> resample_indices(const Eigen::VectorXd& weights, int count,
                                  RngStream& rng, Resampling method);

struct ParticleStepResult {
  Eigen::VectorXd filtered;        // xhat(n/n)
  Eigen::VectorXd predicted_next;  // A(n) xhat(n/n)
  double ess = 0.0;
  bool degenerate_weights = false;
};

// Bootstrap particle filter on the state space: weights each particle by the
// probability that its measurement lands in the quantizer interval, estimates
// by the weighted particle mean, resamples, then propagates through the
// dynamics with fresh process noise.
class StateParticleFilter {
 public:
  StateParticleFilter(const StateSpaceModel& model, int count, RngStream rng,
                      Resampling resampling = Resampling::systematic,
                      ExecPolicy exec = ExecPolicy::openmp);

  ParticleStepResult step(int n, const Interval& measurement_iv);
  const Eigen::MatrixXd& particles() const { return particles_; }

 private:
  StateSpaceModel model_;
  int count_;
  Resampling resampling_;
  ExecPolicy exec_;
  RngStream base_;
  Eigen::MatrixXd particles_, scratch_;
  Eigen::VectorXd weights_;
  Eigen::MatrixXd noise_factor_;
  int expected_n_ = 0;
};

// Particle filter whose particles are whole measurement histories drawn from
// the truncated joint normal, one coordinate per step. Memory grows O(n) per
// particle and the per-step solve O(n^3), so the horizon is capped; this
// filter is an oracle for validating the fixed-dimension one, not a
// production path.
class MeasurementHistoryFilter {
 public:
  static constexpr int kHorizonCap = 64;

  MeasurementHistoryFilter(const StateSpaceModel& model, int count,
                           RngStream rng,
                           Resampling resampling = Resampling::systematic,
                           ExecPolicy exec = ExecPolicy::openmp);

  // Var(y(n) | y(0..n-1)); grows the model statistics up to step n.
  double innovation_variance(int n);
  // E(y(n)); the prior predicted measurement before any conditioning.
  double prior_measurement_mean(int n);

  // injected_draws, when given, replaces the internal truncated draws
  // (count entries) so two filters can be driven by identical histories.
  ParticleStepResult step(int n, const Interval& measurement_iv,
                          const double* injected_draws = nullptr);

  Eigen::MatrixXd histories() const;               // (n+1) x count after step(n)
  Eigen::MatrixXd measurement_covariance() const;  // R_y over steps so far

 private:
  void ensure_stats(int n);
  void solve_for(int n);

  StateSpaceModel model_;
  int count_;
  Resampling resampling_;
  ExecPolicy exec_;
  RngStream base_;
  Eigen::MatrixXd histories_, scratch_;
  Eigen::VectorXd weights_;
  Eigen::MatrixXd ry_;
  std::vector<Eigen::MatrixXd> cross_state_;  // Cov(x(j), x(stats_n_))
  Eigen::MatrixXd sigma_x_;
  std::vector<Eigen::VectorXd> mean_x_;
  Eigen::VectorXd mean_y_;
  int stats_n_ = -1;
  int solved_n_ = -1;
  Eigen::VectorXd kvec_;
  double rdelta_ = 0.0;
  int expected_n_ = 0;
};

// Fixed-dimension particle filter: each particle runs a Kalman recursion on a
// pseudo-measurement drawn from the truncated conditional, and the error
// covariance is shared across particles (it is the classical Riccati iterate,
// independent of the labels).
class KalmanParticleFilter {
 public:
  KalmanParticleFilter(const StateSpaceModel& model, int count, RngStream rng,
                       Resampling resampling = Resampling::systematic,
                       ExecPolicy exec = ExecPolicy::openmp);

  // H P(n) H^T + sigma_v2(n) from the shared predicted covariance.
  double innovation_variance(int n) const;
  const Eigen::MatrixXd& shared_covariance() const { return P_; }
  Eigen::MatrixXd shared_filtered_covariance(int n) const;

  ParticleStepResult step(int n, const Interval& measurement_iv,
                          const double* injected_draws = nullptr);

  const Eigen::MatrixXd& particles() const { return particles_; }
  const Eigen::MatrixXd& filtered_particles() const { return filtered_; }

 private:
  StateSpaceModel model_;
  int count_;
  Resampling resampling_;
  ExecPolicy exec_;
  RngStream base_;
  Eigen::MatrixXd particles_, filtered_, scratch_;
  Eigen::VectorXd weights_;
  Eigen::MatrixXd P_;
  int expected_n_ = 0;
};

enum class FilterKind { full_kf, soi_kf, mlq_kf, pf, tnpf, klpf };

std::string to_string(FilterKind kind);
FilterKind filter_kind_from_string(const std::string& name);
bool uses_particles(FilterKind kind);

// What the fusion-center loop quantized at one step.
struct QuantizerSignal {
  double yhat = 0.0;
  double std_dev = 1.0;
  int label = 0;
  double s1 = -kInf;
  double s2 = kInf;
};

struct FilterStep {
  Eigen::VectorXd filtered;
  Eigen::VectorXd predicted_next;
  double ess = 0.0;
  bool degenerate_weights = false;
  QuantizerSignal signal;
  double cov_trace = 0.0;  // filter's own filtered covariance trace; NaN for
                           // kinds that do not carry one
};

struct FilterOutput {
  std::vector<FilterStep> steps;
};

struct RunOptions {
  Resampling resampling = Resampling::systematic;
  ExecPolicy exec = ExecPolicy::openmp;
  // Replaces the filter's own prediction/quantization loop; used to condition
  // several filters on one fixed label sequence.
  const std::vector<QuantizerSignal>* injected = nullptr;
  // Broadcast the modified-Riccati innovation deviation to the quantizer
  // instead of the shared full-information one.
  bool klpf_std_from_modified_riccati = false;
};

// The fusion-center loop: predict the measurement, quantize the trajectory's
// true innovation against the filter's own prediction, hand the label's
// interval to the filter. Each filter quantizes against its own prediction.
FilterOutput run_filter(FilterKind kind, const StateSpaceModel& model,
                        const QuantizationScheme& scheme,
                        const Trajectory& traj, int particle_count,
                        RngStream rng, const RunOptions& opt = {});

}  // namespace qif
