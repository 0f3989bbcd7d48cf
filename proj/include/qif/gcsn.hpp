#pragma once

#include <Eigen/Dense>

#include "qif/mvn.hpp"
#include "qif/rng.hpp"

namespace qif {

// Skew family closed under linear maps and added Gaussian noise: a k-variate
// Gaussian density reweighted by the ratio of two n-variate box
// probabilities,
//   f(x) = N_k(x; mu, Sigma) * Phi_n(s1, s2; D (x - mu), Delta)
//                            / Phi_n(s1, s2; 0, Delta + D Sigma D^T).
// n = 0 degenerates to the plain Gaussian. This is the exact family of a
// Gaussian state conditioned on interval observations of linear functionals.
struct Gcsn {
  Eigen::VectorXd mu;     // k
  Eigen::MatrixXd Sigma;  // k x k PSD
  Eigen::MatrixXd D;      // n x k
  Eigen::VectorXd s1, s2; // n, extended reals, s1 < s2
  Eigen::MatrixXd Delta;  // n x n PSD

  int k() const { return static_cast<int>(mu.size()); }
  int n() const { return static_cast<int>(s1.size()); }

  // Delta + D Sigma D^T, the covariance in the normalizing box probability.
  Eigen::MatrixXd omega() const;
};

// Throws std::invalid_argument when dimensions or bound ordering are off.
void validate_gcsn(const Gcsn& g);

struct McValue {
  double value = 0.0;
  double std_error = 0.0;
};

// Density at x (exact for n <= 1, Monte Carlo with error bars beyond).
McValue gcsn_pdf(const Gcsn& g, const Eigen::VectorXd& x,
                 const BoxProbConfig& config = {});

// MGF  Phi_n(s1,s2; D Sigma t, omega) / Phi_n(s1,s2; 0, omega)
//      * exp(mu^T t + t^T Sigma t / 2).
McValue gcsn_mgf(const Gcsn& g, const Eigen::VectorXd& t,
                 const BoxProbConfig& config = {});

struct WeightedSample {
  Eigen::VectorXd value;
  double weight = 1.0;
};

// Draws through the stochastic representation
//   Y = mu + V + Sigma D^T omega^{-1} U,
//   V ~ N_k(0, Sigma - Sigma D^T omega^{-1} D Sigma),
//   U ~ N_n(s1, s2; 0, omega) truncated.
// Exact rejection for the U-draw when the box probability allows it;
// otherwise sequential-conditioning proposals with importance weights.
class GcsnSampler {
 public:
  explicit GcsnSampler(const Gcsn& g, const BoxProbConfig& config = {});

  Eigen::VectorXd draw(RngStream& rng) const;          // throws if box too improbable
  WeightedSample draw_weighted(RngStream& rng) const;  // always succeeds
  double box_prob() const { return box_prob_; }

 private:
  Eigen::VectorXd draw_v(RngStream& rng) const;

  Gcsn g_;
  Eigen::MatrixXd omega_, s_map_, v_factor_, u_factor_;
  double box_prob_ = 1.0;
  bool rejection_ok_ = true;
};

Eigen::VectorXd gcsn_sample(const Gcsn& g, RngStream& rng);

// Closure operations. A must have full rank min(p, k).
Gcsn gcsn_linear_map(const Gcsn& g, const Eigen::MatrixXd& A);
Gcsn gcsn_add_gaussian(const Gcsn& g, const Eigen::VectorXd& noise_mean,
                       const Eigen::MatrixXd& noise_cov);
// Y = A X + W with W ~ N(noise_mean, noise_cov); A square nonsingular.
Gcsn gcsn_affine_dynamics(const Gcsn& g, const Eigen::MatrixXd& A,
                          const Eigen::VectorXd& noise_mean,
                          const Eigen::MatrixXd& noise_cov);

// ---------------------------------------------------------------------------
// Conditional state density x(n) | labels, propagated in closed form. One
// box dimension is appended per measurement update, so this is an
// oracle-scale tool (capped horizon); the production filter path never
// materializes these growing parameters.
struct CondDensityState {
  static constexpr int kMeasurementCap = 64;

  Gcsn dist;             // zero-mean
  int time = 0;          // n
  bool measured = false; // true once conditioned through the step-n label
};

// Prior x(0) ~ N(0, P0); requires a zero-mean initial state.
CondDensityState cond_density_init(const Eigen::MatrixXd& P0);

CondDensityState cond_density_time_update(const CondDensityState& state,
                                          const Eigen::MatrixXd& A,
                                          const Eigen::MatrixXd& W);

CondDensityState cond_density_measurement_update(const CondDensityState& state,
                                                 const Eigen::RowVectorXd& H,
                                                 double sigma_v2, double s1,
                                                 double s2);

// Delta + D Sigma D^T; equals the covariance of the measurement vector.
Eigen::MatrixXd cond_density_R(const CondDensityState& state);

struct CondMoments {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
  Eigen::VectorXd mean_std_error;
  int samples = 0;
};

// Monte Carlo moments through the stochastic representation: the Gaussian
// part contributes its exact moments; only the truncated component is
// sampled (by rejection).
CondMoments cond_density_estimate(const CondDensityState& state, int samples,
                                  RngStream rng);

}  // namespace qif
