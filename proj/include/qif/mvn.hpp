#pragma once

#include <Eigen/Dense>
#include <cstdint>

#include "qif/parallel.hpp"
#include "qif/rng.hpp"
#include "qif/scalar_normal.hpp"

namespace qif {

// Axis-aligned box constraint on a multivariate normal. Bound entries may be
// +-inf; lower < upper component-wise.
struct MvnBox {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;
};

struct BoxProbConfig {
  int paths = 1 << 14;
  std::uint64_t seed = 0x5eedb0c5ull;
  ExecPolicy exec = ExecPolicy::openmp;
};

struct BoxProbEstimate {
  double value = 0.0;
  double std_error = 0.0;
};

// P(lower < X < upper) for X ~ N(mean, cov). Exact for n = 1; for n >= 2 a
// sequential-conditioning Monte Carlo estimate (each coordinate drawn from its
// truncated conditional given the previous ones, the per-coordinate interval
// probabilities multiplied along the path) with a reported standard error.
BoxProbEstimate box_probability(const MvnBox& box, const BoxProbConfig& config = {});

// Conditional mean and variance of the last coordinate of a zero-mean normal
// with covariance cov, given the first n-1 coordinates equal `history`.
struct ConditionalSplit {
  double mean;
  double var;
};
ConditionalSplit conditional_split(const Eigen::MatrixXd& cov,
                                   const Eigen::VectorXd& history);

// Exact truncated-MVN draws by raw rejection. Oracle-grade: aborts with an
// acceptance-rate report when the box is too improbable. Returns n x count.
Eigen::MatrixXd rejection_sample_truncated(const MvnBox& box, int count,
                                           RngStream rng,
                                           long max_attempts_per_sample = 200000,
                                           ExecPolicy exec = ExecPolicy::openmp);

// --- shared matrix utilities ---

Eigen::MatrixXd symmetrized(const Eigen::MatrixXd& m);

// Clamps eigenvalues below zero (tolerating round-off); throws
// std::invalid_argument when the matrix is indefinite beyond tolerance.
Eigen::MatrixXd clamp_psd(const Eigen::MatrixXd& m);

// Factor F with F F^T = cov (eigendecomposition based; handles singular PSD).
Eigen::MatrixXd psd_sampling_factor(const Eigen::MatrixXd& cov);

// Lower-triangular L with L L^T = clamp_psd(cov).
Eigen::MatrixXd lower_cholesky(const Eigen::MatrixXd& cov);

}  // namespace qif
