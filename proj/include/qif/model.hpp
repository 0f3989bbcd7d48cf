#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>
#include <vector>

#include "qif/rng.hpp"

namespace qif {

// Linear-Gaussian state-space system with a scalar measurement:
//   x(n+1) = A(n) x(n) + w(n),   w(n) ~ N(0, W(n))
//   y(n)   = H(n) x(n) + v(n),   v(n) ~ N(0, sigma_v2(n))
//   x(0)   ~ N(initial_mean, P0)
// Coefficient sequences of length 1 denote a time-invariant system.
struct StateSpaceModel {
  int dim = 0;
  std::vector<Eigen::MatrixXd> A;
  std::vector<Eigen::RowVectorXd> H;
  std::vector<Eigen::MatrixXd> W;
  std::vector<double> sigma_v2;
  Eigen::MatrixXd P0;
  Eigen::VectorXd initial_mean;

  static StateSpaceModel time_invariant(Eigen::MatrixXd A, Eigen::RowVectorXd H,
                                        Eigen::MatrixXd W, double sigma_v2,
                                        Eigen::MatrixXd P0,
                                        Eigen::VectorXd initial_mean = {});

  const Eigen::MatrixXd& A_at(int n) const { return seq_at(A, n, "A"); }
  const Eigen::RowVectorXd& H_at(int n) const { return seq_at(H, n, "H"); }
  const Eigen::MatrixXd& W_at(int n) const { return seq_at(W, n, "W"); }
  double sigma_v2_at(int n) const { return seq_at(sigma_v2, n, "sigma_v2"); }
  bool time_invariant_coeffs() const {
    return A.size() == 1 && H.size() == 1 && W.size() == 1 && sigma_v2.size() == 1;
  }

 private:
  template <typename Seq>
  static const typename Seq::value_type& seq_at(const Seq& s, int n,
                                                const char* name) {
    if (s.empty())
      throw std::invalid_argument(std::string("model: empty sequence ") + name);
    if (s.size() == 1) return s.front();
    if (n < 0 || static_cast<size_t>(n) >= s.size())
      throw std::invalid_argument(std::string("model: sequence ") + name +
                                  " has no entry for step " + std::to_string(n));
    return s[static_cast<size_t>(n)];
  }
};

// Diagnostics, empty when every invariant holds. Nothing is thrown here;
// simulate() rejects invalid models with this report.
std::vector<std::string> validate_model(const StateSpaceModel& model);

struct Trajectory {
  Eigen::MatrixXd states;        // dim x (horizon+1)
  Eigen::VectorXd measurements;  // horizon+1
  int horizon() const { return static_cast<int>(measurements.size()) - 1; }
};

// Draws x(0..T) and y(0..T). Deterministic in (model, horizon, rng); the
// initial, process, and measurement noises come from separate substreams so
// consumers of one role never perturb another.
Trajectory simulate(const StateSpaceModel& model, int horizon, RngStream rng);

}  // namespace qif
