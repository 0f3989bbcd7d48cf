#include "qif/model.hpp"

#include <cmath>
#include <stdexcept>

#include "qif/mvn.hpp"
#include "qif/scalar_normal.hpp"

namespace qif {

namespace {
constexpr std::uint64_t kInitRole = 0;
constexpr std::uint64_t kProcessRole = 1;
constexpr std::uint64_t kMeasureRole = 2;

bool roughly_symmetric(const Eigen::MatrixXd& m) {
  double scale = std::max(m.cwiseAbs().maxCoeff(), 1e-300);
  return (m - m.transpose()).cwiseAbs().maxCoeff() <= 1e-10 * scale;
}

bool psd_within_tolerance(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(symmetrized(m));
  double tol = 1e-10 * std::max(std::abs(m.trace()), 1e-300);
  return eig.info() == Eigen::Success && eig.eigenvalues().minCoeff() >= -tol;
}
}  // namespace

StateSpaceModel StateSpaceModel::time_invariant(Eigen::MatrixXd A,
                                                Eigen::RowVectorXd H,
                                                Eigen::MatrixXd W,
                                                double sigma_v2,
                                                Eigen::MatrixXd P0,
                                                Eigen::VectorXd initial_mean) {
  StateSpaceModel m;
  m.dim = static_cast<int>(A.rows());
  m.A = {std::move(A)};
  m.H = {std::move(H)};
  m.W = {std::move(W)};
  m.sigma_v2 = {sigma_v2};
  m.P0 = std::move(P0);
  m.initial_mean = initial_mean.size() ? std::move(initial_mean)
                                       : Eigen::VectorXd::Zero(m.dim).eval();
  return m;
}

std::vector<std::string> validate_model(const StateSpaceModel& model) {
  std::vector<std::string> out;
  const int d = model.dim;
  if (d < 1) {
    out.push_back("dim must be >= 1");
    return out;
  }
  auto check_dims = [&](const Eigen::MatrixXd& m, int r, int c,
                        const std::string& name) {
    if (m.rows() != r || m.cols() != c)
      out.push_back(name + " has wrong dimensions");
  };
  for (size_t i = 0; i < model.A.size(); ++i)
    check_dims(model.A[i], d, d, "A[" + std::to_string(i) + "]");
  for (size_t i = 0; i < model.H.size(); ++i)
    if (model.H[i].cols() != d)
      out.push_back("H[" + std::to_string(i) + "] has wrong dimensions");
  for (size_t i = 0; i < model.W.size(); ++i) {
    std::string name = "W[" + std::to_string(i) + "]";
    check_dims(model.W[i], d, d, name);
    if (model.W[i].rows() == d && model.W[i].cols() == d) {
      if (!roughly_symmetric(model.W[i])) out.push_back(name + " not symmetric");
      else if (!psd_within_tolerance(model.W[i])) out.push_back(name + " not PSD");
    }
  }
  check_dims(model.P0, d, d, "P0");
  if (model.P0.rows() == d && model.P0.cols() == d) {
    if (!roughly_symmetric(model.P0)) out.push_back("P0 not symmetric");
    else if (!psd_within_tolerance(model.P0)) out.push_back("P0 not PSD");
  }
  for (size_t i = 0; i < model.sigma_v2.size(); ++i)
    if (!(model.sigma_v2[i] > 0.0))
      out.push_back("sigma_v2[" + std::to_string(i) + "]: measurement noise not positive");
  if (model.A.empty()) out.push_back("A sequence empty");
  if (model.H.empty()) out.push_back("H sequence empty");
  if (model.W.empty()) out.push_back("W sequence empty");
  if (model.sigma_v2.empty()) out.push_back("sigma_v2 sequence empty");
  if (model.initial_mean.size() != d) out.push_back("initial_mean has wrong dimension");
  return out;
}

Trajectory simulate(const StateSpaceModel& model, int horizon, RngStream rng) {
  auto violations = validate_model(model);
  if (!violations.empty()) {
    std::string msg = "simulate: invalid model:";
    for (const auto& v : violations) msg += " [" + v + "]";
    throw std::invalid_argument(msg);
  }
  if (horizon < 0) throw std::invalid_argument("simulate: horizon must be >= 0");

  const int d = model.dim;
  const int steps = horizon + 1;
  RngStream init_rng = rng.substream(kInitRole);
  RngStream proc_rng = rng.substream(kProcessRole);
  RngStream meas_rng = rng.substream(kMeasureRole);

  Trajectory traj;
  traj.states.resize(d, steps);
  traj.measurements.resize(steps);

  Eigen::MatrixXd p0_factor = psd_sampling_factor(clamp_psd(model.P0));
  Eigen::VectorXd z(d);
  for (int k = 0; k < d; ++k) z(k) = draw_std_normal(init_rng);
  traj.states.col(0) = model.initial_mean + p0_factor * z;

  Eigen::MatrixXd w_factor;
  bool cache_w = model.W.size() == 1;
  if (cache_w) w_factor = psd_sampling_factor(clamp_psd(model.W[0]));

  for (int n = 0; n < steps; ++n) {
    traj.measurements(n) = model.H_at(n).dot(traj.states.col(n)) +
                           std::sqrt(model.sigma_v2_at(n)) * draw_std_normal(meas_rng);
    if (n + 1 < steps) {
      const Eigen::MatrixXd& f =
          cache_w ? w_factor : (w_factor = psd_sampling_factor(clamp_psd(model.W_at(n))));
      for (int k = 0; k < d; ++k) z(k) = draw_std_normal(proc_rng);
      traj.states.col(n + 1) = model.A_at(n) * traj.states.col(n) + f * z;
    }
  }
  return traj;
}

}  // namespace qif
