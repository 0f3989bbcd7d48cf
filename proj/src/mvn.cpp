#include "qif/mvn.hpp"

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace qif {

namespace {

struct GenzFactor {
  Eigen::MatrixXd L;
  Eigen::VectorXd mean, lo, hi;
};

// One sequential-conditioning path; returns the product of per-coordinate
// interval probabilities (zero once the path leaves the feasible region).
double genz_path(const GenzFactor& g, RngStream sub) {
  const int n = static_cast<int>(g.mean.size());
  Eigen::VectorXd y(n);
  double f = 1.0;
  for (int i = 0; i < n; ++i) {
    double mu = g.mean(i);
    for (int j = 0; j < i; ++j) mu += g.L(i, j) * y(j);
    double sd = g.L(i, i);
    if (sd <= 0.0) {
      if (!(g.lo(i) < mu && mu < g.hi(i))) return 0.0;
      y(i) = 0.0;
      continue;
    }
    double a = g.lo(i) == -kInf ? -kInf : (g.lo(i) - mu) / sd;
    double b = g.hi(i) == kInf ? kInf : (g.hi(i) - mu) / sd;
    double p = std_interval_prob(a, b);
    if (!(p > 0.0)) return 0.0;
    f *= p;
    if (i + 1 < n) {
      try {
        y(i) = sample_std_truncated(a, b, sub.next_open01());
      } catch (const unsampleable_tail&) {
        return 0.0;
      }
    }
  }
  return f;
}

}  // namespace

Eigen::MatrixXd symmetrized(const Eigen::MatrixXd& m) {
  return 0.5 * (m + m.transpose());
}

Eigen::MatrixXd clamp_psd(const Eigen::MatrixXd& m) {
  Eigen::MatrixXd sym = symmetrized(m);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sym);
  if (eig.info() != Eigen::Success)
    throw std::runtime_error("clamp_psd: eigendecomposition failed");
  Eigen::VectorXd ev = eig.eigenvalues();
  double scale = std::max(ev.cwiseAbs().maxCoeff(), 1e-300);
  if (ev.minCoeff() < -1e-8 * scale)
    throw std::invalid_argument("clamp_psd: matrix is not positive semidefinite");
  Eigen::VectorXd clamped = ev.cwiseMax(0.0);
  return eig.eigenvectors() * clamped.asDiagonal() *
         eig.eigenvectors().transpose();
}

Eigen::MatrixXd lower_cholesky(const Eigen::MatrixXd& cov) {
  if (cov.rows() != cov.cols())
    throw std::invalid_argument("lower_cholesky: matrix must be square");
  const int n = static_cast<int>(cov.rows());
  Eigen::MatrixXd a = symmetrized(cov);
  double scale = std::max(a.diagonal().cwiseAbs().maxCoeff(), 1e-300);
  Eigen::MatrixXd L = Eigen::MatrixXd::Zero(n, n);
  for (int j = 0; j < n; ++j) {
    double d = a(j, j);
    for (int k = 0; k < j; ++k) d -= L(j, k) * L(j, k);
    if (d < -1e-8 * scale)
      throw std::invalid_argument("lower_cholesky: matrix is not positive semidefinite");
    if (d <= 1e-14 * scale) continue;  // semidefinite pivot, column stays zero
    L(j, j) = std::sqrt(d);
    for (int i = j + 1; i < n; ++i) {
      double s = a(i, j);
      for (int k = 0; k < j; ++k) s -= L(i, k) * L(j, k);
      L(i, j) = s / L(j, j);
    }
  }
  return L;
}

Eigen::MatrixXd psd_sampling_factor(const Eigen::MatrixXd& cov) {
  return lower_cholesky(cov);
}

BoxProbEstimate box_probability(const MvnBox& box, const BoxProbConfig& config) {
  const int n = static_cast<int>(box.mean.size());
  if (n < 1) throw std::invalid_argument("box_probability: empty box");
  if (box.cov.rows() != n || box.cov.cols() != n || box.lower.size() != n ||
      box.upper.size() != n)
    throw std::invalid_argument("box_probability: dimension mismatch");
  for (int i = 0; i < n; ++i)
    if (!(box.lower(i) < box.upper(i)))
      throw std::invalid_argument("box_probability: requires lower < upper");

  if (n == 1) {
    double sd = std::sqrt(std::max(box.cov(0, 0), 0.0));
    if (box.cov(0, 0) < -1e-12)
      throw std::invalid_argument("box_probability: negative variance");
    Interval iv(box.lower(0), box.upper(0));
    double p = sd > 0.0 ? interval_prob(iv, box.mean(0), sd)
                        : (iv.contains(box.mean(0)) ? 1.0 : 0.0);
    return {p, 0.0};
  }

  GenzFactor g{lower_cholesky(box.cov), box.mean, box.lower, box.upper};
  const int paths = config.paths;
  if (paths < 2) throw std::invalid_argument("box_probability: needs >= 2 paths");
  std::vector<double> values(static_cast<size_t>(paths));
  RngStream base(config.seed, 0x0b0cull);
  for_index(config.exec, paths,
            [&](int p) { values[static_cast<size_t>(p)] = genz_path(g, base.substream(static_cast<std::uint64_t>(p))); });

  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= paths;
  double var = 0.0;
  for (double v : values) var += (v - mean) * (v - mean);
  var /= static_cast<double>(paths) - 1.0;
  return {mean, std::sqrt(var / paths)};
}

ConditionalSplit conditional_split(const Eigen::MatrixXd& cov,
                                   const Eigen::VectorXd& history) {
  const int n = static_cast<int>(cov.rows());
  if (cov.cols() != n || n < 1)
    throw std::invalid_argument("conditional_split: cov must be square");
  if (history.size() != n - 1)
    throw std::invalid_argument("conditional_split: history must have n-1 entries");
  if (n == 1) return {0.0, cov(0, 0)};

  Eigen::MatrixXd lead = symmetrized(cov.topLeftCorner(n - 1, n - 1));
  Eigen::VectorXd cross = cov.block(0, n - 1, n - 1, 1);
  Eigen::LDLT<Eigen::MatrixXd> ldlt(lead);
  Eigen::VectorXd z = ldlt.solve(cross);
  if (ldlt.info() != Eigen::Success || !z.allFinite()) {
    // pseudo-inverse with eigenvalue clamping for singular leading blocks
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(lead);
    if (eig.info() != Eigen::Success)
      throw std::runtime_error("conditional_split: factorization failed");
    double tol = 1e-12 * std::max(lead.trace(), 1e-300);
    Eigen::VectorXd inv = eig.eigenvalues().unaryExpr(
        [tol](double v) { return v > tol ? 1.0 / v : 0.0; });
    z = eig.eigenvectors() * inv.asDiagonal() *
        eig.eigenvectors().transpose() * cross;
  }
  double mean = z.dot(history);
  double var = cov(n - 1, n - 1) - cross.dot(z);
  if (!std::isfinite(mean) || !std::isfinite(var))
    throw std::runtime_error("conditional_split: non-finite result");
  return {mean, std::max(var, 0.0)};
}

Eigen::MatrixXd rejection_sample_truncated(const MvnBox& box, int count,
                                           RngStream rng,
                                           long max_attempts_per_sample,
                                           ExecPolicy exec) {
  const int n = static_cast<int>(box.mean.size());
  if (count < 1) throw std::invalid_argument("rejection_sample_truncated: count >= 1");
  if (box.cov.rows() != n || box.cov.cols() != n || box.lower.size() != n ||
      box.upper.size() != n)
    throw std::invalid_argument("rejection_sample_truncated: dimension mismatch");

  Eigen::MatrixXd factor = lower_cholesky(box.cov);
  Eigen::MatrixXd out(n, count);
  std::vector<long> attempts(static_cast<size_t>(count), 0);
  std::vector<char> failed(static_cast<size_t>(count), 0);

  for_index(exec, count, [&](int i) {
    RngStream sub = rng.substream(static_cast<std::uint64_t>(i));
    Eigen::VectorXd z(n), x(n);
    for (long attempt = 1; attempt <= max_attempts_per_sample; ++attempt) {
      for (int k = 0; k < n; ++k) z(k) = phi_inv(sub.next_open01());
      x = box.mean + factor * z;
      bool inside = true;
      for (int k = 0; k < n; ++k)
        if (!(box.lower(k) < x(k) && x(k) < box.upper(k))) {
          inside = false;
          break;
        }
      if (inside) {
        out.col(i) = x;
        attempts[static_cast<size_t>(i)] = attempt;
        return;
      }
    }
    failed[static_cast<size_t>(i)] = 1;
    attempts[static_cast<size_t>(i)] = max_attempts_per_sample;
  });

  long failures = 0, total_attempts = 0, accepted = 0;
  for (int i = 0; i < count; ++i) {
    failures += failed[static_cast<size_t>(i)];
    total_attempts += attempts[static_cast<size_t>(i)];
    accepted += failed[static_cast<size_t>(i)] ? 0 : 1;
  }
  if (failures > 0) {
    double rate = total_attempts > 0
                      ? static_cast<double>(accepted) / static_cast<double>(total_attempts)
                      : 0.0;
    throw std::runtime_error(
        "rejection_sample_truncated: acceptance rate " + std::to_string(rate) +
        " too low after " + std::to_string(total_attempts) + " draws");
  }
  return out;
}

}  // namespace qif
