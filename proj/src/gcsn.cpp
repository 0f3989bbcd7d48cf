#include "qif/gcsn.hpp"

#include <cmath>
#include <stdexcept>

#include "qif/scalar_normal.hpp"

namespace qif {

namespace {

// Phi_n(s1, s2; shift, cov); n = 0 is the empty product.
BoxProbEstimate phi_box(const Eigen::VectorXd& s1, const Eigen::VectorXd& s2,
                        const Eigen::VectorXd& shift, const Eigen::MatrixXd& cov,
                        const BoxProbConfig& config) {
  if (s1.size() == 0) return {1.0, 0.0};
  return box_probability(MvnBox{shift, cov, s1, s2}, config);
}

double gaussian_density(const Eigen::VectorXd& x, const Eigen::VectorXd& mu,
                        const Eigen::MatrixXd& sigma) {
  const int k = static_cast<int>(x.size());
  Eigen::LLT<Eigen::MatrixXd> llt(symmetrized(sigma));
  if (llt.info() != Eigen::Success)
    throw std::invalid_argument("gcsn_pdf: Sigma must be positive definite");
  Eigen::VectorXd diff = x - mu;
  double quad = diff.dot(llt.solve(diff));
  double logdet = 0.0;
  for (int i = 0; i < k; ++i) logdet += std::log(llt.matrixL()(i, i));
  return std::exp(-0.5 * quad - logdet - 0.5 * k * std::log(2.0 * M_PI));
}

Eigen::MatrixXd solve_spd(const Eigen::MatrixXd& m, const Eigen::MatrixXd& rhs,
                          const char* who) {
  Eigen::LDLT<Eigen::MatrixXd> ldlt(symmetrized(m));
  Eigen::MatrixXd out = ldlt.solve(rhs);
  if (ldlt.info() != Eigen::Success || !out.allFinite())
    throw std::invalid_argument(std::string(who) + ": singular matrix in solve");
  return out;
}

}  // namespace

Eigen::MatrixXd Gcsn::omega() const {
  return symmetrized(Delta + D * Sigma * D.transpose());
}

void validate_gcsn(const Gcsn& g) {
  const int k = g.k(), n = g.n();
  if (k < 1) throw std::invalid_argument("gcsn: k must be >= 1");
  if (g.Sigma.rows() != k || g.Sigma.cols() != k)
    throw std::invalid_argument("gcsn: Sigma must be k x k");
  if (g.D.rows() != n || (n > 0 && g.D.cols() != k))
    throw std::invalid_argument("gcsn: D must be n x k");
  if (g.s2.size() != n || g.Delta.rows() != n || g.Delta.cols() != n)
    throw std::invalid_argument("gcsn: bound/Delta dimensions must match n");
  for (int i = 0; i < n; ++i)
    if (!(g.s1(i) < g.s2(i)))
      throw std::invalid_argument("gcsn: requires s1 < s2 component-wise");
}

McValue gcsn_pdf(const Gcsn& g, const Eigen::VectorXd& x,
                 const BoxProbConfig& config) {
  validate_gcsn(g);
  if (x.size() != g.k()) throw std::invalid_argument("gcsn_pdf: x has wrong dimension");
  double gauss = gaussian_density(x, g.mu, g.Sigma);
  if (g.n() == 0) return {gauss, 0.0};

  BoxProbConfig den_config = config;
  den_config.seed = config.seed + 1;
  BoxProbEstimate num = phi_box(g.s1, g.s2, g.D * (x - g.mu), g.Delta, config);
  BoxProbEstimate den = phi_box(g.s1, g.s2, Eigen::VectorXd::Zero(g.n()),
                                g.omega(), den_config);
  if (!(den.value > 0.0))
    throw std::runtime_error("gcsn_pdf: degenerate distribution (zero normalizer)");

  double value = gauss * num.value / den.value;
  double rel_num = num.value > 0.0 ? num.std_error / num.value : 0.0;
  double rel_den = den.std_error / den.value;
  double se = num.value > 0.0
                  ? value * std::sqrt(rel_num * rel_num + rel_den * rel_den)
                  : gauss * num.std_error / den.value;
  return {value, se};
}

McValue gcsn_mgf(const Gcsn& g, const Eigen::VectorXd& t,
                 const BoxProbConfig& config) {
  validate_gcsn(g);
  if (t.size() != g.k()) throw std::invalid_argument("gcsn_mgf: t has wrong dimension");
  double gauss = std::exp(g.mu.dot(t) + 0.5 * t.dot(g.Sigma * t));
  if (g.n() == 0) return {gauss, 0.0};

  BoxProbConfig den_config = config;
  den_config.seed = config.seed + 1;
  Eigen::MatrixXd omega = g.omega();
  BoxProbEstimate num = phi_box(g.s1, g.s2, g.D * g.Sigma * t, omega, config);
  BoxProbEstimate den =
      phi_box(g.s1, g.s2, Eigen::VectorXd::Zero(g.n()), omega, den_config);
  if (!(den.value > 0.0))
    throw std::runtime_error("gcsn_mgf: degenerate distribution (zero normalizer)");

  double value = gauss * num.value / den.value;
  double rel_num = num.value > 0.0 ? num.std_error / num.value : 0.0;
  double rel_den = den.std_error / den.value;
  double se = num.value > 0.0
                  ? value * std::sqrt(rel_num * rel_num + rel_den * rel_den)
                  : gauss * num.std_error / den.value;
  return {value, se};
}

// ---------------------------------------------------------------------------

GcsnSampler::GcsnSampler(const Gcsn& g, const BoxProbConfig& config) : g_(g) {
  validate_gcsn(g_);
  const int n = g_.n();
  if (n == 0) {
    v_factor_ = psd_sampling_factor(clamp_psd(g_.Sigma));
    return;
  }
  omega_ = g_.omega();
  Eigen::MatrixXd dsig = g_.D * g_.Sigma;                       // n x k
  s_map_ = solve_spd(omega_, dsig, "GcsnSampler").transpose();  // k x n
  Eigen::MatrixXd v_cov = symmetrized(g_.Sigma - s_map_ * dsig);
  v_factor_ = psd_sampling_factor(clamp_psd(v_cov));
  u_factor_ = lower_cholesky(omega_);

  if (n == 1) {
    double sd = std::sqrt(std::max(omega_(0, 0), 0.0));
    box_prob_ = sd > 0.0 ? interval_prob(Interval(g_.s1(0), g_.s2(0)), 0.0, sd)
                         : 1.0;
  } else {
    box_prob_ = box_probability(
                    MvnBox{Eigen::VectorXd::Zero(n), omega_, g_.s1, g_.s2},
                    config)
                    .value;
  }
  rejection_ok_ = box_prob_ >= 1e-3;
}

Eigen::VectorXd GcsnSampler::draw_v(RngStream& rng) const {
  Eigen::VectorXd z(g_.k());
  for (int i = 0; i < g_.k(); ++i) z(i) = draw_std_normal(rng);
  return v_factor_ * z;
}

Eigen::VectorXd GcsnSampler::draw(RngStream& rng) const {
  const int n = g_.n();
  if (n == 0) return g_.mu + draw_v(rng);
  if (!rejection_ok_)
    throw std::runtime_error(
        "GcsnSampler::draw: box probability " + std::to_string(box_prob_) +
        " too small for rejection; use draw_weighted");
  Eigen::VectorXd z(n), u(n);
  for (long attempt = 0; attempt < 1'000'000; ++attempt) {
    for (int i = 0; i < n; ++i) z(i) = draw_std_normal(rng);
    u = u_factor_ * z;
    bool inside = true;
    for (int i = 0; i < n; ++i)
      if (!(g_.s1(i) < u(i) && u(i) < g_.s2(i))) {
        inside = false;
        break;
      }
    if (inside) return g_.mu + draw_v(rng) + s_map_ * u;
  }
  throw std::runtime_error("GcsnSampler::draw: rejection budget exhausted");
}

WeightedSample GcsnSampler::draw_weighted(RngStream& rng) const {
  const int n = g_.n();
  if (n == 0) return {g_.mu + draw_v(rng), 1.0};
  // sequential conditioning through the Cholesky factor of omega
  Eigen::VectorXd y(n), u(n);
  double weight = 1.0;
  for (int i = 0; i < n; ++i) {
    double mu_i = 0.0;
    for (int j = 0; j < i; ++j) mu_i += u_factor_(i, j) * y(j);
    double sd = u_factor_(i, i);
    if (sd <= 0.0) {
      if (!(g_.s1(i) < mu_i && mu_i < g_.s2(i))) weight = 0.0;
      y(i) = 0.0;
      u(i) = mu_i;
      continue;
    }
    double a = g_.s1(i) == -kInf ? -kInf : (g_.s1(i) - mu_i) / sd;
    double b = g_.s2(i) == kInf ? kInf : (g_.s2(i) - mu_i) / sd;
    double p = std_interval_prob(a, b);
    if (!(p > 0.0)) {
      weight = 0.0;
      y(i) = a == -kInf ? b : a;
      u(i) = mu_i + sd * y(i);
      continue;
    }
    weight *= p;
    try {
      y(i) = sample_std_truncated(a, b, rng.next_open01());
    } catch (const unsampleable_tail&) {
      y(i) = a == -kInf ? b : a;
    }
    u(i) = mu_i + sd * y(i);
  }
  return {g_.mu + draw_v(rng) + s_map_ * u, weight};
}

Eigen::VectorXd gcsn_sample(const Gcsn& g, RngStream& rng) {
  return GcsnSampler(g).draw(rng);
}

// ---------------------------------------------------------------------------

Gcsn gcsn_linear_map(const Gcsn& g, const Eigen::MatrixXd& A) {
  validate_gcsn(g);
  const int p = static_cast<int>(A.rows());
  const int k = g.k();
  if (static_cast<int>(A.cols()) != k)
    throw std::invalid_argument("gcsn_linear_map: A must have k columns");
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(A);
  if (qr.rank() != std::min(p, k))
    throw std::invalid_argument("gcsn_linear_map: A must have full rank");

  Gcsn out;
  out.mu = A * g.mu;
  out.Sigma = symmetrized(A * g.Sigma * A.transpose());
  out.s1 = g.s1;
  out.s2 = g.s2;
  if (p >= k) {
    // injective map: the box parameters carry over unchanged
    Eigen::MatrixXd pinv = solve_spd(A.transpose() * A, A.transpose(),
                                     "gcsn_linear_map");  // k x p
    out.D = g.D * pinv;
    out.Delta = g.Delta;
  } else {
    Eigen::MatrixXd dsa = g.D * g.Sigma * A.transpose();  // n x p
    out.D = solve_spd(out.Sigma, dsa.transpose(), "gcsn_linear_map").transpose();
    out.Delta = symmetrized(g.Delta + g.D * g.Sigma * g.D.transpose() -
                            out.D * out.Sigma * out.D.transpose());
  }
  return out;
}

Gcsn gcsn_add_gaussian(const Gcsn& g, const Eigen::VectorXd& noise_mean,
                       const Eigen::MatrixXd& noise_cov) {
  validate_gcsn(g);
  const int k = g.k();
  if (noise_mean.size() != k || noise_cov.rows() != k || noise_cov.cols() != k)
    throw std::invalid_argument("gcsn_add_gaussian: dimension mismatch");

  Gcsn out;
  out.mu = g.mu + noise_mean;
  out.Sigma = symmetrized(g.Sigma + noise_cov);
  out.s1 = g.s1;
  out.s2 = g.s2;
  if (g.n() == 0) {
    out.D = g.D;
    out.Delta = g.Delta;
    return out;
  }
  Eigen::MatrixXd dsig = g.D * g.Sigma;  // n x k
  out.D = solve_spd(out.Sigma, dsig.transpose(), "gcsn_add_gaussian").transpose();
  out.Delta = symmetrized(g.Delta + dsig * g.D.transpose() -
                          out.D * out.Sigma * out.D.transpose());
  return out;
}

Gcsn gcsn_affine_dynamics(const Gcsn& g, const Eigen::MatrixXd& A,
                          const Eigen::VectorXd& noise_mean,
                          const Eigen::MatrixXd& noise_cov) {
  validate_gcsn(g);
  const int k = g.k();
  if (A.rows() != k || A.cols() != k)
    throw std::invalid_argument("gcsn_affine_dynamics: A must be k x k");
  if (noise_mean.size() != k || noise_cov.rows() != k || noise_cov.cols() != k)
    throw std::invalid_argument("gcsn_affine_dynamics: dimension mismatch");
  Eigen::FullPivLU<Eigen::MatrixXd> lu(A);
  if (!lu.isInvertible())
    throw std::invalid_argument("gcsn_affine_dynamics: A must be nonsingular");

  Gcsn out;
  out.mu = A * g.mu + noise_mean;
  out.Sigma = symmetrized(A * g.Sigma * A.transpose() + noise_cov);
  out.s1 = g.s1;
  out.s2 = g.s2;
  if (g.n() == 0) {
    out.D = Eigen::MatrixXd::Zero(0, k);
    out.Delta = g.Delta;
    return out;
  }
  Eigen::MatrixXd dsa = g.D * g.Sigma * A.transpose();  // n x k
  out.D = solve_spd(out.Sigma, dsa.transpose(), "gcsn_affine_dynamics").transpose();
  out.Delta = symmetrized(g.Delta + g.D * g.Sigma * g.D.transpose() -
                          out.D * out.Sigma * out.D.transpose());
  return out;
}

// ---------------------------------------------------------------------------

CondDensityState cond_density_init(const Eigen::MatrixXd& P0) {
  const int k = static_cast<int>(P0.rows());
  CondDensityState st;
  st.dist.mu = Eigen::VectorXd::Zero(k);
  st.dist.Sigma = clamp_psd(P0);
  st.dist.D = Eigen::MatrixXd::Zero(0, k);
  st.dist.s1 = Eigen::VectorXd(0);
  st.dist.s2 = Eigen::VectorXd(0);
  st.dist.Delta = Eigen::MatrixXd(0, 0);
  st.time = 0;
  st.measured = false;
  return st;
}

CondDensityState cond_density_time_update(const CondDensityState& state,
                                          const Eigen::MatrixXd& A,
                                          const Eigen::MatrixXd& W) {
  if (!state.measured)
    throw std::invalid_argument("cond_density_time_update: state must be measured first");
  CondDensityState out;
  out.dist = gcsn_affine_dynamics(state.dist, A,
                                  Eigen::VectorXd::Zero(state.dist.k()), W);
  out.time = state.time + 1;
  out.measured = false;
  return out;
}

CondDensityState cond_density_measurement_update(const CondDensityState& state,
                                                 const Eigen::RowVectorXd& H,
                                                 double sigma_v2, double s1,
                                                 double s2) {
  if (state.measured)
    throw std::invalid_argument("cond_density_measurement_update: already measured this step");
  if (H.cols() != state.dist.k())
    throw std::invalid_argument("cond_density_measurement_update: H has wrong dimension");
  if (!(s1 < s2))
    throw std::invalid_argument("cond_density_measurement_update: requires s1 < s2");
  const int n = state.dist.n();
  if (n >= CondDensityState::kMeasurementCap)
    throw std::runtime_error("cond_density_measurement_update: measurement cap (" +
                             std::to_string(CondDensityState::kMeasurementCap) +
                             ") reached");

  CondDensityState out;
  out.dist.mu = state.dist.mu;
  out.dist.Sigma = state.dist.Sigma;
  out.dist.D.resize(n + 1, state.dist.k());
  out.dist.D.topRows(n) = state.dist.D;
  out.dist.D.row(n) = H;
  out.dist.s1.resize(n + 1);
  out.dist.s1.head(n) = state.dist.s1;
  out.dist.s1(n) = s1;
  out.dist.s2.resize(n + 1);
  out.dist.s2.head(n) = state.dist.s2;
  out.dist.s2(n) = s2;
  out.dist.Delta = Eigen::MatrixXd::Zero(n + 1, n + 1);
  out.dist.Delta.topLeftCorner(n, n) = state.dist.Delta;
  out.dist.Delta(n, n) = sigma_v2;
  out.time = state.time;
  out.measured = true;
  return out;
}

Eigen::MatrixXd cond_density_R(const CondDensityState& state) {
  return state.dist.omega();
}

CondMoments cond_density_estimate(const CondDensityState& state, int samples,
                                  RngStream rng) {
  validate_gcsn(state.dist);
  const int k = state.dist.k();
  const int n = state.dist.n();
  CondMoments out;
  if (n == 0) {
    out.mean = state.dist.mu;
    out.cov = state.dist.Sigma;
    out.mean_std_error = Eigen::VectorXd::Zero(k);
    out.samples = 0;
    return out;
  }
  if (samples < 2)
    throw std::invalid_argument("cond_density_estimate: needs >= 2 samples");

  Eigen::MatrixXd omega = state.dist.omega();
  Eigen::MatrixXd dsig = state.dist.D * state.dist.Sigma;  // n x k
  Eigen::MatrixXd smap =
      solve_spd(omega, dsig, "cond_density_estimate").transpose();  // k x n
  Eigen::MatrixXd p_kal = symmetrized(state.dist.Sigma - smap * dsig);

  Eigen::MatrixXd u = rejection_sample_truncated(
      MvnBox{Eigen::VectorXd::Zero(n), omega, state.dist.s1, state.dist.s2},
      samples, rng);
  Eigen::VectorXd u_mean = u.rowwise().mean();
  Eigen::MatrixXd centered = u.colwise() - u_mean;
  Eigen::MatrixXd u_cov =
      centered * centered.transpose() / static_cast<double>(samples - 1);

  Eigen::MatrixXd spread = symmetrized(smap * u_cov * smap.transpose());
  out.mean = state.dist.mu + smap * u_mean;
  out.cov = symmetrized(p_kal + spread);
  out.mean_std_error =
      (spread.diagonal() / static_cast<double>(samples)).cwiseMax(0.0).cwiseSqrt();
  out.samples = samples;
  return out;
}

}  // namespace qif
