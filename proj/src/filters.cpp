#include "qif/filters.hpp"

#include <algorithm>
#include <cfloat>
#include <cmath>
#include <limits>
#include <memory>
#include <stdexcept>

#include "qif/mvn.hpp"

namespace qif {

namespace {

constexpr std::uint64_t kInitId = 0x10;
constexpr std::uint64_t kProcessId = 0x11;
constexpr std::uint64_t kDrawId = 0x12;
constexpr std::uint64_t kResampleId = 0x13;

// Normalizes in place. An all-underflow weight vector falls back to uniform
// weights for the step and reports it, keeping the filter alive.
bool normalize_or_flag(Eigen::VectorXd& w) {
  double total = 0.0;
  for (Eigen::Index i = 0; i < w.size(); ++i) total += w(i);
  if (!(total >= DBL_MIN) || !std::isfinite(total)) {
    w.setConstant(1.0 / static_cast<double>(w.size()));
    return true;
  }
  w /= total;
  return false;
}

double effective_sample_size(const Eigen::VectorXd& normalized) {
  return 1.0 / normalized.squaredNorm();
}

// Truncated draw that never throws: hopeless tails collapse to the interval
// endpoint nearest the mean (the particle dies at resampling anyway).
double safe_truncated_draw(const Interval& iv, double mu, double sd,
                           RngStream& rng) {
  try {
    return sample_truncated_normal(iv, mu, sd, rng);
  } catch (const std::exception&) {
    double edge = mu <= iv.lo ? iv.lo : iv.hi;
    return std::nextafter(edge, mu <= iv.lo ? kInf : -kInf);
  }
}

void validated_or_throw(const StateSpaceModel& model, const char* who) {
  auto violations = validate_model(model);
  if (!violations.empty()) {
    std::string msg = std::string(who) + ": invalid model:";
    for (const auto& v : violations) msg += " [" + v + "]";
    throw std::invalid_argument(msg);
  }
}

void require_step(int n, int expected, const char* who) {
  if (n != expected)
    throw std::invalid_argument(std::string(who) + ": steps must be taken in order, expected " +
                                std::to_string(expected) + " got " + std::to_string(n));
}

}  // namespace

std::vector<int> resample_indices(const Eigen::VectorXd& weights, int count,
                                  RngStream& rng, Resampling method) {
  const int n = static_cast<int>(weights.size());
  if (n < 1 || count < 1)
    throw std::invalid_argument("resample_indices: empty input");
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    if (!(weights(i) >= 0.0))
      throw std::invalid_argument("resample_indices: weights must be nonnegative");
    total += weights(i);
  }
  if (!(total > 0.0) || !std::isfinite(total))
    throw std::invalid_argument("resample_indices: degenerate weights (zero total)");

  std::vector<double> cum(static_cast<size_t>(n));
  double run = 0.0;
  for (int i = 0; i < n; ++i) {
    run += weights(i);
    cum[static_cast<size_t>(i)] = run;
  }
  cum.back() = total;  // guard against round-off at the top

  std::vector<int> out(static_cast<size_t>(count));
  if (method == Resampling::multinomial) {
    for (int j = 0; j < count; ++j) {
      double u = rng.next_open01() * total;
      auto it = std::upper_bound(cum.begin(), cum.end(), u);
      out[static_cast<size_t>(j)] =
          static_cast<int>(std::min<std::ptrdiff_t>(it - cum.begin(), n - 1));
    }
  } else {
    double spacing = total / count;
    double pos = rng.next_open01() * spacing;
    int idx = 0;
    for (int j = 0; j < count; ++j) {
      while (idx < n - 1 && cum[static_cast<size_t>(idx)] <= pos) ++idx;
      out[static_cast<size_t>(j)] = idx;
      pos += spacing;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// StateParticleFilter

StateParticleFilter::StateParticleFilter(const StateSpaceModel& model, int count,
                                         RngStream rng, Resampling resampling,
                                         ExecPolicy exec)
    : model_(model),
      count_(count),
      resampling_(resampling),
      exec_(exec),
      base_(rng) {
  validated_or_throw(model_, "StateParticleFilter");
  if (count_ < 1) throw std::invalid_argument("StateParticleFilter: count >= 1");
  const int d = model_.dim;
  particles_.resize(d, count_);
  scratch_.resize(d, count_);
  weights_.resize(count_);

  Eigen::MatrixXd p0_factor = psd_sampling_factor(clamp_psd(model_.P0));
  RngStream init = base_.substream(kInitId);
  for_index(exec_, count_, [&](int i) {
    RngStream sub = init.substream(static_cast<std::uint64_t>(i));
    Eigen::VectorXd z(d);
    for (int k = 0; k < d; ++k) z(k) = draw_std_normal(sub);
    particles_.col(i) = model_.initial_mean + p0_factor * z;
  });
  if (model_.W.size() == 1)
    noise_factor_ = psd_sampling_factor(clamp_psd(model_.W[0]));
}

ParticleStepResult StateParticleFilter::step(int n, const Interval& iv) {
  require_step(n, expected_n_, "StateParticleFilter");
  const int d = model_.dim;
  const Eigen::RowVectorXd& H = model_.H_at(n);
  const double sigma_v = std::sqrt(model_.sigma_v2_at(n));

  for_index(exec_, count_, [&](int i) {
    weights_(i) = interval_prob(iv, H.dot(particles_.col(i)), sigma_v);
  });

  ParticleStepResult out;
  out.degenerate_weights = normalize_or_flag(weights_);
  out.ess = effective_sample_size(weights_);
  out.filtered = particles_ * weights_;
  out.predicted_next = model_.A_at(n) * out.filtered;

  RngStream rrng = base_.substream(kResampleId).substream(static_cast<std::uint64_t>(n));
  std::vector<int> idx = resample_indices(weights_, count_, rrng, resampling_);
  for (int j = 0; j < count_; ++j) scratch_.col(j) = particles_.col(idx[static_cast<size_t>(j)]);

  const Eigen::MatrixXd& A = model_.A_at(n);
  const Eigen::MatrixXd noise =
      model_.W.size() == 1 ? noise_factor_
                           : psd_sampling_factor(clamp_psd(model_.W_at(n)));
  RngStream draw = base_.substream(kProcessId).substream(static_cast<std::uint64_t>(n));
  for_index(exec_, count_, [&](int j) {
    RngStream sub = draw.substream(static_cast<std::uint64_t>(j));
    Eigen::VectorXd z(d);
    for (int k = 0; k < d; ++k) z(k) = draw_std_normal(sub);
    particles_.col(j) = A * scratch_.col(j) + noise * z;
  });

  ++expected_n_;
  return out;
}

// ---------------------------------------------------------------------------
// MeasurementHistoryFilter

MeasurementHistoryFilter::MeasurementHistoryFilter(const StateSpaceModel& model,
                                                   int count, RngStream rng,
                                                   Resampling resampling,
                                                   ExecPolicy exec)
    : model_(model),
      count_(count),
      resampling_(resampling),
      exec_(exec),
      base_(rng) {
  validated_or_throw(model_, "MeasurementHistoryFilter");
  if (count_ < 1) throw std::invalid_argument("MeasurementHistoryFilter: count >= 1");
  histories_.resize(kHorizonCap + 1, count_);
  scratch_.resize(kHorizonCap + 1, count_);
  weights_.resize(count_);
  ry_.setZero(kHorizonCap + 1, kHorizonCap + 1);
  mean_y_.setZero(kHorizonCap + 1);
}

void MeasurementHistoryFilter::ensure_stats(int n) {
  if (n > kHorizonCap)
    throw std::runtime_error("MeasurementHistoryFilter: horizon cap (" +
                             std::to_string(kHorizonCap) + ") exceeded");
  while (stats_n_ < n) {
    int m = stats_n_ + 1;
    if (m == 0) {
      sigma_x_ = clamp_psd(model_.P0);
      cross_state_ = {sigma_x_};
      mean_x_ = {model_.initial_mean};
    } else {
      const Eigen::MatrixXd& A = model_.A_at(m - 1);
      for (auto& c : cross_state_) c = (c * A.transpose()).eval();
      sigma_x_ = symmetrized(A * sigma_x_ * A.transpose() + model_.W_at(m - 1));
      cross_state_.push_back(sigma_x_);
      mean_x_.push_back(A * mean_x_.back());
    }
    const Eigen::RowVectorXd& Hm = model_.H_at(m);
    for (int j = 0; j < m; ++j) {
      double v = model_.H_at(j) * cross_state_[static_cast<size_t>(j)] * Hm.transpose();
      ry_(j, m) = v;
      ry_(m, j) = v;
    }
    ry_(m, m) = Hm * sigma_x_ * Hm.transpose() + model_.sigma_v2_at(m);
    mean_y_(m) = Hm.dot(mean_x_.back());
    stats_n_ = m;
  }
}

void MeasurementHistoryFilter::solve_for(int n) {
  ensure_stats(n);
  if (solved_n_ == n) return;
  if (n == 0) {
    kvec_.resize(0);
    rdelta_ = ry_(0, 0);
  } else {
    Eigen::MatrixXd lead = ry_.topLeftCorner(n, n);
    Eigen::VectorXd cross = ry_.block(0, n, n, 1);
    Eigen::LDLT<Eigen::MatrixXd> ldlt(lead);
    kvec_ = ldlt.solve(cross);
    if (ldlt.info() != Eigen::Success || !kvec_.allFinite())
      throw std::runtime_error("MeasurementHistoryFilter: R_y is singular");
    rdelta_ = ry_(n, n) - cross.dot(kvec_);
  }
  if (!(rdelta_ > 0.0))
    throw std::runtime_error("MeasurementHistoryFilter: conditional variance not positive");
  solved_n_ = n;
}

double MeasurementHistoryFilter::innovation_variance(int n) {
  solve_for(n);
  return rdelta_;
}

double MeasurementHistoryFilter::prior_measurement_mean(int n) {
  ensure_stats(n);
  return mean_y_(n);
}

ParticleStepResult MeasurementHistoryFilter::step(int n, const Interval& iv,
                                                  const double* injected_draws) {
  require_step(n, expected_n_, "MeasurementHistoryFilter");
  solve_for(n);
  const double sd = std::sqrt(rdelta_);

  // conditional measurement mean per particle given its history
  Eigen::VectorXd means(count_);
  if (n == 0) {
    means.setConstant(mean_y_(0));
  } else {
    double offset = mean_y_(n) - kvec_.dot(mean_y_.head(n));
    means = histories_.topRows(n).transpose() * kvec_;
    means.array() += offset;
  }

  for_index(exec_, count_, [&](int i) {
    weights_(i) = interval_prob(iv, means(i), sd);
  });

  ParticleStepResult out;
  out.degenerate_weights = normalize_or_flag(weights_);
  out.ess = effective_sample_size(weights_);

  RngStream draw = base_.substream(kDrawId).substream(static_cast<std::uint64_t>(n));
  for_index(exec_, count_, [&](int i) {
    if (injected_draws) {
      histories_(n, i) = injected_draws[i];
    } else {
      RngStream sub = draw.substream(static_cast<std::uint64_t>(i));
      histories_(n, i) = safe_truncated_draw(iv, means(i), sd, sub);
    }
  });

  // estimate through the batch Gaussian conditioning of x(n) on the histories
  Eigen::VectorXd ybar = histories_.topRows(n + 1) * weights_;
  Eigen::LDLT<Eigen::MatrixXd> ldlt(ry_.topLeftCorner(n + 1, n + 1));
  Eigen::VectorXd z = ldlt.solve(ybar - mean_y_.head(n + 1));
  if (ldlt.info() != Eigen::Success || !z.allFinite())
    throw std::runtime_error("MeasurementHistoryFilter: R_y is singular");
  Eigen::MatrixXd rxy(model_.dim, n + 1);
  for (int j = 0; j <= n; ++j)
    rxy.col(j) = cross_state_[static_cast<size_t>(j)].transpose() *
                 model_.H_at(j).transpose();
  out.filtered = mean_x_[static_cast<size_t>(n)] + rxy * z;
  out.predicted_next = model_.A_at(n) * out.filtered;

  RngStream rrng = base_.substream(kResampleId).substream(static_cast<std::uint64_t>(n));
  std::vector<int> idx = resample_indices(weights_, count_, rrng, resampling_);
  for (int j = 0; j < count_; ++j)
    scratch_.col(j).head(n + 1) = histories_.col(idx[static_cast<size_t>(j)]).head(n + 1);
  histories_.topRows(n + 1).swap(scratch_.topRows(n + 1));

  ++expected_n_;
  return out;
}

Eigen::MatrixXd MeasurementHistoryFilter::histories() const {
  return histories_.topRows(expected_n_);
}

Eigen::MatrixXd MeasurementHistoryFilter::measurement_covariance() const {
  return ry_.topLeftCorner(stats_n_ + 1, stats_n_ + 1);
}

// ---------------------------------------------------------------------------
// KalmanParticleFilter

KalmanParticleFilter::KalmanParticleFilter(const StateSpaceModel& model,
                                           int count, RngStream rng,
                                           Resampling resampling,
                                           ExecPolicy exec)
    : model_(model),
      count_(count),
      resampling_(resampling),
      exec_(exec),
      base_(rng) {
  validated_or_throw(model_, "KalmanParticleFilter");
  if (count_ < 1) throw std::invalid_argument("KalmanParticleFilter: count >= 1");
  const int d = model_.dim;
  particles_ = model_.initial_mean.replicate(1, count_);
  filtered_.resize(d, count_);
  scratch_.resize(d, count_);
  weights_.resize(count_);
  P_ = clamp_psd(model_.P0);
}

double KalmanParticleFilter::innovation_variance(int n) const {
  require_step(n, expected_n_, "KalmanParticleFilter::innovation_variance");
  const Eigen::RowVectorXd& H = model_.H_at(n);
  return (H * P_ * H.transpose())(0, 0) + model_.sigma_v2_at(n);
}

Eigen::MatrixXd KalmanParticleFilter::shared_filtered_covariance(int n) const {
  require_step(n, expected_n_, "KalmanParticleFilter::shared_filtered_covariance");
  return riccati_measurement_update(P_, model_.H_at(n), model_.sigma_v2_at(n), 1.0);
}

ParticleStepResult KalmanParticleFilter::step(int n, const Interval& iv,
                                              const double* injected_draws) {
  require_step(n, expected_n_, "KalmanParticleFilter");
  const Eigen::RowVectorXd& H = model_.H_at(n);
  const double sigma_v2 = model_.sigma_v2_at(n);
  const double r = (H * P_ * H.transpose())(0, 0) + sigma_v2;
  if (!(r > 0.0)) throw std::runtime_error("KalmanParticleFilter: innovation variance not positive");
  const double sd = std::sqrt(r);
  const Eigen::VectorXd gain = P_ * H.transpose() / r;

  RngStream draw = base_.substream(kDrawId).substream(static_cast<std::uint64_t>(n));
  for_index(exec_, count_, [&](int i) {
    double hx = H.dot(particles_.col(i));
    double y;
    if (injected_draws) {
      y = injected_draws[i];
    } else {
      RngStream sub = draw.substream(static_cast<std::uint64_t>(i));
      y = safe_truncated_draw(iv, hx, sd, sub);
    }
    filtered_.col(i) = particles_.col(i) + gain * (y - hx);
    weights_(i) = interval_prob(iv, hx, sd);
  });

  ParticleStepResult out;
  out.degenerate_weights = normalize_or_flag(weights_);
  out.ess = effective_sample_size(weights_);
  out.filtered = filtered_ * weights_;
  out.predicted_next = model_.A_at(n) * out.filtered;

  RngStream rrng = base_.substream(kResampleId).substream(static_cast<std::uint64_t>(n));
  std::vector<int> idx = resample_indices(weights_, count_, rrng, resampling_);
  for (int j = 0; j < count_; ++j) scratch_.col(j) = filtered_.col(idx[static_cast<size_t>(j)]);
  particles_ = model_.A_at(n) * scratch_;

  // shared covariance advances by the classical (full-information) Riccati
  P_ = symmetrized(model_.A_at(n) *
                       riccati_measurement_update(P_, H, sigma_v2, 1.0) *
                       model_.A_at(n).transpose() +
                   model_.W_at(n));

  ++expected_n_;
  return out;
}

// ---------------------------------------------------------------------------
// run_filter

std::string to_string(FilterKind kind) {
  switch (kind) {
    case FilterKind::full_kf: return "full_kf";
    case FilterKind::soi_kf: return "soi_kf";
    case FilterKind::mlq_kf: return "mlq_kf";
    case FilterKind::pf: return "pf";
    case FilterKind::tnpf: return "tnpf";
    case FilterKind::klpf: return "klpf";
  }
  throw std::invalid_argument("to_string: unknown FilterKind");
}

FilterKind filter_kind_from_string(const std::string& name) {
  if (name == "full_kf") return FilterKind::full_kf;
  if (name == "soi_kf") return FilterKind::soi_kf;
  if (name == "mlq_kf") return FilterKind::mlq_kf;
  if (name == "pf") return FilterKind::pf;
  if (name == "tnpf") return FilterKind::tnpf;
  if (name == "klpf") return FilterKind::klpf;
  throw std::invalid_argument("unknown filter kind: " + name);
}

bool uses_particles(FilterKind kind) {
  return kind == FilterKind::pf || kind == FilterKind::tnpf || kind == FilterKind::klpf;
}

FilterOutput run_filter(FilterKind kind, const StateSpaceModel& model,
                        const QuantizationScheme& scheme,
                        const Trajectory& traj, int particle_count,
                        RngStream rng, const RunOptions& opt) {
  const bool injected = opt.injected != nullptr;
  if (injected && kind == FilterKind::full_kf)
    throw std::invalid_argument("run_filter: full_kf needs the raw measurements");
  const int steps = injected ? static_cast<int>(opt.injected->size())
                             : traj.horizon() + 1;
  if (steps < 1) throw std::invalid_argument("run_filter: empty run");
  if (!injected && traj.states.cols() != steps)
    throw std::invalid_argument("run_filter: trajectory length mismatch");

  const QuantizationScheme scheme_used =
      kind == FilterKind::soi_kf ? QuantizationScheme::sign() : scheme;
  const LambdaScheme gains = lambda_scheme_of(scheme_used);

  FilterOutput out;
  out.steps.reserve(static_cast<size_t>(steps));

  // covariance the fusion center broadcasts for normalization; particle
  // filters without their own P iterate the lambda-Riccati alongside
  Eigen::MatrixXd ric = clamp_psd(model.P0);

  KalmanState lin{model.initial_mean, clamp_psd(model.P0), Phase::predicted};
  std::unique_ptr<StateParticleFilter> pf;
  std::unique_ptr<MeasurementHistoryFilter> tnpf;
  std::unique_ptr<KalmanParticleFilter> klpf;
  if (kind == FilterKind::pf)
    pf = std::make_unique<StateParticleFilter>(model, particle_count, rng,
                                               opt.resampling, opt.exec);
  if (kind == FilterKind::tnpf)
    tnpf = std::make_unique<MeasurementHistoryFilter>(model, particle_count, rng,
                                                      opt.resampling, opt.exec);
  if (kind == FilterKind::klpf)
    klpf = std::make_unique<KalmanParticleFilter>(model, particle_count, rng,
                                                  opt.resampling, opt.exec);

  Eigen::VectorXd xpred = model.initial_mean;

  for (int n = 0; n < steps; ++n) {
    const Eigen::RowVectorXd& H = model.H_at(n);
    const double sigma_v2 = model.sigma_v2_at(n);

    QuantizerSignal sig;
    if (injected) {
      sig = (*opt.injected)[static_cast<size_t>(n)];
    } else {
      switch (kind) {
        case FilterKind::full_kf:
        case FilterKind::soi_kf:
        case FilterKind::mlq_kf:
          sig.yhat = H.dot(lin.xhat);
          sig.std_dev = std::sqrt((H * lin.P * H.transpose())(0, 0) + sigma_v2);
          break;
        case FilterKind::pf:
          sig.yhat = H.dot(xpred);
          sig.std_dev = std::sqrt((H * ric * H.transpose())(0, 0) + sigma_v2);
          break;
        case FilterKind::tnpf:
          sig.yhat = H.dot(xpred);
          sig.std_dev = std::sqrt(tnpf->innovation_variance(n));
          break;
        case FilterKind::klpf:
          sig.yhat = H.dot(xpred);
          sig.std_dev = opt.klpf_std_from_modified_riccati
                            ? std::sqrt((H * ric * H.transpose())(0, 0) + sigma_v2)
                            : std::sqrt(klpf->innovation_variance(n));
          break;
      }
      sig.label = quantize(scheme_used,
                           (traj.measurements(n) - sig.yhat) / sig.std_dev);
      Interval meas = measurement_interval(interval_of(scheme_used, sig.label),
                                           sig.yhat, sig.std_dev);
      sig.s1 = meas.lo;
      sig.s2 = meas.hi;
    }
    Interval iv(sig.s1, sig.s2);

    FilterStep rec;
    rec.signal = sig;
    rec.cov_trace = std::numeric_limits<double>::quiet_NaN();
    switch (kind) {
      case FilterKind::full_kf: {
        KalmanState f = kf_measurement_update(lin, H, sigma_v2, traj.measurements(n));
        rec.filtered = f.xhat;
        rec.ess = std::numeric_limits<double>::quiet_NaN();
        rec.cov_trace = f.P.trace();
        lin = kf_time_update(f, model.A_at(n), model.W_at(n));
        rec.predicted_next = lin.xhat;
        break;
      }
      case FilterKind::soi_kf:
      case FilterKind::mlq_kf: {
        QuantizedLinearStep qs = quantized_linear_filter_step(
            lin, model.A_at(n), model.W_at(n), H, sigma_v2, gains, sig.label);
        rec.filtered = qs.filtered.xhat;
        rec.ess = std::numeric_limits<double>::quiet_NaN();
        rec.cov_trace = qs.filtered.P.trace();
        lin = qs.predicted_next;
        rec.predicted_next = lin.xhat;
        break;
      }
      case FilterKind::pf: {
        ParticleStepResult r = pf->step(n, iv);
        rec.filtered = r.filtered;
        rec.predicted_next = r.predicted_next;
        rec.ess = r.ess;
        rec.degenerate_weights = r.degenerate_weights;
        break;
      }
      case FilterKind::tnpf: {
        ParticleStepResult r = tnpf->step(n, iv);
        rec.filtered = r.filtered;
        rec.predicted_next = r.predicted_next;
        rec.ess = r.ess;
        rec.degenerate_weights = r.degenerate_weights;
        break;
      }
      case FilterKind::klpf: {
        rec.cov_trace =
            klpf->shared_filtered_covariance(n).trace();
        ParticleStepResult r = klpf->step(n, iv, nullptr);
        rec.filtered = r.filtered;
        rec.predicted_next = r.predicted_next;
        rec.ess = r.ess;
        rec.degenerate_weights = r.degenerate_weights;
        break;
      }
    }
    xpred = rec.predicted_next;
    if (uses_particles(kind) || kind == FilterKind::soi_kf ||
        kind == FilterKind::mlq_kf || kind == FilterKind::full_kf) {
      if (kind == FilterKind::pf ||
          (kind == FilterKind::klpf && opt.klpf_std_from_modified_riccati))
        ric = modified_riccati_step(ric, model.A_at(n), model.W_at(n), H,
                                    sigma_v2, gains.lambda);
    }
    out.steps.push_back(std::move(rec));
  }
  return out;
}

}  // namespace qif
