#include "fwp/imm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "fwp/error.hpp"
#include "fwp/log.hpp"

namespace fwp {

Eigen::Matrix3d ImmConfig::transition_matrix() const {
  const double off = (1.0 - self_transition) / 2.0;
  Eigen::Matrix3d t = Eigen::Matrix3d::Constant(off);
  t.diagonal().setConstant(self_transition);
  return t;
}

namespace {

constexpr std::array<MotionModel, kNumMotionModels> kModels = {MotionModel::CV, MotionModel::CA,
                                                               MotionModel::CTRV};

double wrap_angle(double a) { return std::remainder(a, 2.0 * std::numbers::pi); }

// Speeds below this leave the heading unobservable.
constexpr double kMinSpeedForHeading = 1e-3;

// Expresses `source` in the state space of `target_kind`. Entries the source
// does not carry are imputed (a = 0, omega = 0) with the variance the target
// filter currently holds for them, uncorrelated with the rest.
void convert_state(const FilterState& source, const FilterState& target,
                   Eigen::VectorXd& mean, Eigen::MatrixXd& cov) {
  if (source.kind == target.kind) {
    mean = source.mean;
    cov = source.covariance;
    return;
  }
  Eigen::Vector4d cm;
  Eigen::Matrix4d cc;
  to_cartesian(source, cm, cc);
  switch (target.kind) {
    case MotionModel::CV:
      mean = cm;
      cov = cc;
      return;
    case MotionModel::CA:
      mean = Eigen::VectorXd::Zero(6);
      cov = Eigen::MatrixXd::Zero(6, 6);
      mean.head<4>() = cm;
      cov.topLeftCorner<4, 4>() = cc;
      cov.bottomRightCorner<2, 2>() = target.covariance.bottomRightCorner<2, 2>();
      return;
    case MotionModel::CTRV: {
      const double vx = cm(2), vy = cm(3);
      const double speed = std::hypot(vx, vy);
      mean = Eigen::VectorXd::Zero(5);
      cov = Eigen::MatrixXd::Zero(5, 5);
      mean(0) = cm(0);
      mean(1) = cm(1);
      mean(3) = speed;
      Eigen::Matrix<double, 4, 4> jac = Eigen::Matrix4d::Zero();  // (x, y, theta, v)
      jac(0, 0) = 1.0;
      jac(1, 1) = 1.0;
      if (speed > kMinSpeedForHeading) {
        mean(2) = std::atan2(vy, vx);
        jac(2, 2) = -vy / (speed * speed);
        jac(2, 3) = vx / (speed * speed);
        jac(3, 2) = vx / speed;
        jac(3, 3) = vy / speed;
        cov.topLeftCorner<4, 4>() = jac * cc * jac.transpose();
      } else {
        mean(2) = target.mean(2);
        cov.topLeftCorner<2, 2>() = cc.topLeftCorner<2, 2>();
        cov(2, 2) = target.covariance(2, 2);
        cov(3, 3) = 0.5 * (cc(2, 2) + cc(3, 3));
      }
      cov(4, 4) = target.covariance(4, 4);
      return;
    }
  }
}

double log_sum_exp(const Eigen::Vector3d& v) {
  const double m = v.maxCoeff();
  if (!std::isfinite(m)) return m;
  return m + std::log((v.array() - m).exp().sum());
}

}  // namespace

ImmEstimate imm_init(const Eigen::Vector2d& position, const Eigen::Vector2d& velocity,
                     const ImmConfig& config) {
  ImmEstimate est;
  est.transition = config.transition_matrix();
  est.model_probs = Eigen::Vector3d::Constant(1.0 / 3.0);

  FilterState cv{MotionModel::CV, Eigen::VectorXd::Zero(4), Eigen::MatrixXd::Zero(4, 4)};
  cv.mean << position, velocity;
  cv.covariance.diagonal() << 1.0, 1.0, 4.0, 4.0;

  FilterState ca{MotionModel::CA, Eigen::VectorXd::Zero(6), Eigen::MatrixXd::Zero(6, 6)};
  ca.mean.head<4>() = cv.mean;
  ca.covariance.diagonal() << 1.0, 1.0, 4.0, 4.0, 9.0, 9.0;

  FilterState ctrv{MotionModel::CTRV, Eigen::VectorXd::Zero(5), Eigen::MatrixXd::Zero(5, 5)};
  ctrv.mean(0) = position.x();
  ctrv.mean(1) = position.y();
  ctrv.mean(2) = velocity.norm() > kMinSpeedForHeading ? std::atan2(velocity.y(), velocity.x())
                                                       : 0.0;
  ctrv.mean(3) = velocity.norm();
  ctrv.covariance.diagonal() << 1.0, 1.0, 1.0, 4.0, 0.25;

  est.filters = {cv, ca, ctrv};
  return est;
}

Eigen::Vector3d imm_update_probs(const Eigen::Vector3d& prior_probs,
                                 const Eigen::Matrix3d& transition,
                                 const Eigen::Vector3d& log_likelihoods) {
  const Eigen::Vector3d predicted = transition.transpose() * prior_probs;
  Eigen::Vector3d log_post;
  for (int j = 0; j < 3; ++j) {
    log_post(j) = predicted(j) > 0.0 ? std::log(predicted(j)) + log_likelihoods(j)
                                     : -std::numeric_limits<double>::infinity();
  }
  const double norm = log_sum_exp(log_post);
  if (!std::isfinite(norm)) {
    log_warning("IMM: all model likelihoods underflowed; using uniform probabilities");
    return Eigen::Vector3d::Constant(1.0 / 3.0);
  }
  Eigen::Vector3d post = (log_post.array() - norm).exp();
  post /= post.sum();
  return post;
}

ImmEstimate imm_step(const ImmEstimate& est, const Eigen::Vector2d& observation, double dt,
                     const ImmConfig& config) {
  const Eigen::Matrix3d& trans = est.transition;
  const Eigen::Vector3d predicted = trans.transpose() * est.model_probs;

  ImmEstimate out;
  out.transition = trans;
  Eigen::Vector3d log_lik;
  for (int j = 0; j < kNumMotionModels; ++j) {
    const FilterState& target = est.filters[j];
    // Mixing weights mu_{i|j}.
    Eigen::Vector3d w = Eigen::Vector3d::Zero();
    for (int i = 0; i < kNumMotionModels; ++i) {
      w(i) = predicted(j) > 0.0 ? trans(i, j) * est.model_probs(i) / predicted(j) : 0.0;
    }
    if (!(w.sum() > 0.0)) w = Eigen::Vector3d::Unit(j);

    std::array<Eigen::VectorXd, kNumMotionModels> means;
    std::array<Eigen::MatrixXd, kNumMotionModels> covs;
    for (int i = 0; i < kNumMotionModels; ++i) {
      convert_state(est.filters[i], target, means[i], covs[i]);
    }
    const int n = state_dim(target.kind);
    // Headings are averaged as offsets from the target's own heading.
    const double ref_theta = target.kind == MotionModel::CTRV ? target.mean(2) : 0.0;
    if (target.kind == MotionModel::CTRV) {
      for (auto& m : means) m(2) = ref_theta + wrap_angle(m(2) - ref_theta);
    }
    Eigen::VectorXd mixed = Eigen::VectorXd::Zero(n);
    for (int i = 0; i < kNumMotionModels; ++i) mixed += w(i) * means[i];
    Eigen::MatrixXd mixed_cov = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < kNumMotionModels; ++i) {
      const Eigen::VectorXd d = means[i] - mixed;
      mixed_cov += w(i) * (covs[i] + d * d.transpose());
    }
    if (target.kind == MotionModel::CTRV) mixed(2) = wrap_angle(mixed(2));

    const FilterState prior =
        filter_predict(FilterState{target.kind, mixed, mixed_cov}, dt, config.noise);
    const FilterUpdate upd = filter_update(prior, observation, config.noise.measurement_cov());
    out.filters[j] = upd.state;
    log_lik(j) = upd.log_likelihood;
  }
  out.model_probs = imm_update_probs(est.model_probs, trans, log_lik);
  return out;
}

ImmEstimate imm_filter_snippet(const HistorySnippet& snippet, double rate,
                               const ImmConfig& config) {
  if (snippet.size() < 2) throw Error("invalid_argument", "IMM needs at least two samples");
  const double dt = 1.0 / rate;
  const Eigen::Vector2d p0(snippet.x[0], snippet.y[0]);
  const Eigen::Vector2d p1(snippet.x[1], snippet.y[1]);
  ImmEstimate est = imm_init(p1, (p1 - p0) * rate, config);
  for (std::size_t i = 2; i < snippet.size(); ++i) {
    est = imm_step(est, Eigen::Vector2d(snippet.x[i], snippet.y[i]), dt, config);
  }
  return est;
}

PredictedTrajectory single_model_forecast(const FilterState& state, double t_f, double rate,
                                          double t_pred, const MotionNoise& noise) {
  PredictedTrajectory out;
  out.t_pred = t_pred;
  out.rate = rate;
  const std::size_t steps = samples_for(t_f, rate);
  FilterState s = state;
  for (std::size_t k = 0; k < steps; ++k) {
    s = filter_predict(s, 1.0 / rate, noise);
    out.means.emplace_back(s.mean.head<2>());
    out.covariances.push_back(symmetrize_psd(s.covariance.topLeftCorner<2, 2>()));
  }
  return out;
}

PredictedTrajectory imm_forecast(const ImmEstimate& est, double t_f, double rate, double t_pred,
                                 const ImmConfig& config) {
  if (!(t_f > 0.0)) throw Error("invalid_argument", "imm_forecast requires t_f > 0");
  PredictedTrajectory out;
  out.t_pred = t_pred;
  out.rate = rate;
  const std::size_t steps = samples_for(t_f, rate);
  std::array<FilterState, kNumMotionModels> states = est.filters;
  out.means.reserve(steps);
  out.covariances.reserve(steps);
  for (std::size_t k = 0; k < steps; ++k) {
    Eigen::Vector2d mean = Eigen::Vector2d::Zero();
    for (int i = 0; i < kNumMotionModels; ++i) {
      if (est.model_probs(i) > 0.0) {
        states[i] = filter_predict(states[i], 1.0 / rate, config.noise);
        mean += est.model_probs(i) * states[i].mean.head<2>();
      }
    }
    Eigen::Matrix2d cov = Eigen::Matrix2d::Zero();
    for (int i = 0; i < kNumMotionModels; ++i) {
      if (est.model_probs(i) > 0.0) {
        const Eigen::Vector2d d = states[i].mean.head<2>() - mean;
        cov += est.model_probs(i) *
               (states[i].covariance.topLeftCorner<2, 2>() + d * d.transpose());
      }
    }
    out.means.push_back(mean);
    out.covariances.push_back(symmetrize_psd(cov));
  }
  return out;
}

}  // namespace fwp
