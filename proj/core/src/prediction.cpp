#include "fwp/prediction.hpp"

#include <cstdio>
#include <string>

#include "fwp/error.hpp"

namespace fwp {

using nlohmann::json;

Eigen::MatrixXd AccumulatorMatrix::dense() const {
  const auto n = static_cast<Eigen::Index>(steps_);
  Eigen::MatrixXd lower = Eigen::MatrixXd::Zero(n, n);
  lower.triangularView<Eigen::Lower>().setConstant(dt_);
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(2 * n, 2 * n);
  a.topLeftCorner(n, n) = lower;
  a.bottomRightCorner(n, n) = lower;
  return a;
}

Eigen::VectorXd AccumulatorMatrix::apply(const Eigen::VectorXd& v) const {
  const auto n = static_cast<Eigen::Index>(steps_);
  if (v.size() != 2 * n) throw Error("invalid_argument", "accumulator input size mismatch");
  Eigen::VectorXd out(2 * n);
  for (Eigen::Index axis = 0; axis < 2; ++axis) {
    double acc = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      acc += v(axis * n + i);
      out(axis * n + i) = dt_ * acc;
    }
  }
  return out;
}

PredictedTrajectory trajectory_from_coefficient_moments(const Eigen::VectorXd& cf_mean,
                                                        const Eigen::MatrixXd& cf_cov,
                                                        const Eigen::Vector2d& anchor,
                                                        double t_pred, double t_f, double rate,
                                                        int degree) {
  const Eigen::Index m = degree + 1;
  if (cf_mean.size() != 2 * m || cf_cov.rows() != 2 * m || cf_cov.cols() != 2 * m) {
    throw Error("invalid_argument", "future coefficient moments have the wrong dimension");
  }
  const std::size_t steps = samples_for(t_f, rate);
  const double dt = 1.0 / rate;
  const Eigen::MatrixXd basis = cheb_basis(steps, degree);  // steps x m
  // Rows of L*E where L is the dt-filled lower-triangular accumulator.
  Eigen::MatrixXd accumulated(basis.rows(), basis.cols());
  Eigen::RowVectorXd running = Eigen::RowVectorXd::Zero(m);
  for (Eigen::Index i = 0; i < basis.rows(); ++i) {
    running += basis.row(i);
    accumulated.row(i) = dt * running;
  }
  PredictedTrajectory out;
  out.t_pred = t_pred;
  out.rate = rate;
  out.means.reserve(steps);
  out.covariances.reserve(steps);
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(2, 2 * m);
  for (Eigen::Index i = 0; i < accumulated.rows(); ++i) {
    g.block(0, 0, 1, m) = accumulated.row(i);
    g.block(1, m, 1, m) = accumulated.row(i);
    out.means.emplace_back(anchor + g * cf_mean);
    const Eigen::Matrix2d cov = g * cf_cov * g.transpose();
    out.covariances.push_back(symmetrize_psd(cov));
  }
  return out;
}

ProbabilisticModel train_probabilistic_model(std::span<const PredictionWindow> windows,
                                             std::optional<ManeuverClass> maneuver,
                                             int num_components, std::uint64_t seed, int degree,
                                             int max_iter, double rel_tol) {
  const ChebEncoder encoder(degree);
  const int dim = encoder.history_dim() + encoder.future_dim();
  Eigen::MatrixXd data(static_cast<Eigen::Index>(windows.size()), dim);
  for (std::size_t i = 0; i < windows.size(); ++i) {
    data.row(static_cast<Eigen::Index>(i)) = encoder.encode_joint(windows[i]).transpose();
  }
  ProbabilisticModel model;
  model.maneuver = maneuver;
  model.degree = degree;
  model.training_rows = windows.size();
  model.offset = data.rows() > 0 ? Eigen::VectorXd(data.colwise().mean().transpose())
                                 : Eigen::VectorXd::Zero(dim);
  model.scale = Eigen::VectorXd::Ones(dim);
  if (data.rows() > 1) {
    const Eigen::MatrixXd centered = data.rowwise() - model.offset.transpose();
    for (Eigen::Index j = 0; j < dim; ++j) {
      const double sd = std::sqrt(centered.col(j).squaredNorm() / static_cast<double>(data.rows()));
      model.scale(j) = sd > 1e-9 ? sd : 1.0;
    }
  }
  const Eigen::MatrixXd standardized =
      (data.rowwise() - model.offset.transpose()).array().rowwise() /
      model.scale.transpose().array();
  VgmmFitOptions opt;
  opt.num_components = num_components;
  opt.seed = seed;
  opt.max_iter = max_iter;
  opt.rel_tol = rel_tol;
  model.posterior = vgmm_fit(standardized, opt);
  return model;
}

MixtureMoments conditional_future_moments(const ProbabilisticModel& model,
                                          const HistorySnippet& snippet, bool map_component) {
  const ChebEncoder encoder(model.degree);
  const Eigen::Index dh = encoder.history_dim();
  const Eigen::Index df = encoder.future_dim();
  const Eigen::VectorXd c_h = encoder.encode_history(snippet);
  const Eigen::VectorXd z_h =
      (c_h - model.offset.head(dh)).array() / model.scale.head(dh).array();
  ConditionalMixture cond = condition(model.posterior, z_h);
  if (map_component) {
    std::size_t best = 0;
    for (std::size_t k = 1; k < cond.components.size(); ++k) {
      if (cond.components[k].weight > cond.components[best].weight) best = k;
    }
    ConditionalComponent only = cond.components[best];
    only.weight = 1.0;
    cond.components = {only};
  }
  MixtureMoments std_moments = mixture_moments(cond);
  const Eigen::VectorXd s = model.scale.tail(df);
  MixtureMoments out;
  out.covariance_defined = std_moments.covariance_defined;
  out.mean = model.offset.tail(df) + s.cwiseProduct(std_moments.mean);
  out.covariance = s.asDiagonal() * std_moments.covariance * s.asDiagonal();
  return out;
}

PredictedTrajectory prob_predict(const ProbabilisticModel& model, const HistorySnippet& snippet,
                                 double t_f, double rate, bool map_component) {
  const MixtureMoments m = conditional_future_moments(model, snippet, map_component);
  const Eigen::Vector2d anchor(snippet.x.back(), snippet.y.back());
  return trajectory_from_coefficient_moments(m.mean, m.covariance, anchor, snippet.t_pred, t_f,
                                             rate, model.degree);
}

PredictedTrajectory fuse(const PredictedTrajectory& motion, const PredictedTrajectory& prob) {
  if (motion.horizon_steps() != prob.horizon_steps() || motion.t_pred != prob.t_pred ||
      motion.rate != prob.rate) {
    throw Error("horizon_mismatch", "cannot fuse trajectories with different horizons");
  }
  PredictedTrajectory out;
  out.t_pred = motion.t_pred;
  out.rate = motion.rate;
  out.means.reserve(motion.horizon_steps());
  out.covariances.reserve(motion.horizon_steps());
  for (std::size_t k = 0; k < motion.horizon_steps(); ++k) {
    out.means.emplace_back(0.5 * (motion.means[k] + prob.means[k]));
    out.covariances.emplace_back(0.5 * (motion.covariances[k] + prob.covariances[k]));
  }
  return out;
}

PredictedTrajectory predict_vehicle(const ModelBundle& bundle, const ImmEstimate& imm,
                                    const HistorySnippet& snippet, const PredictionRoute& route,
                                    double t_f) {
  const PredictedTrajectory motion =
      imm_forecast(imm, t_f, bundle.rate, snippet.t_pred, bundle.imm);
  if (std::holds_alternative<ImmOnlyRoute>(route)) return motion;
  const ProbabilisticModel* model = nullptr;
  if (std::holds_alternative<MonolithicRoute>(route)) {
    if (!bundle.monolithic) throw Error("missing_model", "bundle has no monolithic VGMM");
    model = &*bundle.monolithic;
  } else {
    const auto m = std::get<ManeuverClass>(route);
    const auto& slot = bundle.class_models[index_of(m)];
    if (!slot) {
      throw Error("missing_model", "bundle has no VGMM for " + std::string(to_string(m)));
    }
    model = &*slot;
  }
  return fuse(motion, prob_predict(*model, snippet, t_f, bundle.rate));
}

json to_json(const ProbabilisticModel& model) {
  return {{"maneuver", model.maneuver ? json(std::string(to_string(*model.maneuver))) : json()},
          {"degree", model.degree},
          {"offset", vector_to_json(model.offset)},
          {"scale", vector_to_json(model.scale)},
          {"training_rows", model.training_rows},
          {"posterior", to_json(model.posterior)}};
}

ProbabilisticModel probabilistic_model_from_json(const json& j) {
  ProbabilisticModel m;
  if (!j.at("maneuver").is_null()) {
    m.maneuver = parse_maneuver(j["maneuver"].get<std::string>());
    if (!m.maneuver) throw Error("invalid_model", "unknown maneuver in VGMM model");
  }
  m.degree = j.at("degree").get<int>();
  m.offset = vector_from_json(j.at("offset"));
  m.scale = vector_from_json(j.at("scale"));
  m.training_rows = j.value("training_rows", std::size_t{0});
  m.posterior = vgmm_from_json(j.at("posterior"));
  return m;
}

namespace {

json imm_to_json(const ImmConfig& c) {
  return {{"self_transition", c.self_transition},
          {"sigma_accel", c.noise.sigma_accel},
          {"sigma_jerk", c.noise.sigma_jerk},
          {"sigma_accel_ctrv", c.noise.sigma_accel_ctrv},
          {"sigma_yaw_accel", c.noise.sigma_yaw_accel},
          {"measurement_var", c.noise.measurement_var}};
}

ImmConfig imm_from_json(const json& j) {
  ImmConfig c;
  c.self_transition = j.at("self_transition").get<double>();
  c.noise.sigma_accel = j.at("sigma_accel").get<double>();
  c.noise.sigma_jerk = j.at("sigma_jerk").get<double>();
  c.noise.sigma_accel_ctrv = j.at("sigma_accel_ctrv").get<double>();
  c.noise.sigma_yaw_accel = j.at("sigma_yaw_accel").get<double>();
  c.noise.measurement_var = j.at("measurement_var").get<double>();
  return c;
}

}  // namespace

json to_json(const ModelBundle& bundle) {
  json hmms = json::array();
  for (const auto& h : bundle.hmms) hmms.push_back(to_json(h));
  json classes = json::array();
  for (const auto& c : bundle.class_models) classes.push_back(c ? to_json(*c) : json());
  return {{"format", "fwp-bundle-1"},
          {"config_hash", bundle.config_hash},
          {"experiment", bundle.experiment},
          {"rate", bundle.rate},
          {"degree", bundle.degree},
          {"imm", imm_to_json(bundle.imm)},
          {"hmms", hmms},
          {"class_vgmms", classes},
          {"monolithic_vgmm", bundle.monolithic ? to_json(*bundle.monolithic) : json()}};
}

ModelBundle bundle_from_json(const json& j) {
  try {
    ModelBundle b;
    b.config_hash = j.value("config_hash", std::string{});
    if (j.contains("experiment")) b.experiment = j["experiment"];
    b.rate = j.at("rate").get<double>();
    b.degree = j.at("degree").get<int>();
    b.imm = imm_from_json(j.at("imm"));
    for (const auto& h : j.at("hmms")) b.hmms.push_back(hmm_from_json(h));
    const auto& classes = j.at("class_vgmms");
    if (classes.size() != kNumManeuvers) throw Error("invalid_model", "expected 10 class VGMMs");
    for (std::size_t i = 0; i < kNumManeuvers; ++i) {
      if (!classes[i].is_null()) b.class_models[i] = probabilistic_model_from_json(classes[i]);
    }
    if (!j.at("monolithic_vgmm").is_null()) {
      b.monolithic = probabilistic_model_from_json(j["monolithic_vgmm"]);
    }
    return b;
  } catch (const json::exception& e) {
    throw Error("invalid_model", std::string("malformed bundle: ") + e.what());
  }
}

std::string fnv1a_hex(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string bundle_hash(const ModelBundle& bundle) { return fnv1a_hex(to_json(bundle).dump()); }

}  // namespace fwp
