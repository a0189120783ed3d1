#include "fwp/hmm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "fwp/error.hpp"
#include "fwp/log.hpp"
#include "fwp/rng.hpp"
#include "kmeans.hpp"

namespace fwp {

using nlohmann::json;

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
const double kLog2Pi = std::log(2.0 * std::numbers::pi);

double log_add(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  return a > b ? a + std::log1p(std::exp(b - a)) : b + std::log1p(std::exp(a - b));
}

double safe_log(double p) { return p > 0.0 ? std::log(p) : kNegInf; }

double diag_gauss_log(const HmmFeature& f, const HmmFeature& mean, const HmmFeature& var) {
  double acc = 0.0;
  for (int d = 0; d < kHmmFeatureDim; ++d) {
    const double diff = f[d] - mean[d];
    acc += diff * diff / var[d] + std::log(var[d]) + kLog2Pi;
  }
  return -0.5 * acc;
}

}  // namespace

HmmFeature FeatureScaler::apply(const HmmFeature& f) const {
  HmmFeature out;
  for (int d = 0; d < kHmmFeatureDim; ++d) out[d] = (f[d] - mean[d]) / scale[d];
  return out;
}

FeatureScaler fit_feature_scaler(std::span<const HistorySnippet> snippets) {
  FeatureScaler scaler;
  HmmFeature sum{}, sq{};
  double count = 0.0;
  for (const auto& s : snippets) {
    for (std::size_t t = 0; t < s.size(); ++t) {
      const HmmFeature f{s.x[t], s.y[t], s.vx[t], s.vy[t]};
      for (int d = 0; d < kHmmFeatureDim; ++d) {
        sum[d] += f[d];
        sq[d] += f[d] * f[d];
      }
      count += 1.0;
    }
  }
  if (count == 0.0) return scaler;
  for (int d = 0; d < kHmmFeatureDim; ++d) {
    scaler.mean[d] = sum[d] / count;
    const double var = std::max(sq[d] / count - scaler.mean[d] * scaler.mean[d], 0.0);
    scaler.scale[d] = var > 1e-12 ? std::sqrt(var) : 1.0;
  }
  return scaler;
}

double DiagGaussianMixture::log_density(const HmmFeature& f) const {
  double acc = kNegInf;
  for (std::size_t m = 0; m < weights.size(); ++m) {
    if (weights[m] <= 0.0) continue;
    acc = log_add(acc, std::log(weights[m]) + diag_gauss_log(f, means[m], variances[m]));
  }
  return acc;
}

std::vector<HmmFeature> snippet_features(const HistorySnippet& snippet,
                                         const FeatureScaler& scaler) {
  std::vector<HmmFeature> out(snippet.size());
  for (std::size_t t = 0; t < snippet.size(); ++t) {
    out[t] = scaler.apply({snippet.x[t], snippet.y[t], snippet.vx[t], snippet.vy[t]});
  }
  return out;
}

double hmm_loglik_features(const HmmModel& model, std::span<const HmmFeature> features) {
  const int n = model.n_states();
  if (features.empty()) return 0.0;
  std::vector<double> alpha(static_cast<std::size_t>(n)), next(static_cast<std::size_t>(n));
  for (int j = 0; j < n; ++j) {
    alpha[j] = safe_log(model.initial_probs[j]) + model.emissions[j].log_density(features[0]);
  }
  for (std::size_t t = 1; t < features.size(); ++t) {
    for (int j = 0; j < n; ++j) {
      double acc = kNegInf;
      for (int i = 0; i < n; ++i) {
        const double a = model.transitions(i, j);
        if (a > 0.0) acc = log_add(acc, alpha[i] + std::log(a));
      }
      next[j] = acc == kNegInf ? kNegInf : acc + model.emissions[j].log_density(features[t]);
    }
    alpha.swap(next);
  }
  double total = kNegInf;
  for (double a : alpha) total = log_add(total, a);
  return total;
}

double hmm_loglik(const HmmModel& model, const HistorySnippet& snippet) {
  const auto features = snippet_features(snippet, model.scaler);
  return hmm_loglik_features(model, features);
}

void rank_scores(std::vector<ManeuverScore>& scores) {
  std::stable_sort(scores.begin(), scores.end(), [](const auto& a, const auto& b) {
    if (a.log_likelihood != b.log_likelihood) return a.log_likelihood > b.log_likelihood;
    return index_of(a.maneuver) < index_of(b.maneuver);
  });
}

std::vector<ManeuverScore> classify(std::span<const HmmModel> models,
                                    const HistorySnippet& snippet, std::size_t top_k) {
  std::vector<ManeuverScore> scores;
  scores.reserve(models.size());
  for (const auto& m : models) scores.push_back({m.maneuver, hmm_loglik(m, snippet)});
  rank_scores(scores);
  if (top_k < scores.size()) scores.resize(top_k);
  return scores;
}

namespace {

struct Accumulators {
  std::vector<double> initial;
  Eigen::MatrixXd trans_num;
  std::vector<double> trans_den;
  std::vector<std::vector<double>> occ;            // [state][mix]
  std::vector<std::vector<HmmFeature>> sum, sumsq;  // [state][mix]

  Accumulators(int n, int m)
      : initial(n, 0.0),
        trans_num(Eigen::MatrixXd::Zero(n, n)),
        trans_den(n, 0.0),
        occ(n, std::vector<double>(m, 0.0)),
        sum(n, std::vector<HmmFeature>(m, HmmFeature{})),
        sumsq(n, std::vector<HmmFeature>(m, HmmFeature{})) {}
};

// Forward-backward on one sequence; returns its log-likelihood.
double accumulate(const HmmModel& model, const std::vector<HmmFeature>& obs, Accumulators& acc) {
  const int n = model.n_states();
  const int n_mix = static_cast<int>(model.emissions[0].weights.size());
  const std::size_t T = obs.size();
  // Component log terms and state emission log densities.
  std::vector<double> comp(T * n * n_mix), logb(T * n);
  for (std::size_t t = 0; t < T; ++t) {
    for (int j = 0; j < n; ++j) {
      const auto& e = model.emissions[j];
      double total = kNegInf;
      for (int m = 0; m < n_mix; ++m) {
        const double c = e.weights[m] > 0.0
                             ? std::log(e.weights[m]) + diag_gauss_log(obs[t], e.means[m],
                                                                       e.variances[m])
                             : kNegInf;
        comp[(t * n + j) * n_mix + m] = c;
        total = log_add(total, c);
      }
      logb[t * n + j] = total;
    }
  }
  Eigen::MatrixXd log_a(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) log_a(i, j) = safe_log(model.transitions(i, j));

  std::vector<double> alpha(T * n, kNegInf), beta(T * n, kNegInf);
  for (int j = 0; j < n; ++j) alpha[j] = safe_log(model.initial_probs[j]) + logb[j];
  for (std::size_t t = 1; t < T; ++t) {
    for (int j = 0; j < n; ++j) {
      double s = kNegInf;
      for (int i = 0; i < n; ++i) s = log_add(s, alpha[(t - 1) * n + i] + log_a(i, j));
      alpha[t * n + j] = s == kNegInf ? kNegInf : s + logb[t * n + j];
    }
  }
  for (int j = 0; j < n; ++j) beta[(T - 1) * n + j] = 0.0;
  for (std::size_t t = T - 1; t-- > 0;) {
    for (int i = 0; i < n; ++i) {
      double s = kNegInf;
      for (int j = 0; j < n; ++j) {
        s = log_add(s, log_a(i, j) + logb[(t + 1) * n + j] + beta[(t + 1) * n + j]);
      }
      beta[t * n + i] = s;
    }
  }
  double ll = kNegInf;
  for (int j = 0; j < n; ++j) ll = log_add(ll, alpha[(T - 1) * n + j]);
  if (ll == kNegInf) return ll;

  for (std::size_t t = 0; t < T; ++t) {
    for (int j = 0; j < n; ++j) {
      const double lg = alpha[t * n + j] + beta[t * n + j] - ll;
      if (lg == kNegInf) continue;
      const double gamma = std::exp(lg);
      if (t == 0) acc.initial[j] += gamma;
      if (t + 1 < T) {
        acc.trans_den[j] += gamma;
        for (int k = 0; k < n; ++k) {
          if (log_a(j, k) == kNegInf) continue;
          const double lx = alpha[t * n + j] + log_a(j, k) + logb[(t + 1) * n + k] +
                            beta[(t + 1) * n + k] - ll;
          acc.trans_num(j, k) += std::exp(lx);
        }
      }
      for (int m = 0; m < n_mix; ++m) {
        const double c = comp[(t * n + j) * n_mix + m];
        if (c == kNegInf) continue;
        const double g = gamma * std::exp(c - logb[t * n + j]);
        acc.occ[j][m] += g;
        for (int d = 0; d < kHmmFeatureDim; ++d) {
          acc.sum[j][m][d] += g * obs[t][d];
          acc.sumsq[j][m][d] += g * obs[t][d] * obs[t][d];
        }
      }
    }
  }
  return ll;
}

HmmModel initial_model(const std::vector<std::vector<HmmFeature>>& obs, ManeuverClass maneuver,
                       const HmmTrainOptions& opt, std::size_t& floor_hits) {
  const int n = opt.n_states;
  const int n_mix = opt.n_mix;
  const std::size_t T = obs.front().size();
  HmmModel model;
  model.maneuver = maneuver;
  model.scaler = opt.scaler;
  model.initial_probs.assign(n, 0.0);
  model.initial_probs[0] = 1.0;
  model.transitions = Eigen::MatrixXd::Zero(n, n);
  const double seg_len = std::max(1.0, static_cast<double>(T) / n);
  for (int i = 0; i < n; ++i) {
    if (i + 1 < n) {
      model.transitions(i, i) = 1.0 - 1.0 / seg_len;
      model.transitions(i, i + 1) = 1.0 / seg_len;
    } else {
      model.transitions(i, i) = 1.0;
    }
  }
  for (int j = 0; j < n; ++j) {
    std::vector<HmmFeature> pool;
    for (const auto& seq : obs) {
      for (std::size_t t = 0; t < T; ++t) {
        if (static_cast<int>(t * n / T) == j) pool.push_back(seq[t]);
      }
    }
    if (pool.empty()) pool.push_back(obs.front()[std::min(T - 1, j * T / n)]);
    Eigen::MatrixXd data(static_cast<Eigen::Index>(pool.size()), kHmmFeatureDim);
    for (std::size_t r = 0; r < pool.size(); ++r)
      for (int d = 0; d < kHmmFeatureDim; ++d) data(static_cast<Eigen::Index>(r), d) = pool[r][d];
    const auto km = detail::kmeans(data, n_mix, mix_seed(opt.seed, static_cast<std::uint64_t>(j)));

    HmmFeature pool_mean{}, pool_var{};
    for (int d = 0; d < kHmmFeatureDim; ++d) {
      pool_mean[d] = data.col(d).mean();
      pool_var[d] = (data.col(d).array() - pool_mean[d]).square().mean();
    }
    DiagGaussianMixture e;
    e.weights.assign(n_mix, 0.0);
    e.means.assign(n_mix, pool_mean);
    e.variances.assign(n_mix, pool_var);
    std::vector<double> counts(n_mix, 0.0);
    std::vector<HmmFeature> sums(n_mix, HmmFeature{}), sqs(n_mix, HmmFeature{});
    for (std::size_t r = 0; r < pool.size(); ++r) {
      const int c = km.labels[r];
      counts[c] += 1.0;
      for (int d = 0; d < kHmmFeatureDim; ++d) {
        sums[c][d] += pool[r][d];
        sqs[c][d] += pool[r][d] * pool[r][d];
      }
    }
    double wsum = 0.0;
    for (int m = 0; m < n_mix; ++m) {
      if (counts[m] > 0.0) {
        for (int d = 0; d < kHmmFeatureDim; ++d) {
          e.means[m][d] = sums[m][d] / counts[m];
          e.variances[m][d] = sqs[m][d] / counts[m] - e.means[m][d] * e.means[m][d];
        }
      }
      e.weights[m] = counts[m] + 1e-3;
      wsum += e.weights[m];
      for (int d = 0; d < kHmmFeatureDim; ++d) {
        if (!(e.variances[m][d] >= opt.variance_floor)) {
          e.variances[m][d] = opt.variance_floor;
          ++floor_hits;
        }
      }
    }
    for (double& w : e.weights) w /= wsum;
    model.emissions.push_back(std::move(e));
  }
  return model;
}

void maximize(HmmModel& model, const Accumulators& acc, double n_seq, const HmmTrainOptions& opt,
              std::size_t& floor_hits) {
  const int n = model.n_states();
  for (int j = 0; j < n; ++j) model.initial_probs[j] = acc.initial[j] / n_seq;
  for (int i = 0; i < n; ++i) {
    if (acc.trans_den[i] <= 0.0) continue;
    double row = 0.0;
    for (int j = 0; j < n; ++j) {
      model.transitions(i, j) = model.transitions(i, j) > 0.0 ? acc.trans_num(i, j) / acc.trans_den[i]
                                                              : 0.0;
      row += model.transitions(i, j);
    }
    if (row > 0.0) model.transitions.row(i) /= row;
  }
  for (int j = 0; j < n; ++j) {
    auto& e = model.emissions[j];
    double state_occ = 0.0;
    for (double o : acc.occ[j]) state_occ += o;
    if (state_occ <= 0.0) continue;
    for (std::size_t m = 0; m < e.weights.size(); ++m) {
      const double o = acc.occ[j][m];
      e.weights[m] = o / state_occ;
      if (o <= 0.0) continue;
      for (int d = 0; d < kHmmFeatureDim; ++d) {
        const double mean = acc.sum[j][m][d] / o;
        double var = acc.sumsq[j][m][d] / o - mean * mean;
        if (!(var >= opt.variance_floor)) {
          var = opt.variance_floor;
          ++floor_hits;
        }
        e.means[m][d] = mean;
        e.variances[m][d] = var;
      }
    }
  }
}

}  // namespace

HmmModel hmm_train(std::span<const HistorySnippet> snippets, ManeuverClass maneuver,
                   const HmmTrainOptions& opt) {
  if (snippets.size() < 10) {
    throw Error("insufficient_training_data",
                "insufficient training data for " + std::string(to_string(maneuver)) + " (" +
                    std::to_string(snippets.size()) + " snippets)");
  }
  if (opt.n_states < 1 || opt.n_mix < 1) {
    throw Error("invalid_argument", "HMM needs n_states >= 1 and n_mix >= 1");
  }
  const std::size_t T = snippets.front().size();
  std::vector<std::vector<HmmFeature>> obs;
  obs.reserve(snippets.size());
  for (const auto& s : snippets) {
    if (s.size() != T || T == 0) {
      throw Error("invalid_argument", "HMM training snippets must share a non-zero length");
    }
    obs.push_back(snippet_features(s, opt.scaler));
  }
  std::size_t floor_hits = 0;
  HmmModel model = initial_model(obs, maneuver, opt, floor_hits);
  const double n_seq = static_cast<double>(obs.size());
  double previous = kNegInf;
  for (int iter = 0; iter <= opt.max_iter; ++iter) {
    Accumulators acc(opt.n_states, opt.n_mix);
    double total = 0.0;
    for (const auto& seq : obs) total += accumulate(model, seq, acc);
    model.training_log.push_back(total);
    if (iter > 0 && (total - previous) / n_seq < opt.tol_per_snippet) break;
    if (iter == opt.max_iter) break;
    previous = total;
    maximize(model, acc, n_seq, opt, floor_hits);
  }
  if (floor_hits > 0) {
    log_info("HMM " + std::string(to_string(maneuver)) + ": emission variance floored " +
             std::to_string(floor_hits) + " times");
  }
  return model;
}

json to_json(const HmmModel& model) {
  json j;
  j["maneuver"] = std::string(to_string(model.maneuver));
  j["n_states"] = model.n_states();
  j["initial_probs"] = model.initial_probs;
  json trans = json::array();
  for (Eigen::Index r = 0; r < model.transitions.rows(); ++r) {
    std::vector<double> row(model.transitions.cols());
    for (Eigen::Index c = 0; c < model.transitions.cols(); ++c) row[c] = model.transitions(r, c);
    trans.push_back(row);
  }
  j["transitions"] = trans;
  json em = json::array();
  for (const auto& e : model.emissions) {
    em.push_back({{"weights", e.weights}, {"means", e.means}, {"variances", e.variances}});
  }
  j["emissions"] = em;
  j["scaler"] = {{"mean", model.scaler.mean}, {"scale", model.scaler.scale}};
  j["training_log"] = model.training_log;
  return j;
}

HmmModel hmm_from_json(const json& j) {
  HmmModel m;
  const auto name = j.at("maneuver").get<std::string>();
  const auto parsed = parse_maneuver(name);
  if (!parsed) throw Error("invalid_model", "unknown maneuver '" + name + "'");
  m.maneuver = *parsed;
  m.initial_probs = j.at("initial_probs").get<std::vector<double>>();
  const auto rows = j.at("transitions").get<std::vector<std::vector<double>>>();
  const auto n = static_cast<Eigen::Index>(rows.size());
  m.transitions.resize(n, n);
  for (Eigen::Index r = 0; r < n; ++r)
    for (Eigen::Index c = 0; c < n; ++c) m.transitions(r, c) = rows.at(r).at(c);
  for (const auto& e : j.at("emissions")) {
    DiagGaussianMixture g;
    g.weights = e.at("weights").get<std::vector<double>>();
    g.means = e.at("means").get<std::vector<HmmFeature>>();
    g.variances = e.at("variances").get<std::vector<HmmFeature>>();
    m.emissions.push_back(std::move(g));
  }
  m.scaler.mean = j.at("scaler").at("mean").get<HmmFeature>();
  m.scaler.scale = j.at("scaler").at("scale").get<HmmFeature>();
  if (j.contains("training_log")) m.training_log = j["training_log"].get<std::vector<double>>();
  if (static_cast<Eigen::Index>(m.initial_probs.size()) != n ||
      static_cast<Eigen::Index>(m.emissions.size()) != n) {
    throw Error("invalid_model", "HMM state counts disagree");
  }
  return m;
}

}  // namespace fwp
