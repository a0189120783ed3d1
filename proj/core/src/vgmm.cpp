#include "fwp/vgmm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include <Eigen/Cholesky>
#include <boost/math/special_functions/digamma.hpp>

#include "fwp/error.hpp"
#include "fwp/log.hpp"
#include "kmeans.hpp"

namespace fwp {

using nlohmann::json;

namespace {

const double kLogPi = std::log(std::numbers::pi);
const double kLog2Pi = std::log(2.0 * std::numbers::pi);
constexpr double kJitter = 1e-8;
constexpr double kTinyCount = 1e-10;

double digamma(double x) { return boost::math::digamma(x); }

double log_det_llt(const Eigen::LLT<Eigen::MatrixXd>& llt) {
  return 2.0 * llt.matrixLLT().diagonal().array().log().sum();
}

// Cholesky with diagonal jitter on failure.
Eigen::LLT<Eigen::MatrixXd> robust_llt(const Eigen::MatrixXd& m, const char* what) {
  Eigen::LLT<Eigen::MatrixXd> llt(m);
  if (llt.info() == Eigen::Success) return llt;
  log_warning(std::string(what) + ": matrix not positive definite, adding jitter");
  const Eigen::Index n = m.rows();
  const double base = std::max(1.0, m.diagonal().cwiseAbs().maxCoeff());
  for (double eps = kJitter; eps < 1e6; eps *= 10.0) {
    llt.compute(m + eps * base * Eigen::MatrixXd::Identity(n, n));
    if (llt.info() == Eigen::Success) return llt;
  }
  throw Error("numerical_failure", std::string(what) + ": cannot factor matrix");
}

// ln B(W, nu) of the Wishart normalizer.
double log_wishart_b(double log_det_w, double nu, int d) {
  double acc = -0.5 * nu * log_det_w - 0.5 * nu * d * std::log(2.0) -
               0.25 * d * (d - 1) * kLogPi;
  for (int i = 1; i <= d; ++i) acc -= std::lgamma(0.5 * (nu + 1 - i));
  return acc;
}

// E[ln |Lambda|] under Wishart(W, nu).
double expected_log_det(double log_det_w, double nu, int d) {
  double acc = d * std::log(2.0) + log_det_w;
  for (int i = 1; i <= d; ++i) acc += digamma(0.5 * (nu + 1 - i));
  return acc;
}

double log_dirichlet_c(const std::vector<double>& alpha) {
  double sum = 0.0, acc = 0.0;
  for (double a : alpha) {
    sum += a;
    acc -= std::lgamma(a);
  }
  return acc + std::lgamma(sum);
}

struct Statistics {
  Eigen::VectorXd counts;                // N_k
  std::vector<Eigen::VectorXd> means;    // xbar_k
  std::vector<Eigen::MatrixXd> scatter;  // N_k S_k
};

Statistics gather(const Eigen::MatrixXd& x, const Eigen::VectorXd& w, const Eigen::MatrixXd& r,
                  const VgmmPrior& prior) {
  const Eigen::Index k_count = r.cols();
  Statistics st;
  st.counts.resize(k_count);
  for (Eigen::Index k = 0; k < k_count; ++k) {
    const Eigen::VectorXd wr = w.cwiseProduct(r.col(k));
    const double nk = wr.sum();
    st.counts(k) = nk;
    if (nk < kTinyCount) {
      st.means.push_back(prior.m0);
      st.scatter.push_back(Eigen::MatrixXd::Zero(x.cols(), x.cols()));
      continue;
    }
    const Eigen::VectorXd mean = (x.transpose() * wr) / nk;
    const Eigen::MatrixXd centered = x.rowwise() - mean.transpose();
    st.scatter.push_back(centered.transpose() * wr.asDiagonal() * centered);
    st.means.push_back(mean);
  }
  return st;
}

void maximize(const Statistics& st, const VgmmPrior& prior, const Eigen::MatrixXd& w0_inv,
              VgmmPosterior& post) {
  const Eigen::Index k_count = st.counts.size();
  post.components.resize(static_cast<std::size_t>(k_count));
  for (Eigen::Index k = 0; k < k_count; ++k) {
    auto& c = post.components[static_cast<std::size_t>(k)];
    const double nk = st.counts(k);
    c.alpha = prior.alpha0 + nk;
    c.beta = prior.beta0 + nk;
    c.nu = prior.nu0 + nk;
    c.mean = (prior.beta0 * prior.m0 + nk * st.means[k]) / c.beta;
    const Eigen::VectorXd d = st.means[k] - prior.m0;
    Eigen::MatrixXd w_inv = w0_inv + st.scatter[k] +
                            (prior.beta0 * nk / (prior.beta0 + nk)) * d * d.transpose();
    w_inv = 0.5 * (w_inv + w_inv.transpose()).eval();
    const auto llt = robust_llt(w_inv, "VGMM W update");
    c.W = llt.solve(Eigen::MatrixXd::Identity(w_inv.rows(), w_inv.cols()));
    c.W = 0.5 * (c.W + c.W.transpose()).eval();
  }
}

struct ComponentExpectations {
  std::vector<double> log_pi;      // E[ln pi_k]
  std::vector<double> log_lambda;  // E[ln |Lambda_k|]
  std::vector<double> log_det_w;
};

ComponentExpectations expectations(const VgmmPosterior& post) {
  const int d = post.dim;
  ComponentExpectations e;
  double alpha_sum = 0.0;
  for (const auto& c : post.components) alpha_sum += c.alpha;
  const double psi_sum = digamma(alpha_sum);
  for (const auto& c : post.components) {
    const Eigen::LLT<Eigen::MatrixXd> llt(c.W);
    const double ldw = log_det_llt(llt);
    e.log_det_w.push_back(ldw);
    e.log_pi.push_back(digamma(c.alpha) - psi_sum);
    e.log_lambda.push_back(expected_log_det(ldw, c.nu, d));
  }
  return e;
}

// Responsibilities given the current posterior.
Eigen::MatrixXd expectation(const Eigen::MatrixXd& x, const VgmmPosterior& post,
                            const ComponentExpectations& e) {
  const int d = post.dim;
  const Eigen::Index n = x.rows();
  const auto k_count = static_cast<Eigen::Index>(post.components.size());
  Eigen::MatrixXd log_rho(n, k_count);
  for (Eigen::Index k = 0; k < k_count; ++k) {
    const auto& c = post.components[static_cast<std::size_t>(k)];
    const Eigen::LLT<Eigen::MatrixXd> llt(c.W);
    const Eigen::MatrixXd l = llt.matrixL();
    const Eigen::MatrixXd centered = x.rowwise() - c.mean.transpose();
    const Eigen::VectorXd maha = (centered * l).rowwise().squaredNorm();
    log_rho.col(k) = (e.log_pi[k] + 0.5 * e.log_lambda[k] - 0.5 * d * kLog2Pi -
                      0.5 * d / c.beta) -
                     0.5 * c.nu * maha.array();
  }
  const Eigen::VectorXd row_max = log_rho.rowwise().maxCoeff();
  Eigen::MatrixXd r = (log_rho.colwise() - row_max).array().exp();
  const Eigen::VectorXd sums = r.rowwise().sum();
  for (Eigen::Index i = 0; i < n; ++i) r.row(i) /= sums(i);
  return r;
}

double lower_bound(const Eigen::VectorXd& w, const Eigen::MatrixXd& r, const Statistics& st,
                   const VgmmPosterior& post, const Eigen::MatrixXd& w0_inv) {
  const int d = post.dim;
  const auto& prior = post.prior;
  const auto e = expectations(post);
  const int k_count = post.num_components();
  const double log_det_w0 = log_det_llt(Eigen::LLT<Eigen::MatrixXd>(prior.W0));

  double e_lik = 0.0, e_z = 0.0, e_pi = 0.0, e_mu = 0.0, e_qpi = 0.0, e_qmu = 0.0;
  std::vector<double> alphas;
  for (int k = 0; k < k_count; ++k) {
    const auto& c = post.components[static_cast<std::size_t>(k)];
    const double nk = st.counts(k);
    alphas.push_back(c.alpha);
    const Eigen::VectorXd dm = st.means[k] - c.mean;
    const double tr_sw = (st.scatter[k].cwiseProduct(c.W)).sum();  // N_k Tr(S_k W_k)
    e_lik += 0.5 * (nk * (e.log_lambda[k] - d / c.beta - c.nu * dm.dot(c.W * dm) - d * kLog2Pi) -
                    c.nu * tr_sw);
    e_z += nk * e.log_pi[k];
    e_pi += (prior.alpha0 - 1.0) * e.log_pi[k];
    const Eigen::VectorXd d0 = c.mean - prior.m0;
    e_mu += 0.5 * (d * std::log(prior.beta0 / (2.0 * std::numbers::pi)) + e.log_lambda[k] -
                   d * prior.beta0 / c.beta - prior.beta0 * c.nu * d0.dot(c.W * d0)) +
            0.5 * (prior.nu0 - d - 1.0) * e.log_lambda[k] -
            0.5 * c.nu * (w0_inv.cwiseProduct(c.W)).sum();
    e_qpi += (c.alpha - 1.0) * e.log_pi[k];
    const double entropy = -log_wishart_b(e.log_det_w[k], c.nu, d) -
                           0.5 * (c.nu - d - 1.0) * e.log_lambda[k] + 0.5 * c.nu * d;
    e_qmu += 0.5 * e.log_lambda[k] + 0.5 * d * std::log(c.beta / (2.0 * std::numbers::pi)) -
             0.5 * d - entropy;
  }
  e_pi += log_dirichlet_c(std::vector<double>(static_cast<std::size_t>(k_count), prior.alpha0));
  e_mu += k_count * log_wishart_b(log_det_w0, prior.nu0, d);
  e_qpi += log_dirichlet_c(alphas);
  double e_qz = 0.0;
  for (Eigen::Index i = 0; i < r.rows(); ++i) {
    for (Eigen::Index k = 0; k < r.cols(); ++k) {
      const double v = r(i, k);
      if (v > 0.0) e_qz += w(i) * v * std::log(v);
    }
  }
  return e_lik + e_z + e_pi + e_mu - e_qz - e_qpi - e_qmu;
}

}  // namespace

VgmmPrior default_vgmm_prior(const Eigen::MatrixXd& data, int num_components) {
  const auto d = data.cols();
  VgmmPrior p;
  p.alpha0 = 1.0 / num_components;
  p.beta0 = 1.0;
  p.nu0 = static_cast<double>(d) + 2.0;
  p.m0 = data.colwise().mean().transpose();
  const Eigen::MatrixXd centered = data.rowwise() - p.m0.transpose();
  Eigen::VectorXd var = centered.colwise().squaredNorm().transpose() /
                        static_cast<double>(std::max<Eigen::Index>(data.rows(), 1));
  for (Eigen::Index i = 0; i < d; ++i) {
    if (!(var(i) > 1e-12)) var(i) = 1.0;
  }
  p.W0 = Eigen::MatrixXd::Zero(d, d);
  p.W0.diagonal() = var.cwiseInverse() / p.nu0;
  return p;
}

VgmmPosterior vgmm_fit(const Eigen::MatrixXd& data, const VgmmFitOptions& opt) {
  const Eigen::Index n = data.rows();
  const int k_count = opt.num_components;
  if (k_count < 1 || k_count > n) {
    throw Error("invalid_argument", "VGMM needs 1 <= K <= rows (K=" + std::to_string(k_count) +
                                        ", rows=" + std::to_string(n) + ")");
  }
  Eigen::VectorXd w = Eigen::VectorXd::Ones(n);
  if (!opt.row_weights.empty()) {
    if (static_cast<Eigen::Index>(opt.row_weights.size()) != n) {
      throw Error("invalid_argument", "row_weights length differs from data rows");
    }
    w = Eigen::Map<const Eigen::VectorXd>(opt.row_weights.data(), n);
  }

  VgmmPosterior post;
  post.dim = static_cast<int>(data.cols());
  post.prior = opt.prior ? *opt.prior : default_vgmm_prior(data, k_count);
  const Eigen::MatrixXd w0_inv = robust_llt(post.prior.W0, "VGMM prior")
                                     .solve(Eigen::MatrixXd::Identity(data.cols(), data.cols()));

  Eigen::MatrixXd r;
  if (opt.initial_responsibilities) {
    r = *opt.initial_responsibilities;
    if (r.rows() != n || r.cols() != k_count) {
      throw Error("invalid_argument", "initial responsibilities have the wrong shape");
    }
  } else {
    const auto km = detail::kmeans(data, k_count, opt.seed);
    r = Eigen::MatrixXd::Zero(n, k_count);
    for (Eigen::Index i = 0; i < n; ++i) r(i, km.labels[static_cast<std::size_t>(i)]) = 1.0;
  }

  double previous = -std::numeric_limits<double>::infinity();
  for (int iter = 0; iter < opt.max_iter; ++iter) {
    const Statistics st = gather(data, w, r, post.prior);
    maximize(st, post.prior, w0_inv, post);
    const double elbo = lower_bound(w, r, st, post, w0_inv);
    post.elbo_history.push_back(elbo);
    if (iter > 0 && elbo - previous < opt.rel_tol * std::abs(elbo)) break;
    previous = elbo;
    if (iter + 1 < opt.max_iter) r = expectation(data, post, expectations(post));
  }
  return post;
}

double student_t_log_density(const StudentT& dist, const Eigen::VectorXd& x) {
  const auto d = static_cast<double>(x.size());
  const auto llt = robust_llt(dist.scale, "Student-t scale");
  const Eigen::VectorXd diff = x - dist.mean;
  const double maha = diff.dot(llt.solve(diff));
  const double nu = dist.dof;
  return std::lgamma(0.5 * (nu + d)) - std::lgamma(0.5 * nu) - 0.5 * d * std::log(nu * std::numbers::pi) -
         0.5 * log_det_llt(llt) - 0.5 * (nu + d) * std::log1p(maha / nu);
}

StudentT predictive_component(const VgmmPosterior& post, int k) {
  const auto& c = post.components.at(static_cast<std::size_t>(k));
  StudentT t;
  t.dof = c.nu + 1.0 - post.dim;
  t.mean = c.mean;
  const Eigen::MatrixXd w_inv =
      robust_llt(c.W, "VGMM W").solve(Eigen::MatrixXd::Identity(post.dim, post.dim));
  t.scale = ((1.0 + c.beta) / (t.dof * c.beta)) * w_inv;
  t.scale = 0.5 * (t.scale + t.scale.transpose()).eval();
  return t;
}

double predictive_log_density(const VgmmPosterior& post, const Eigen::VectorXd& c) {
  double alpha_sum = 0.0;
  for (const auto& comp : post.components) alpha_sum += comp.alpha;
  double acc = -std::numeric_limits<double>::infinity();
  for (int k = 0; k < post.num_components(); ++k) {
    const double term = std::log(post.components[static_cast<std::size_t>(k)].alpha / alpha_sum) +
                        student_t_log_density(predictive_component(post, k), c);
    const double hi = std::max(acc, term);
    if (hi == -std::numeric_limits<double>::infinity()) continue;
    acc = hi + std::log(std::exp(acc - hi) + std::exp(term - hi));
  }
  return acc;
}

double predictive_density(const VgmmPosterior& post, const Eigen::VectorXd& c) {
  return std::exp(predictive_log_density(post, c));
}

ConditionalMixture condition(const VgmmPosterior& post, const Eigen::VectorXd& c_h) {
  const auto dh = c_h.size();
  const auto df = post.dim - dh;
  if (dh <= 0 || df <= 0) {
    throw Error("invalid_argument", "condition: history dimension must lie in (0, dim)");
  }
  ConditionalMixture out;
  std::vector<double> log_w;
  for (int k = 0; k < post.num_components(); ++k) {
    const StudentT joint = predictive_component(post, k);
    const Eigen::MatrixXd s_hh = joint.scale.topLeftCorner(dh, dh);
    const Eigen::MatrixXd s_fh = joint.scale.bottomLeftCorner(df, dh);
    const Eigen::MatrixXd s_ff = joint.scale.bottomRightCorner(df, df);
    Eigen::LLT<Eigen::MatrixXd> llt(s_hh);
    if (llt.info() != Eigen::Success) {
      log_warning("condition: singular history block, adding ridge");
      llt.compute(s_hh + 1e-8 * Eigen::MatrixXd::Identity(dh, dh));
    }
    const Eigen::VectorXd delta = c_h - joint.mean.head(dh);
    const Eigen::VectorXd sol = llt.solve(delta);
    const double maha = delta.dot(sol);
    const double nu = joint.dof;
    const double log_marginal =
        std::lgamma(0.5 * (nu + dh)) - std::lgamma(0.5 * nu) -
        0.5 * dh * std::log(nu * std::numbers::pi) - 0.5 * log_det_llt(llt) -
        0.5 * (nu + dh) * std::log1p(maha / nu);
    log_w.push_back(std::log(post.components[static_cast<std::size_t>(k)].alpha) + log_marginal);

    ConditionalComponent cc;
    cc.mean = joint.mean.tail(df) + s_fh * sol;
    const Eigen::MatrixXd schur = s_ff - s_fh * llt.solve(s_fh.transpose());
    cc.scale = ((nu + maha) / (nu + dh)) * schur;
    cc.scale = 0.5 * (cc.scale + cc.scale.transpose()).eval();
    cc.dof = nu + dh;
    out.components.push_back(std::move(cc));
  }
  const double hi = *std::max_element(log_w.begin(), log_w.end());
  double total = 0.0;
  for (double& lw : log_w) {
    lw = std::exp(lw - hi);
    total += lw;
  }
  for (std::size_t k = 0; k < log_w.size(); ++k) out.components[k].weight = log_w[k] / total;
  return out;
}

MixtureMoments mixture_moments(const ConditionalMixture& mixture) {
  MixtureMoments m;
  const auto df = mixture.components.front().mean.size();
  m.mean = Eigen::VectorXd::Zero(df);
  for (const auto& c : mixture.components) m.mean += c.weight * c.mean;
  m.covariance = Eigen::MatrixXd::Zero(df, df);
  for (const auto& c : mixture.components) {
    Eigen::MatrixXd cov = c.scale;
    if (c.dof > 2.0) {
      cov *= c.dof / (c.dof - 2.0);
    } else {
      m.covariance_defined = false;
    }
    const Eigen::VectorXd d = c.mean - m.mean;
    m.covariance += c.weight * (cov + d * d.transpose());
  }
  if (!m.covariance_defined) {
    log_warning("mixture_moments: dof <= 2, covariance undefined; using scale matrices");
  }
  m.covariance = 0.5 * (m.covariance + m.covariance.transpose()).eval();
  return m;
}

json matrix_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    std::vector<double> row(static_cast<std::size_t>(m.cols()));
    for (Eigen::Index c = 0; c < m.cols(); ++c) row[static_cast<std::size_t>(c)] = m(r, c);
    rows.push_back(row);
  }
  return rows;
}

Eigen::MatrixXd matrix_from_json(const json& j) {
  const auto rows = j.get<std::vector<std::vector<double>>>();
  if (rows.empty()) return {};
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()),
                    static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != rows.front().size()) throw Error("invalid_model", "ragged matrix");
    for (std::size_t c = 0; c < rows[r].size(); ++c) {
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
    }
  }
  return m;
}

json vector_to_json(const Eigen::VectorXd& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

Eigen::VectorXd vector_from_json(const json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

json to_json(const VgmmPosterior& post) {
  json comps = json::array();
  for (const auto& c : post.components) {
    comps.push_back({{"alpha", c.alpha},
                     {"beta", c.beta},
                     {"nu", c.nu},
                     {"mean", vector_to_json(c.mean)},
                     {"W", matrix_to_json(c.W)}});
  }
  return {{"dim", post.dim},
          {"components", comps},
          {"prior",
           {{"alpha0", post.prior.alpha0},
            {"beta0", post.prior.beta0},
            {"nu0", post.prior.nu0},
            {"m0", vector_to_json(post.prior.m0)},
            {"W0", matrix_to_json(post.prior.W0)}}},
          {"elbo_history", post.elbo_history}};
}

VgmmPosterior vgmm_from_json(const json& j) {
  VgmmPosterior post;
  post.dim = j.at("dim").get<int>();
  for (const auto& c : j.at("components")) {
    VgmmComponent comp;
    comp.alpha = c.at("alpha").get<double>();
    comp.beta = c.at("beta").get<double>();
    comp.nu = c.at("nu").get<double>();
    comp.mean = vector_from_json(c.at("mean"));
    comp.W = matrix_from_json(c.at("W"));
    if (comp.mean.size() != post.dim || comp.W.rows() != post.dim) {
      throw Error("invalid_model", "VGMM component dimension mismatch");
    }
    post.components.push_back(std::move(comp));
  }
  const auto& p = j.at("prior");
  post.prior.alpha0 = p.at("alpha0").get<double>();
  post.prior.beta0 = p.at("beta0").get<double>();
  post.prior.nu0 = p.at("nu0").get<double>();
  post.prior.m0 = vector_from_json(p.at("m0"));
  post.prior.W0 = matrix_from_json(p.at("W0"));
  if (j.contains("elbo_history")) post.elbo_history = j["elbo_history"].get<std::vector<double>>();
  return post;
}

}  // namespace fwp
