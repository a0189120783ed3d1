#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json.hpp>

namespace fwp {

/// Dirichlet / Gauss-Wishart prior hyperparameters.
struct VgmmPrior {
  double alpha0 = 1.0;
  double beta0 = 1.0;
  double nu0 = 1.0;
  Eigen::VectorXd m0;
  Eigen::MatrixXd W0;
};

/// Variational posterior of one mixture component: Dirichlet weight alpha,
/// mean precision scale beta, mean m, Wishart scale W and dof nu.
struct VgmmComponent {
  double alpha = 1.0;
  double beta = 1.0;
  double nu = 1.0;
  Eigen::VectorXd mean;
  Eigen::MatrixXd W;
};

struct VgmmPosterior {
  int dim = 0;
  std::vector<VgmmComponent> components;
  VgmmPrior prior;
  std::vector<double> elbo_history;  // lower bound after every M-step

  int num_components() const { return static_cast<int>(components.size()); }
};

/// alpha0 = 1/K, beta0 = 1, m0 = data mean, nu0 = dim + 2 and
/// W0 = diag(population variance)^-1 / nu0.
VgmmPrior default_vgmm_prior(const Eigen::MatrixXd& data, int num_components);

struct VgmmFitOptions {
  int num_components = 8;
  std::uint64_t seed = 0;
  int max_iter = 200;
  double rel_tol = 1e-5;                  // stop when the ELBO gain < rel_tol * |ELBO|
  std::optional<VgmmPrior> prior;         // default_vgmm_prior when empty
  std::vector<double> row_weights;        // empty means unit weights
  std::optional<Eigen::MatrixXd> initial_responsibilities;  // N x K, else seeded k-means
};

/// Variational Bayes EM on the rows of `data`. Throws Error("invalid_argument")
/// when K exceeds the row count.
VgmmPosterior vgmm_fit(const Eigen::MatrixXd& data, const VgmmFitOptions& options);

/// Multivariate Student-t with location, scale matrix (inverse precision)
/// and degrees of freedom.
struct StudentT {
  Eigen::VectorXd mean;
  Eigen::MatrixXd scale;
  double dof = 1.0;
};

double student_t_log_density(const StudentT& dist, const Eigen::VectorXd& x);

/// Predictive Student-t of component k: dof nu+1-d and precision
/// ((nu+1-d) beta / (1+beta)) W.
StudentT predictive_component(const VgmmPosterior& posterior, int k);

double predictive_log_density(const VgmmPosterior& posterior, const Eigen::VectorXd& c);
double predictive_density(const VgmmPosterior& posterior, const Eigen::VectorXd& c);

struct ConditionalComponent {
  double weight = 0.0;
  Eigen::VectorXd mean;   // conditional location of the trailing block
  Eigen::MatrixXd scale;  // conditional scale matrix (inverse precision)
  double dof = 1.0;
};

/// Student-t mixture over the trailing coordinates given the leading ones.
struct ConditionalMixture {
  std::vector<ConditionalComponent> components;
};

/// Conditions the predictive mixture on its leading dim(c_h) coordinates.
ConditionalMixture condition(const VgmmPosterior& posterior, const Eigen::VectorXd& c_h);

struct MixtureMoments {
  Eigen::VectorXd mean;
  Eigen::MatrixXd covariance;
  bool covariance_defined = true;  // false when some dof <= 2
};

MixtureMoments mixture_moments(const ConditionalMixture& mixture);

nlohmann::json to_json(const VgmmPosterior& posterior);
VgmmPosterior vgmm_from_json(const nlohmann::json& j);

nlohmann::json matrix_to_json(const Eigen::MatrixXd& m);
Eigen::MatrixXd matrix_from_json(const nlohmann::json& j);
nlohmann::json vector_to_json(const Eigen::VectorXd& v);
Eigen::VectorXd vector_from_json(const nlohmann::json& j);

}  // namespace fwp
