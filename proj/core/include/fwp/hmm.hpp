#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include "fwp/maneuver.hpp"
#include "fwp/track.hpp"

namespace fwp {

inline constexpr int kHmmFeatureDim = 4;
using HmmFeature = std::array<double, kHmmFeatureDim>;  // (x, y, vx, vy)

/// Per-feature affine standardization (x - mean) / scale.
struct FeatureScaler {
  HmmFeature mean{0.0, 0.0, 0.0, 0.0};
  HmmFeature scale{1.0, 1.0, 1.0, 1.0};

  HmmFeature apply(const HmmFeature& f) const;
  bool operator==(const FeatureScaler&) const = default;
};

/// Mean / standard deviation over every frame of every snippet.
FeatureScaler fit_feature_scaler(std::span<const HistorySnippet> snippets);

/// Gaussian mixture with diagonal covariances over HmmFeature.
struct DiagGaussianMixture {
  std::vector<double> weights;
  std::vector<HmmFeature> means;
  std::vector<HmmFeature> variances;

  double log_density(const HmmFeature& f) const;
};

/// Left-right HMM for one maneuver: only self transitions and transitions
/// to the next state are non-zero.
struct HmmModel {
  ManeuverClass maneuver = ManeuverClass::LanePassLeftForward;
  std::vector<double> initial_probs;
  Eigen::MatrixXd transitions;
  std::vector<DiagGaussianMixture> emissions;
  FeatureScaler scaler;
  std::vector<double> training_log;  // total log-likelihood at every Baum-Welch iteration

  int n_states() const { return static_cast<int>(initial_probs.size()); }
};

struct HmmTrainOptions {
  int n_states = 5;
  int n_mix = 3;
  std::uint64_t seed = 0;
  int max_iter = 100;
  double tol_per_snippet = 1e-4;  // stop when the mean per-snippet gain drops below
  double variance_floor = 1e-6;
  FeatureScaler scaler;           // identity unless supplied
};

/// Baum-Welch training on equal-length snippets. Throws
/// Error("insufficient_training_data") for fewer than 10 snippets.
HmmModel hmm_train(std::span<const HistorySnippet> snippets, ManeuverClass maneuver,
                   const HmmTrainOptions& options);

std::vector<HmmFeature> snippet_features(const HistorySnippet& snippet,
                                         const FeatureScaler& scaler);

/// Forward-algorithm log-likelihood of already standardized features.
double hmm_loglik_features(const HmmModel& model, std::span<const HmmFeature> features);

/// log P(x_h, y_h, vx_h, vy_h | model), computed in log space.
double hmm_loglik(const HmmModel& model, const HistorySnippet& snippet);

struct ManeuverScore {
  ManeuverClass maneuver;
  double log_likelihood;
};

/// Sorts by descending log-likelihood; ties resolve to the lower enum index.
void rank_scores(std::vector<ManeuverScore>& scores);

/// The top_k maneuvers for a snippet under the given models.
std::vector<ManeuverScore> classify(std::span<const HmmModel> models,
                                    const HistorySnippet& snippet, std::size_t top_k);

nlohmann::json to_json(const HmmModel& model);
HmmModel hmm_from_json(const nlohmann::json& j);

}  // namespace fwp
