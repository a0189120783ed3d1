#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "fwp/track.hpp"

namespace fwp {

inline constexpr int kDefaultChebDegree = 4;

/// Chebyshev polynomials T_0..T_degree evaluated at tau in [-1, 1].
Eigen::VectorXd cheb_polynomials(double tau, int degree);

/// n x (degree+1) matrix of T_j at n uniformly spaced points of [-1, 1].
Eigen::MatrixXd cheb_basis(std::size_t n, int degree);

/// Least-squares Chebyshev coefficients of uniformly spaced samples, with the
/// first sample mapped to -1 and the last to +1.
/// Throws Error("ill_posed_fit") when there are fewer than degree+1 samples.
Eigen::VectorXd cheb_fit(std::span<const double> samples, int degree = kDefaultChebDegree);

/// Same as above for explicit sample times; the time span is mapped affinely
/// onto [-1, 1]. Identical time stamps are an ill-posed fit.
Eigen::VectorXd cheb_fit(std::span<const double> times, std::span<const double> samples,
                         int degree);

/// Evaluates the series at n >= 2 uniformly spaced points of [-1, 1].
std::vector<double> cheb_eval(const Eigen::VectorXd& coeffs, std::size_t n);

/// Encoder for snippet histories and future velocity profiles.
/// c_h = [c(x); c(y); c(vx); c(vy)], c_f = [c(vx_f); c(vy_f)].
class ChebEncoder {
 public:
  explicit ChebEncoder(int degree = kDefaultChebDegree) : degree_(degree) {}

  int degree() const { return degree_; }
  int coeffs_per_signal() const { return degree_ + 1; }
  int history_dim() const { return 4 * coeffs_per_signal(); }
  int future_dim() const { return 2 * coeffs_per_signal(); }

  Eigen::VectorXd encode_history(const HistorySnippet& snippet) const;
  Eigen::VectorXd encode_future(std::span<const double> vx, std::span<const double> vy) const;
  Eigen::VectorXd encode_joint(const PredictionWindow& window) const;

 private:
  int degree_;
};

}  // namespace fwp
