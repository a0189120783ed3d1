#include "fwp/chebyshev.hpp"

#include <algorithm>
#include <map>
#include <mutex>
#include <utility>

#include <Eigen/QR>

#include "fwp/error.hpp"

namespace fwp {
namespace {

struct UniformGrid {
  Eigen::MatrixXd basis;   // n x (degree+1)
  Eigen::MatrixXd solver;  // (degree+1) x n least-squares operator
};

// Grids are shared across calls; encoding sits on the per-frame hot path.
const UniformGrid& cached_grid(std::size_t n, int degree) {
  static std::mutex mutex;
  static std::map<std::pair<std::size_t, int>, UniformGrid> cache;
  std::lock_guard lock(mutex);
  auto it = cache.find({n, degree});
  if (it == cache.end()) {
    UniformGrid grid;
    grid.basis = cheb_basis(n, degree);
    const auto rows = static_cast<Eigen::Index>(n);
    grid.solver = grid.basis.colPivHouseholderQr().solve(Eigen::MatrixXd::Identity(rows, rows));
    it = cache.emplace(std::pair{n, degree}, std::move(grid)).first;
  }
  return it->second;
}

}  // namespace

Eigen::VectorXd cheb_polynomials(double tau, int degree) {
  Eigen::VectorXd t(degree + 1);
  t(0) = 1.0;
  if (degree >= 1) t(1) = tau;
  for (int j = 2; j <= degree; ++j) t(j) = 2.0 * tau * t(j - 1) - t(j - 2);
  return t;
}

Eigen::MatrixXd cheb_basis(std::size_t n, int degree) {
  Eigen::MatrixXd basis(static_cast<Eigen::Index>(n), degree + 1);
  for (std::size_t i = 0; i < n; ++i) {
    const double tau =
        n == 1 ? 0.0 : -1.0 + 2.0 * static_cast<double>(i) / static_cast<double>(n - 1);
    basis.row(static_cast<Eigen::Index>(i)) = cheb_polynomials(tau, degree).transpose();
  }
  return basis;
}

Eigen::VectorXd cheb_fit(std::span<const double> samples, int degree) {
  if (degree < 0 || samples.size() < static_cast<std::size_t>(degree) + 1 ||
      (samples.size() < 2 && degree > 0)) {
    throw Error("ill_posed_fit", "ill-posed fit");
  }
  const Eigen::Map<const Eigen::VectorXd> b(samples.data(),
                                            static_cast<Eigen::Index>(samples.size()));
  return cached_grid(samples.size(), degree).solver * b;
}

Eigen::VectorXd cheb_fit(std::span<const double> times, std::span<const double> samples,
                         int degree) {
  if (times.size() != samples.size()) {
    throw Error("invalid_argument", "cheb_fit: times and samples differ in length");
  }
  if (degree < 0 || samples.size() < static_cast<std::size_t>(degree) + 1) {
    throw Error("ill_posed_fit", "ill-posed fit");
  }
  const auto [lo, hi] = std::minmax_element(times.begin(), times.end());
  const double span = *hi - *lo;
  if (!(span > 0.0)) throw Error("ill_posed_fit", "ill-posed fit");
  Eigen::MatrixXd basis(static_cast<Eigen::Index>(times.size()), degree + 1);
  for (std::size_t i = 0; i < times.size(); ++i) {
    const double tau = -1.0 + 2.0 * (times[i] - *lo) / span;
    basis.row(static_cast<Eigen::Index>(i)) = cheb_polynomials(tau, degree).transpose();
  }
  const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(basis);
  if (qr.rank() < degree + 1) throw Error("ill_posed_fit", "ill-posed fit");
  const Eigen::Map<const Eigen::VectorXd> b(samples.data(),
                                            static_cast<Eigen::Index>(samples.size()));
  return qr.solve(b);
}

std::vector<double> cheb_eval(const Eigen::VectorXd& coeffs, std::size_t n) {
  if (n < 2) throw Error("invalid_argument", "cheb_eval needs n >= 2");
  const Eigen::VectorXd values = cached_grid(n, static_cast<int>(coeffs.size()) - 1).basis * coeffs;
  return {values.data(), values.data() + values.size()};
}

Eigen::VectorXd ChebEncoder::encode_history(const HistorySnippet& snippet) const {
  const int m = coeffs_per_signal();
  Eigen::VectorXd c(history_dim());
  c.segment(0 * m, m) = cheb_fit(snippet.x, degree_);
  c.segment(1 * m, m) = cheb_fit(snippet.y, degree_);
  c.segment(2 * m, m) = cheb_fit(snippet.vx, degree_);
  c.segment(3 * m, m) = cheb_fit(snippet.vy, degree_);
  return c;
}

Eigen::VectorXd ChebEncoder::encode_future(std::span<const double> vx,
                                           std::span<const double> vy) const {
  const int m = coeffs_per_signal();
  Eigen::VectorXd c(future_dim());
  c.segment(0, m) = cheb_fit(vx, degree_);
  c.segment(m, m) = cheb_fit(vy, degree_);
  return c;
}

Eigen::VectorXd ChebEncoder::encode_joint(const PredictionWindow& window) const {
  Eigen::VectorXd c(history_dim() + future_dim());
  c.head(history_dim()) = encode_history(window.history);
  c.tail(future_dim()) = encode_future(window.future_vx, window.future_vy);
  return c;
}

}  // namespace fwp
