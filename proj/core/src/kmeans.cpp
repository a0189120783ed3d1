#include "kmeans.hpp"

#include <algorithm>
#include <limits>

#include "fwp/error.hpp"
#include "fwp/rng.hpp"

namespace fwp::detail {

KMeansResult kmeans(const Eigen::MatrixXd& data, int k, std::uint64_t seed, int max_iter) {
  const Eigen::Index n = data.rows();
  if (k < 1 || n < 1) throw Error("invalid_argument", "kmeans needs k >= 1 and data");
  Rng rng(seed);
  KMeansResult res;
  res.centers.resize(k, data.cols());
  res.labels.assign(static_cast<std::size_t>(n), 0);

  // k-means++ seeding.
  res.centers.row(0) = data.row(rng.uniform_int(0, n - 1));
  Eigen::VectorXd d2 = (data.rowwise() - res.centers.row(0)).rowwise().squaredNorm();
  for (int c = 1; c < k; ++c) {
    const double total = d2.sum();
    Eigen::Index pick = 0;
    if (total > 0.0) {
      double target = rng.uniform() * total;
      for (pick = 0; pick < n - 1; ++pick) {
        target -= d2(pick);
        if (target < 0.0) break;
      }
    } else {
      pick = rng.uniform_int(0, n - 1);
    }
    res.centers.row(c) = data.row(pick);
    d2 = d2.cwiseMin((data.rowwise() - res.centers.row(c)).rowwise().squaredNorm());
  }

  for (int iter = 0; iter < max_iter; ++iter) {
    bool changed = iter == 0;
    for (Eigen::Index i = 0; i < n; ++i) {
      int best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (int c = 0; c < k; ++c) {
        const double d = (data.row(i) - res.centers.row(c)).squaredNorm();
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      if (res.labels[static_cast<std::size_t>(i)] != best) {
        res.labels[static_cast<std::size_t>(i)] = best;
        changed = true;
      }
    }
    if (!changed) break;
    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(k, data.cols());
    std::vector<Eigen::Index> counts(static_cast<std::size_t>(k), 0);
    for (Eigen::Index i = 0; i < n; ++i) {
      const int c = res.labels[static_cast<std::size_t>(i)];
      sums.row(c) += data.row(i);
      ++counts[static_cast<std::size_t>(c)];
    }
    for (int c = 0; c < k; ++c) {
      if (counts[static_cast<std::size_t>(c)] > 0) {
        res.centers.row(c) = sums.row(c) / static_cast<double>(counts[static_cast<std::size_t>(c)]);
      }
    }
  }
  return res;
}

}  // namespace fwp::detail
