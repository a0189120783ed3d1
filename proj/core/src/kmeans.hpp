#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Core>

namespace fwp::detail {

struct KMeansResult {
  Eigen::MatrixXd centers;  // k x dim
  std::vector<int> labels;  // per row
};

/// Seeded k-means++ initialization followed by Lloyd iterations on the rows
/// of `data`. Empty clusters keep their previous center.
KMeansResult kmeans(const Eigen::MatrixXd& data, int k, std::uint64_t seed, int max_iter = 50);

}  // namespace fwp::detail
