#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "lutdla/matrix.hpp"
#include "lutdla/vq.hpp"

namespace lutdla {

struct KMeansResult {
  Matrix centroids;                    ///< c x dim
  std::vector<std::uint32_t> assignment;
  /// Distortion after every half step: assignment, update, assignment, ...
  std::vector<double> distortion_history;
  std::size_t iterations = 0;
  bool converged = false;
};

/// k-means++ seeding followed by Lloyd iterations, both under `metric`.
/// Centre update is the mean (L2), coordinate-wise median (L1) or
/// coordinate-wise midrange (Chebyshev). An empty cluster is re-seeded at the
/// point farthest from its current centre. Stops at an assignment fixpoint or
/// after `max_iterations`.
KMeansResult kmeans_fit(const Matrix& points, std::size_t c, Metric metric, std::uint64_t seed,
                        std::size_t max_iterations = 100);

double distortion(const Matrix& points, const Matrix& centroids,
                  const std::vector<std::uint32_t>& assignment, Metric metric);

}  // namespace lutdla
