#include "lutdla/kmeans.hpp"

#include <algorithm>
#include <limits>

#include "lutdla/rng.hpp"

namespace lutdla {
namespace {

std::pair<std::uint32_t, double> nearest(std::span<const double> x, const Matrix& centers,
                                         Metric metric) {
  std::uint32_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < centers.rows(); ++j) {
    const double d = distance(x, centers.row(j), metric);
    if (d < best_d) {
      best_d = d;
      best = static_cast<std::uint32_t>(j);
    }
  }
  return {best, best_d};
}

Matrix seed_plus_plus(const Matrix& points, std::size_t c, Metric metric, Rng& rng) {
  const std::size_t n = points.rows();
  Matrix centers(c, points.cols());
  std::vector<double> weight(n, std::numeric_limits<double>::infinity());

  std::size_t pick = rng.below(n);
  for (std::size_t j = 0; j < c; ++j) {
    if (j > 0) {
      double total = 0.0;
      for (double w : weight) total += w;
      if (total > 0.0) {
        double target = rng.uniform() * total;
        pick = n - 1;
        for (std::size_t i = 0; i < n; ++i) {
          if (weight[i] <= 0.0) continue;
          if (target < weight[i]) {
            pick = i;
            break;
          }
          target -= weight[i];
        }
        // guard against rounding leaving us on a zero-weight tail point
        while (weight[pick] <= 0.0 && pick > 0) --pick;
      } else {
        pick = rng.below(n);  // fewer distinct points than centres
      }
    }
    std::copy_n(points.row(pick).begin(), points.cols(), centers.row(j).begin());
    for (std::size_t i = 0; i < n; ++i)
      weight[i] = std::min(weight[i], distance(points.row(i), centers.row(j), metric));
  }
  return centers;
}

double median_of(std::vector<double>& values) {
  const std::size_t n = values.size();
  const std::size_t mid = n / 2;
  std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid), values.end());
  const double upper = values[mid];
  if (n % 2 == 1) return upper;
  const double lower = *std::max_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lower + upper);
}

void update_centers(const Matrix& points, const std::vector<std::uint32_t>& assignment,
                    Metric metric, Matrix& centers, std::vector<std::size_t>& counts) {
  const std::size_t c = centers.rows();
  const std::size_t dim = points.cols();
  counts.assign(c, 0);
  for (std::uint32_t a : assignment) ++counts[a];

  if (metric == Metric::L2) {
    Matrix sums(c, dim);
    for (std::size_t i = 0; i < points.rows(); ++i) {
      auto dst = sums.row(assignment[i]);
      auto src = points.row(i);
      for (std::size_t d = 0; d < dim; ++d) dst[d] += src[d];
    }
    for (std::size_t j = 0; j < c; ++j)
      if (counts[j] > 0)
        for (std::size_t d = 0; d < dim; ++d)
          centers(j, d) = sums(j, d) / static_cast<double>(counts[j]);
    return;
  }

  std::vector<std::vector<std::size_t>> members(c);
  for (std::size_t i = 0; i < assignment.size(); ++i) members[assignment[i]].push_back(i);
  std::vector<double> column;
  for (std::size_t j = 0; j < c; ++j) {
    if (members[j].empty()) continue;
    for (std::size_t d = 0; d < dim; ++d) {
      column.clear();
      for (std::size_t i : members[j]) column.push_back(points(i, d));
      if (metric == Metric::L1) {
        centers(j, d) = median_of(column);
      } else {
        const auto [lo, hi] = std::minmax_element(column.begin(), column.end());
        centers(j, d) = 0.5 * (*lo + *hi);
      }
    }
  }
}

}  // namespace

double distortion(const Matrix& points, const Matrix& centroids,
                  const std::vector<std::uint32_t>& assignment, Metric metric) {
  double total = 0.0;
  for (std::size_t i = 0; i < points.rows(); ++i)
    total += distance(points.row(i), centroids.row(assignment[i]), metric);
  return total;
}

KMeansResult kmeans_fit(const Matrix& points, std::size_t c, Metric metric, std::uint64_t seed,
                        std::size_t max_iterations) {
  require(points.rows() >= 1 && points.cols() >= 1, "kmeans: need at least one point");
  require(c >= 2, "kmeans: centroid count must be >= 2");
  require(all_finite(points), "kmeans: input contains non-finite values");

  Rng rng(seed);
  KMeansResult result;
  result.centroids = seed_plus_plus(points, c, metric, rng);
  result.assignment.assign(points.rows(), 0);

  const std::size_t n = points.rows();
  std::vector<double> dist(n);
  std::vector<std::size_t> counts;
  for (std::size_t iter = 0; iter < std::max<std::size_t>(max_iterations, 1); ++iter) {
    bool changed = iter == 0;
    for (std::size_t i = 0; i < n; ++i) {
      const auto [idx, d] = nearest(points.row(i), result.centroids, metric);
      if (idx != result.assignment[i]) changed = true;
      result.assignment[i] = idx;
      dist[i] = d;
    }
    result.distortion_history.push_back(
        distortion(points, result.centroids, result.assignment, metric));
    result.iterations = iter + 1;
    if (!changed) {
      result.converged = true;
      break;
    }

    update_centers(points, result.assignment, metric, result.centroids, counts);
    for (std::size_t i = 0; i < n; ++i)
      dist[i] = distance(points.row(i), result.centroids.row(result.assignment[i]), metric);
    for (std::size_t j = 0; j < c; ++j) {
      if (counts[j] > 0) continue;
      const auto far = std::max_element(dist.begin(), dist.end());
      const auto i = static_cast<std::size_t>(far - dist.begin());
      std::copy_n(points.row(i).begin(), points.cols(), result.centroids.row(j).begin());
      *far = -1.0;  // one re-seed per point
    }
    result.distortion_history.push_back(
        distortion(points, result.centroids, result.assignment, metric));
  }
  return result;
}

}  // namespace lutdla
