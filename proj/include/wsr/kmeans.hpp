#ifndef WSR_KMEANS_HPP
#define WSR_KMEANS_HPP

#include <Eigen/Core>
#include <algorithm>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <vector>

#include "wsr/error.hpp"

namespace wsr {

template <typename Scalar>
using PointMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename Scalar>
struct KMeansResult {
  PointMatrix<Scalar> centroids;  // k x d
  std::vector<int> assignments;   // one per input row
  Scalar inertia = 0;
  int iterations = 0;
  /// Inertia after every assignment step; non-increasing.
  std::vector<Scalar> inertia_history;

  int k() const { return static_cast<int>(centroids.rows()); }
};

namespace detail {

/// Uniform double in [0, 1) built from the top 53 bits, identical on every platform.
inline double unit_uniform(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

template <typename Scalar>
Eigen::Index count_distinct_rows(const PointMatrix<Scalar>& points) {
  std::vector<Eigen::Index> order(points.rows());
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  auto less = [&](Eigen::Index a, Eigen::Index b) {
    for (Eigen::Index j = 0; j < points.cols(); ++j) {
      if (points(a, j) != points(b, j)) return points(a, j) < points(b, j);
    }
    return false;
  };
  std::sort(order.begin(), order.end(), less);
  Eigen::Index distinct = order.empty() ? 0 : 1;
  for (std::size_t i = 1; i < order.size(); ++i) {
    if (less(order[i - 1], order[i])) ++distinct;
  }
  return distinct;
}

/// k-means++ seeding: first centre uniform, the rest proportional to squared
/// distance from the nearest chosen centre.
template <typename Scalar>
PointMatrix<Scalar> seed_plus_plus(const PointMatrix<Scalar>& points, int k, std::mt19937_64& rng) {
  const Eigen::Index n = points.rows();
  PointMatrix<Scalar> centroids(k, points.cols());
  auto first = static_cast<Eigen::Index>(unit_uniform(rng) * static_cast<double>(n));
  centroids.row(0) = points.row(std::min(first, n - 1));

  std::vector<double> nearest(n);
  for (Eigen::Index i = 0; i < n; ++i)
    nearest[i] = static_cast<double>((points.row(i) - centroids.row(0)).squaredNorm());

  for (int c = 1; c < k; ++c) {
    const double total = std::accumulate(nearest.begin(), nearest.end(), 0.0);
    Eigen::Index chosen = 0;
    if (total > 0) {
      double target = unit_uniform(rng) * total;
      // Only points at positive distance are eligible, so duplicates of an
      // existing centre are never picked.
      Eigen::Index last_positive = 0;
      for (Eigen::Index i = 0; i < n; ++i) {
        if (nearest[i] <= 0) continue;
        last_positive = i;
        target -= nearest[i];
        if (target < 0) break;
      }
      chosen = last_positive;
    }
    centroids.row(c) = points.row(chosen);
    for (Eigen::Index i = 0; i < n; ++i) {
      nearest[i] = std::min(nearest[i], static_cast<double>((points.row(i) - centroids.row(c)).squaredNorm()));
    }
  }
  return centroids;
}

}  // namespace detail

/// Lloyd's algorithm with k-means++ initialisation on the rows of `points`.
/// k is clamped to the number of distinct rows. Ties in assignment go to the
/// lowest cluster index; an emptied cluster takes over the point farthest from
/// its own centroid.
template <typename Scalar>
KMeansResult<Scalar> kmeans(const PointMatrix<Scalar>& points, int k, int max_iter, std::uint64_t seed) {
  const Eigen::Index n = points.rows();
  if (n == 0) throw DataError("kmeans: no points");
  if (k < 1) throw DataError("kmeans: k must be >= 1");
  k = static_cast<int>(std::min<Eigen::Index>(k, detail::count_distinct_rows(points)));

  std::mt19937_64 rng(seed);
  KMeansResult<Scalar> res;
  res.centroids = detail::seed_plus_plus(points, k, rng);
  res.assignments.assign(n, -1);
  std::vector<Scalar> cost(n);

  for (int iter = 0; iter < max_iter; ++iter) {
    bool changed = false;
    Scalar inertia = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
      int best = 0;
      Scalar best_d = std::numeric_limits<Scalar>::max();
      for (int c = 0; c < k; ++c) {
        const Scalar d = (points.row(i) - res.centroids.row(c)).squaredNorm();
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      if (res.assignments[i] != best) changed = true;
      res.assignments[i] = best;
      cost[i] = best_d;
      inertia += best_d;
    }
    res.inertia = inertia;
    res.inertia_history.push_back(inertia);
    res.iterations = iter + 1;
    if (!changed && iter > 0) break;

    std::vector<Eigen::Index> counts(k, 0);
    for (int a : res.assignments) ++counts[a];
    for (int c = 0; c < k; ++c) {
      if (counts[c] != 0) continue;
      Eigen::Index far = -1;
      for (Eigen::Index i = 0; i < n; ++i) {
        if (counts[res.assignments[i]] > 1 && (far < 0 || cost[i] > cost[far])) far = i;
      }
      if (far < 0) break;
      --counts[res.assignments[far]];
      res.assignments[far] = c;
      counts[c] = 1;
      cost[far] = 0;
    }

    res.centroids.setZero();
    for (Eigen::Index i = 0; i < n; ++i) res.centroids.row(res.assignments[i]) += points.row(i);
    for (int c = 0; c < k; ++c) res.centroids.row(c) /= static_cast<Scalar>(counts[c]);
  }
  return res;
}

}  // namespace wsr

#endif  // WSR_KMEANS_HPP
