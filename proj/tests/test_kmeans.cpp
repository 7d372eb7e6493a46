#include <doctest.h>

#include <random>

#include "wsr/kmeans.hpp"

using namespace wsr;

namespace {

// Exhaustive search over every labelling of n points into k non-empty groups;
// returns the labelling with the smallest within-cluster sum of squares.
std::vector<int> best_partition(const PointMatrix<double>& pts, int k) {
  const int n = static_cast<int>(pts.rows());
  std::vector<int> label(n, 0), best;
  double best_sse = 1e300;
  long total = 1;
  for (int i = 0; i < n; ++i) total *= k;
  for (long code = 0; code < total; ++code) {
    long c = code;
    for (int i = 0; i < n; ++i) {
      label[i] = static_cast<int>(c % k);
      c /= k;
    }
    double sse = 0;
    bool empty = false;
    for (int g = 0; g < k && !empty; ++g) {
      Eigen::RowVectorXd mean = Eigen::RowVectorXd::Zero(pts.cols());
      int count = 0;
      for (int i = 0; i < n; ++i) {
        if (label[i] == g) {
          mean += pts.row(i);
          ++count;
        }
      }
      if (count == 0) {
        empty = true;
        break;
      }
      mean /= count;
      for (int i = 0; i < n; ++i) {
        if (label[i] == g) sse += (pts.row(i) - mean).squaredNorm();
      }
    }
    if (!empty && sse < best_sse) {
      best_sse = sse;
      best = label;
    }
  }
  return best;
}

bool same_partition(const std::vector<int>& a, const std::vector<int>& b) {
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = 0; j < a.size(); ++j) {
      if ((a[i] == a[j]) != (b[i] == b[j])) return false;
    }
  }
  return true;
}

}  // namespace

TEST_CASE("k = 1 returns the arithmetic mean") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> normal;
  PointMatrix<double> pts(40, 5);
  for (Eigen::Index i = 0; i < pts.size(); ++i) pts.data()[i] = normal(rng);
  const auto res = kmeans(pts, 1, 50, 11);
  REQUIRE(res.k() == 1);
  CHECK((res.centroids.row(0) - pts.colwise().mean()).norm() < 1e-12);
}

TEST_CASE("k distinct points in k clusters fit exactly") {
  PointMatrix<double> pts(4, 2);
  pts << 0, 0, 5, 1, -3, 7, 2, 2;
  const auto res = kmeans(pts, 4, 20, 1);
  CHECK(res.inertia == 0.0);
  for (int i = 0; i < 4; ++i) CHECK((res.centroids.row(res.assignments[i]) - pts.row(i)).norm() == 0.0);
}

TEST_CASE("three planar blobs match the brute-force optimal partition") {
  std::mt19937_64 rng(42);
  std::normal_distribution<double> noise(0.0, 0.4);
  const double centers[3][2] = {{0, 0}, {10, 0}, {5, 9}};
  PointMatrix<double> pts(12, 2);
  for (int i = 0; i < 12; ++i) pts.row(i) << centers[i % 3][0] + noise(rng), centers[i % 3][1] + noise(rng);
  const auto oracle = best_partition(pts, 3);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto res = kmeans(pts, 3, 100, seed);
    CHECK(same_partition(res.assignments, oracle));
  }
}

TEST_CASE("k is clamped to the number of distinct points") {
  PointMatrix<double> pts(6, 2);
  pts << 1, 1, 1, 1, 2, 2, 2, 2, 1, 1, 2, 2;
  const auto res = kmeans(pts, 5, 10, 0);
  CHECK(res.k() == 2);
  CHECK(res.inertia == 0.0);
}

TEST_CASE("empty input and k < 1 are errors") {
  PointMatrix<double> none(0, 3);
  CHECK_THROWS_AS(kmeans(none, 2, 10, 0), DataError);
  PointMatrix<double> one(1, 3);
  one.setZero();
  CHECK_THROWS_AS(kmeans(one, 0, 10, 0), DataError);
}

TEST_CASE("inertia never increases across Lloyd iterations") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0, 100);
    PointMatrix<double> pts(200, 3);
    for (Eigen::Index i = 0; i < pts.size(); ++i) pts.data()[i] = u(rng);
    const auto res = kmeans(pts, 9, 100, seed);
    for (std::size_t i = 1; i < res.inertia_history.size(); ++i)
      CHECK(res.inertia_history[i] <= res.inertia_history[i - 1] * (1 + 1e-12));
  }
}

TEST_CASE("identical seeds give identical clusterings, float and double alike") {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<float> u(0, 1);
  PointMatrix<float> pts(120, 4);
  for (Eigen::Index i = 0; i < pts.size(); ++i) pts.data()[i] = u(rng);
  const auto a = kmeans(pts, 6, 50, 77);
  const auto b = kmeans(pts, 6, 50, 77);
  CHECK(a.assignments == b.assignments);
  CHECK(a.centroids == b.centroids);
  const auto c = kmeans(PointMatrix<double>(pts.cast<double>()), 6, 50, 77);
  CHECK(c.k() == 6);
}

TEST_CASE("every cluster is non-empty after repair") {
  // Heavy duplicates invite empty clusters during Lloyd updates.
  PointMatrix<double> pts(30, 1);
  for (int i = 0; i < 30; ++i) pts(i, 0) = i < 25 ? 0.0 : static_cast<double>(i);
  const auto res = kmeans(pts, 4, 100, 5);
  std::vector<int> counts(res.k(), 0);
  for (int a : res.assignments) ++counts[a];
  for (int c : counts) CHECK(c > 0);
}
