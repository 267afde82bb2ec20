#include "p2p/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "p2p/errors.hpp"

namespace p2p {
namespace {

bool lex_less(const Matrix& pts, int a, int b) {
  for (int k = 0; k < 3; ++k) {
    if (pts(a, k) != pts(b, k)) return pts(a, k) < pts(b, k);
  }
  return a < b;
}

// Orders candidates by (distance, coordinates, index).
void sort_by_distance(const Matrix& points, const std::vector<double>& d2, std::vector<int>& idx) {
  std::sort(idx.begin(), idx.end(), [&](int a, int b) {
    if (d2[a] != d2[b]) return d2[a] < d2[b];
    return lex_less(points, a, b);
  });
}

}  // namespace

std::vector<int> farthest_point_sampling(const Matrix& points, int count, int seed_index) {
  const int n = static_cast<int>(points.rows());
  if (count < 1 || count > n) {
    throw ShapeError("fps: need 1 <= count <= " + std::to_string(n) + ", got " + std::to_string(count));
  }
  if (seed_index < 0 || seed_index >= n) throw ShapeError("fps: seed index out of range");
  std::vector<int> out;
  out.reserve(count);
  std::vector<double> min_d2(n, std::numeric_limits<double>::infinity());
  std::vector<char> taken(n, 0);
  int current = seed_index;
  for (int s = 0; s < count; ++s) {
    out.push_back(current);
    taken[current] = 1;
    const Eigen::RowVector3d c = points.row(current);
    int best = -1;
    for (int i = 0; i < n; ++i) {
      if (taken[i]) continue;
      min_d2[i] = std::min(min_d2[i], (points.row(i) - c).squaredNorm());
      if (best < 0 || min_d2[i] > min_d2[best] ||
          (min_d2[i] == min_d2[best] && lex_less(points, i, best))) {
        best = i;
      }
    }
    current = best;
  }
  return out;
}

int farthest_from_centroid(const Matrix& points) {
  if (points.rows() == 0) throw ShapeError("farthest_from_centroid: empty point set");
  const Eigen::RowVector3d centroid = 0.5 * (points.colwise().minCoeff() + points.colwise().maxCoeff());
  int best = 0;
  double best_d2 = -1.0;
  for (int i = 0; i < points.rows(); ++i) {
    const double d2 = (points.row(i) - centroid).squaredNorm();
    if (d2 > best_d2 || (d2 == best_d2 && lex_less(points, i, best))) {
      best = i;
      best_d2 = d2;
    }
  }
  return best;
}

std::vector<int> k_nearest(const Matrix& points, const Vec3& query, int k) {
  const int n = static_cast<int>(points.rows());
  if (k < 1 || k > n) throw ShapeError("knn: need 1 <= k <= number of points");
  std::vector<double> d2(n);
  for (int i = 0; i < n; ++i) d2[i] = (points.row(i).transpose() - query).squaredNorm();
  std::vector<int> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  auto cmp = [&](int a, int b) {
    if (d2[a] != d2[b]) return d2[a] < d2[b];
    return lex_less(points, a, b);
  };
  std::partial_sort(idx.begin(), idx.begin() + k, idx.end(), cmp);
  idx.resize(k);
  return idx;
}

std::vector<int> radius_neighbors(const Matrix& points, const Vec3& query, double radius) {
  const int n = static_cast<int>(points.rows());
  std::vector<double> d2(n);
  std::vector<int> idx;
  const double r2 = radius * radius;
  for (int i = 0; i < n; ++i) {
    d2[i] = (points.row(i).transpose() - query).squaredNorm();
    if (d2[i] <= r2) idx.push_back(i);
  }
  sort_by_distance(points, d2, idx);
  return idx;
}

std::size_t RadiusIndex::KeyHash::operator()(const Key& k) const noexcept {
  std::size_t h = static_cast<std::size_t>(k.x) * 73856093u;
  h ^= static_cast<std::size_t>(k.y) * 19349663u;
  h ^= static_cast<std::size_t>(k.z) * 83492791u;
  return h;
}

RadiusIndex::RadiusIndex(const Matrix& points, double cell) : points_(points), cell_(cell) {
  if (!(cell > 0.0)) throw ShapeError("RadiusIndex: cell size must be positive");
  for (int i = 0; i < points.rows(); ++i) {
    buckets_[key_of(points.row(i).transpose())].push_back(i);
  }
}

RadiusIndex::Key RadiusIndex::key_of(const Vec3& p) const {
  return {static_cast<long long>(std::floor(p.x() / cell_)), static_cast<long long>(std::floor(p.y() / cell_)),
          static_cast<long long>(std::floor(p.z() / cell_))};
}

std::vector<int> RadiusIndex::query(const Vec3& p, double radius) const {
  const long long reach = static_cast<long long>(std::ceil(radius / cell_));
  const Key c = key_of(p);
  const double r2 = radius * radius;
  std::vector<int> out;
  for (long long dx = -reach; dx <= reach; ++dx) {
    for (long long dy = -reach; dy <= reach; ++dy) {
      for (long long dz = -reach; dz <= reach; ++dz) {
        auto it = buckets_.find({c.x + dx, c.y + dy, c.z + dz});
        if (it == buckets_.end()) continue;
        for (int i : it->second) {
          if ((points_.row(i).transpose() - p).squaredNorm() <= r2) out.push_back(i);
        }
      }
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace p2p
