#pragma once

#include <unordered_map>
#include <vector>

#include "p2p/pose.hpp"

namespace p2p {

/// Greedy farthest point sampling starting at seed_index. Distance ties are
/// broken by lexicographically smaller coordinates, then by lower index, so the
/// selected coordinates do not depend on input order. Throws ShapeError unless
/// 1 <= count <= rows.
std::vector<int> farthest_point_sampling(const Matrix& points, int count, int seed_index);

/// Index of the point farthest from the bounding-box centre (same tie-breaking
/// as FPS).
/// Used as an order-independent FPS seed.
int farthest_from_centroid(const Matrix& points);

/// The k nearest points to query (inclusive of a coincident point), ordered by
/// ascending distance with coordinate/index tie-breaking.
std::vector<int> k_nearest(const Matrix& points, const Vec3& query, int k);

/// All points within radius of query (distance <= radius), ordered as k_nearest.
std::vector<int> radius_neighbors(const Matrix& points, const Vec3& query, double radius);

/// Uniform hash grid for fixed-radius queries over a static point set.
class RadiusIndex {
 public:
  RadiusIndex(const Matrix& points, double cell);

  /// Indices with ||p - points[i]|| <= radius, ascending index order.
  std::vector<int> query(const Vec3& p, double radius) const;

 private:
  struct Key {
    long long x, y, z;
    bool operator==(const Key&) const = default;
  };
  struct KeyHash {
    std::size_t operator()(const Key& k) const noexcept;
  };
  Key key_of(const Vec3& p) const;

  const Matrix& points_;
  double cell_;
  std::unordered_map<Key, std::vector<int>, KeyHash> buckets_;
};

}  // namespace p2p
