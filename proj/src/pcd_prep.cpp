#include "p2p/pcd_prep.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <queue>

#include "p2p/errors.hpp"
#include "p2p/geometry.hpp"

namespace p2p {

Matrix subtract_background(const Matrix& depth, const Matrix& reference, double tau) {
  if (depth.rows() != reference.rows() || depth.cols() != reference.cols()) {
    throw ShapeError("depth and reference maps differ in shape");
  }
  Matrix out = depth;
  for (Eigen::Index r = 0; r < depth.rows(); ++r) {
    for (Eigen::Index c = 0; c < depth.cols(); ++c) {
      if (std::abs(depth(r, c) - reference(r, c)) < tau) out(r, c) = 0.0;
    }
  }
  return out;
}

Matrix largest_connected_component(const Matrix& depth) {
  const int rows = static_cast<int>(depth.rows());
  const int cols = static_cast<int>(depth.cols());
  std::vector<int> label(static_cast<std::size_t>(rows) * cols, -1);
  int best_label = -1;
  std::size_t best_size = 0;
  int next = 0;
  std::vector<int> stack;
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      const int id = r * cols + c;
      if (depth(r, c) <= 0.0 || label[id] >= 0) continue;
      // iterative DFS over the 8-neighborhood
      std::size_t size = 0;
      stack.assign(1, id);
      label[id] = next;
      while (!stack.empty()) {
        const int cur = stack.back();
        stack.pop_back();
        ++size;
        const int cr = cur / cols;
        const int cc = cur % cols;
        for (int dr = -1; dr <= 1; ++dr) {
          for (int dc = -1; dc <= 1; ++dc) {
            const int nr = cr + dr;
            const int nc = cc + dc;
            if (nr < 0 || nc < 0 || nr >= rows || nc >= cols) continue;
            const int nid = nr * cols + nc;
            if (depth(nr, nc) > 0.0 && label[nid] < 0) {
              label[nid] = next;
              stack.push_back(nid);
            }
          }
        }
      }
      if (size > best_size) {
        best_size = size;
        best_label = next;
      }
      ++next;
    }
  }
  Matrix out = Matrix::Zero(rows, cols);
  if (best_label < 0) return out;
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      if (label[r * cols + c] == best_label) out(r, c) = depth(r, c);
    }
  }
  return out;
}

Matrix depth_to_points(const Matrix& depth, const CameraIntrinsics& k) {
  std::vector<Vec3> pts;
  for (Eigen::Index v = 0; v < depth.rows(); ++v) {
    for (Eigen::Index u = 0; u < depth.cols(); ++u) {
      const double z = depth(v, u);
      if (z <= 0.0) continue;
      pts.emplace_back((static_cast<double>(u) - k.cx) * z / k.fx, (static_cast<double>(v) - k.cy) * z / k.fy, z);
    }
  }
  Matrix out(static_cast<Eigen::Index>(pts.size()), 3);
  for (std::size_t i = 0; i < pts.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = pts[i].transpose();
  return out;
}

Matrix transform_points(const Matrix& points, const Eigen::Matrix4d& T) {
  Matrix out(points.rows(), 3);
  const Mat3 R = T.topLeftCorner<3, 3>();
  const Vec3 t = T.topRightCorner<3, 1>();
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    out.row(i) = (R * points.row(i).transpose() + t).transpose();
  }
  return out;
}

Matrix select_rows(const Matrix& points, const std::vector<int>& indices) {
  Matrix out(static_cast<Eigen::Index>(indices.size()), points.cols());
  for (std::size_t i = 0; i < indices.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = points.row(indices[i]);
  return out;
}

Matrix segment_human(const DepthMap& depth, const DepthMap& reference, double tau, const Eigen::Matrix4d& extrinsics,
                     const SegmentationOptions& opts) {
  if (!(tau > 0.0)) throw ShapeError("segment_human: tau must be positive");
  const Matrix fg = subtract_background(depth.values, reference.values, tau);
  const Matrix blob = largest_connected_component(fg);
  Matrix pts = transform_points(depth_to_points(blob, depth.intrinsics), extrinsics);
  if (pts.rows() == 0) throw EmptySegmentation("no foreground pixels after background subtraction");
  pts = select_rows(pts, dbscan_inliers(pts, opts.dbscan_eps, opts.dbscan_min_pts));
  if (pts.rows() == 0) throw EmptySegmentation("DBSCAN labeled every point as noise");
  if (pts.rows() > opts.sor_k) pts = select_rows(pts, sor(pts, opts.sor_k, opts.sor_std_ratio));
  return pts;
}

std::vector<int> dbscan(const Matrix& points, double eps, int min_pts) {
  if (!(eps > 0.0) || min_pts < 1) throw ShapeError("dbscan: need eps > 0 and min_pts >= 1");
  const int n = static_cast<int>(points.rows());
  constexpr int kUnclassified = -2;
  std::vector<int> labels(n, kUnclassified);
  if (n == 0) return {};
  const RadiusIndex index(points, eps);
  std::vector<char> visited(n, 0);
  int cluster = 0;
  for (int p = 0; p < n; ++p) {
    if (visited[p]) continue;
    visited[p] = 1;
    std::vector<int> seeds = index.query(points.row(p).transpose(), eps);
    if (static_cast<int>(seeds.size()) < min_pts) {
      labels[p] = kNoise;
      continue;
    }
    labels[p] = cluster;
    for (std::size_t s = 0; s < seeds.size(); ++s) {
      const int q = seeds[s];
      if (!visited[q]) {
        visited[q] = 1;
        std::vector<int> nb = index.query(points.row(q).transpose(), eps);
        if (static_cast<int>(nb.size()) >= min_pts) seeds.insert(seeds.end(), nb.begin(), nb.end());
      }
      if (labels[q] < 0) labels[q] = cluster;
    }
    ++cluster;
  }
  return labels;
}

std::vector<int> dbscan_inliers(const Matrix& points, double eps, int min_pts) {
  const std::vector<int> labels = dbscan(points, eps, min_pts);
  std::vector<int> keep;
  for (int i = 0; i < static_cast<int>(labels.size()); ++i) {
    if (labels[i] != kNoise) keep.push_back(i);
  }
  return keep;
}

std::vector<int> sor(const Matrix& points, int k, double std_ratio) {
  const int n = static_cast<int>(points.rows());
  if (k < 1 || k >= n) throw ShapeError("sor: need 1 <= k < number of points");
  std::vector<double> mean_d(n);
  std::vector<double> d(n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) d[j] = (points.row(i) - points.row(j)).norm();
    d[i] = std::numeric_limits<double>::infinity();
    std::nth_element(d.begin(), d.begin() + (k - 1), d.end());
    double s = 0.0;
    for (int j = 0; j < k; ++j) s += d[j];
    mean_d[i] = s / k;
  }
  const double mu = std::accumulate(mean_d.begin(), mean_d.end(), 0.0) / n;
  double var = 0.0;
  for (double m : mean_d) var += (m - mu) * (m - mu);
  const double threshold = mu + std_ratio * std::sqrt(var / n);
  std::vector<int> keep;
  for (int i = 0; i < n; ++i) {
    if (mean_d[i] <= threshold) keep.push_back(i);
  }
  return keep;
}

std::vector<int> gpc(const Matrix& points, const GpcParams& params, const ProjectionPlane& plane) {
  const int n = static_cast<int>(points.rows());
  if (!(params.lambda > 0.0) || params.min_cluster < 1 || params.k < 1 || !(params.cell > 0.0)) {
    throw ShapeError("gpc: invalid parameters");
  }
  if (n < params.min_cluster) throw EmptyInput("gpc: fewer points than the minimum cluster size");

  Matrix flat = Matrix::Zero(n, 3);
  Eigen::VectorXd depth(n);
  for (int i = 0; i < n; ++i) {
    flat(i, 0) = points(i, plane.u_axis);
    flat(i, 1) = points(i, plane.v_axis);
    depth[i] = points(i, plane.depth_axis);
  }

  // (1) BFS over the 2D proximity graph
  const RadiusIndex index(flat, params.cell);
  std::vector<int> cluster_of(n, -1);
  std::vector<std::vector<int>> clusters;
  for (int s = 0; s < n; ++s) {
    if (cluster_of[s] >= 0) continue;
    const int id = static_cast<int>(clusters.size());
    std::vector<int> members{s};
    cluster_of[s] = id;
    for (std::size_t h = 0; h < members.size(); ++h) {
      for (int nb : index.query(flat.row(members[h]).transpose(), params.cell)) {
        if (cluster_of[nb] < 0) {
          cluster_of[nb] = id;
          members.push_back(nb);
        }
      }
    }
    clusters.push_back(std::move(members));
  }

  // (2) depth trimming and size filter
  std::vector<std::vector<int>> trimmed(clusters.size());
  for (std::size_t c = 0; c < clusters.size(); ++c) {
    const auto& members = clusters[c];
    double mu = 0.0;
    for (int i : members) mu += depth[i];
    mu /= static_cast<double>(members.size());
    double var = 0.0;
    for (int i : members) var += (depth[i] - mu) * (depth[i] - mu);
    const double sigma = std::sqrt(var / static_cast<double>(members.size()));
    std::vector<int> kept;
    for (int i : members) {
      if (sigma == 0.0 || std::abs(depth[i] - mu) < params.lambda * sigma) kept.push_back(i);
    }
    if (static_cast<int>(kept.size()) >= params.min_cluster) trimmed[c] = std::move(kept);
  }

  // (3) largest cluster, lowest index on ties
  int best = -1;
  for (std::size_t c = 0; c < trimmed.size(); ++c) {
    if (!trimmed[c].empty() && (best < 0 || trimmed[c].size() > trimmed[best].size())) best = static_cast<int>(c);
  }
  if (best < 0) throw EmptyResult("gpc: every cluster was dropped");

  std::vector<int> alive;
  std::vector<int> alive_cluster;
  for (std::size_t c = 0; c < trimmed.size(); ++c) {
    for (int i : trimmed[c]) {
      alive.push_back(i);
      alive_cluster.push_back(static_cast<int>(c));
    }
  }
  const Matrix alive_flat = select_rows(flat, alive);

  double zmin = std::numeric_limits<double>::infinity();
  double zmax = -zmin;
  for (int i : trimmed[best]) {
    zmin = std::min(zmin, std::abs(depth[i]));
    zmax = std::max(zmax, std::abs(depth[i]));
  }
  const double m1 = zmin - params.depth_margin;
  const double m2 = zmax + params.depth_margin;

  std::vector<char> keep_cluster(trimmed.size(), 0);
  keep_cluster[best] = 1;
  const int k = std::min<int>(params.k, static_cast<int>(alive.size()));
  for (int i : trimmed[best]) {
    for (int a : k_nearest(alive_flat, flat.row(i).transpose(), k)) {
      const int c = alive_cluster[a];
      const double z = std::abs(depth[alive[a]]);
      if (c != best && z > m1 && z < m2) keep_cluster[c] = 1;
    }
  }

  std::vector<int> out;
  for (std::size_t c = 0; c < trimmed.size(); ++c) {
    if (keep_cluster[c]) out.insert(out.end(), trimmed[c].begin(), trimmed[c].end());
  }
  std::sort(out.begin(), out.end());
  return out;
}

double chamfer(const Matrix& a, const Matrix& b) {
  if (a.rows() == 0 || b.rows() == 0) throw EmptyInput("chamfer: empty point set");
  Eigen::VectorXd best_b = Eigen::VectorXd::Constant(b.rows(), std::numeric_limits<double>::infinity());
  double sum_a = 0.0;
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    const Eigen::VectorXd d2 = (b.rowwise() - a.row(i)).rowwise().squaredNorm();
    sum_a += d2.minCoeff();
    best_b = best_b.cwiseMin(d2);
  }
  return sum_a / static_cast<double>(a.rows()) + best_b.mean();
}

}  // namespace p2p
