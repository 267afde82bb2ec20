#pragma once

#include <vector>

#include "p2p/pose.hpp"

namespace p2p {

struct CameraIntrinsics {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;
};

/// Depth image in meters; 0 marks an invalid pixel.
struct DepthMap {
  Matrix values;  // rows x cols
  CameraIntrinsics intrinsics;
};

struct SegmentationOptions {
  double dbscan_eps = 0.08;
  int dbscan_min_pts = 4;
  int sor_k = 8;
  double sor_std_ratio = 2.0;
};

/// Zeroes every pixel within tau of the reference depth. Invalid pixels stay 0.
Matrix subtract_background(const Matrix& depth, const Matrix& reference, double tau);

/// Keeps the largest 8-connected component of nonzero pixels; earlier raster
/// order wins ties.
Matrix largest_connected_component(const Matrix& depth);

/// Back-projects nonzero pixels (row = v, col = u) into camera coordinates.
Matrix depth_to_points(const Matrix& depth, const CameraIntrinsics& k);

/// Applies a 4x4 homogeneous transform to every row.
Matrix transform_points(const Matrix& points, const Eigen::Matrix4d& T);

/// Background removal, largest component, back-projection, extrinsics, then
/// DBSCAN noise removal and SOR. Throws EmptySegmentation when nothing remains.
Matrix segment_human(const DepthMap& depth, const DepthMap& reference, double tau,
                     const Eigen::Matrix4d& extrinsics, const SegmentationOptions& opts = {});

inline constexpr int kNoise = -1;

/// Density-based clustering, textbook expansion order over ascending indices.
/// Labels are 0..C-1, or kNoise.
std::vector<int> dbscan(const Matrix& points, double eps, int min_pts);

/// Indices of points that are not DBSCAN noise.
std::vector<int> dbscan_inliers(const Matrix& points, double eps, int min_pts);

/// Statistical outlier removal. Returns the indices kept, ascending.
std::vector<int> sor(const Matrix& points, int k, double std_ratio);

/// Which coordinate axes form the clustering plane and which one is depth.
struct ProjectionPlane {
  int u_axis = 0;
  int v_axis = 1;
  int depth_axis = 2;
};

struct GpcParams {
  double lambda = 2.0;
  int min_cluster = 10;  // n_c
  int k = 8;
  double cell = 0.05;          // 2D connection radius for the BFS proximity graph
  double depth_margin = 0.3;   // M1/M2 = depth range of the largest cluster -/+ margin
};

/// Graph-based point cloud clustering. Returns indices kept, ascending.
/// Throws EmptyResult when every cluster is dropped.
std::vector<int> gpc(const Matrix& points, const GpcParams& params, const ProjectionPlane& plane = {});

/// Symmetric mean-normalized squared nearest-neighbor distance.
/// Throws EmptyInput on an empty set.
double chamfer(const Matrix& a, const Matrix& b);

/// Rows of points listed in indices.
Matrix select_rows(const Matrix& points, const std::vector<int>& indices);

}  // namespace p2p
