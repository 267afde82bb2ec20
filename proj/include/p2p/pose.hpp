#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <utility>
#include <vector>

namespace p2p {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

inline constexpr int kCoordDims = 3;
inline constexpr int kRotDims = 6;
inline constexpr int kPoseDims = kCoordDims + kRotDims;

/// First two columns of a rotation matrix, before orthonormalization.
struct Rotation6D {
  Vec3 a1 = Vec3::UnitX();
  Vec3 a2 = Vec3::UnitY();
};

/// Gram-Schmidt decoding. Throws DegenerateRotation when a1 vanishes or a1 and
/// a2 are parallel.
Mat3 decode_rotation(const Rotation6D& r);

/// Drops the third column. Throws InvalidRotation unless R is orthonormal with
/// det +1 (within 1e-6).
Rotation6D encode_rotation(const Mat3& R);

/// One frame of pose data. coords is J x 3 in meters (root-relative once
/// root_relativize has run); rots is J x 6 with row j = [a1, a2].
struct PoseFrame {
  Matrix coords;
  Matrix rots;

  /// Rest pose: zero coordinates and identity rotations.
  static PoseFrame identity(int num_joints);

  int num_joints() const { return static_cast<int>(coords.rows()); }
  Rotation6D rotation(int joint) const;
  void set_rotation(int joint, const Rotation6D& r);
  /// J x 9 row-major [coords | rots].
  Matrix stacked() const;
  static PoseFrame from_stacked(const Matrix& x);
  void validate() const;
};

/// Subtracts the root joint (index 0) from every joint.
void root_relativize(PoseFrame& frame);

struct PoseSequence {
  std::vector<PoseFrame> frames;

  int num_joints() const { return frames.empty() ? 0 : frames.front().num_joints(); }
  std::size_t size() const { return frames.size(); }
  void validate() const;
};

struct PointCloudSequence {
  std::vector<Matrix> frames;  // each N x 3

  int num_points() const { return frames.empty() ? 0 : static_cast<int>(frames.front().rows()); }
  std::size_t size() const { return frames.size(); }
  void validate() const;
};

/// Kinematic tree over J joints. Edges are (parent, child).
class SkeletonGraph {
 public:
  SkeletonGraph() = default;
  SkeletonGraph(int num_joints, std::vector<std::pair<int, int>> edges);

  /// parents[0] must be -1; parents[j] < j is not required but every joint
  /// must reach the root.
  static SkeletonGraph from_parents(const std::vector<int>& parents);
  /// SMPL-style 24-joint tree.
  static SkeletonGraph smpl24();
  /// smpl24 for J=24, otherwise a balanced tree with parent (j-1)/2.
  static SkeletonGraph standard(int num_joints);

  int num_joints() const { return num_joints_; }
  const std::vector<std::pair<int, int>>& edges() const { return edges_; }

  /// Throws InvalidSkeleton unless the graph is a tree spanning [0, J).
  void validate() const;
  bool is_connected() const;
  /// Parent of each joint in the tree rooted at 0; root has -1.
  std::vector<int> parents() const;
  /// D^-1/2 (A + I) D^-1/2.
  Matrix normalized_adjacency() const;

 private:
  int num_joints_ = 0;
  std::vector<std::pair<int, int>> edges_;
};

/// Mean per-joint position error of root-relative coordinates, millimeters.
double mpjpe(const PoseFrame& pred, const PoseFrame& gt);

/// Mean geodesic angle between decoded joint rotations, degrees.
double angular_error(const PoseFrame& pred, const PoseFrame& gt);

/// Geodesic angle of a single relative rotation, radians.
double rotation_angle(const Mat3& R);

}  // namespace p2p
