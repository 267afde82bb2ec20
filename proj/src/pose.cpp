#include "p2p/pose.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <queue>
#include <string>

#include "p2p/errors.hpp"

namespace p2p {

Mat3 decode_rotation(const Rotation6D& r) {
  if (!r.a1.allFinite() || !r.a2.allFinite()) {
    throw DegenerateRotation("6D rotation has non-finite entries");
  }
  const double n1 = r.a1.norm();
  if (n1 < 1e-12) {
    throw DegenerateRotation("6D rotation: first column is zero");
  }
  const Vec3 b1 = r.a1 / n1;
  const Vec3 u2 = r.a2 - b1.dot(r.a2) * b1;
  const double n2 = u2.norm();
  if (n2 < 1e-12 * std::max(1.0, r.a2.norm())) {
    throw DegenerateRotation("6D rotation: columns are parallel");
  }
  const Vec3 b2 = u2 / n2;
  Mat3 R;
  R.col(0) = b1;
  R.col(1) = b2;
  R.col(2) = b1.cross(b2);
  return R;
}

Rotation6D encode_rotation(const Mat3& R) {
  if (!R.allFinite()) {
    throw InvalidRotation("rotation matrix has non-finite entries");
  }
  const double ortho = (R.transpose() * R - Mat3::Identity()).cwiseAbs().maxCoeff();
  if (ortho > 1e-6 || std::abs(R.determinant() - 1.0) > 1e-6) {
    throw InvalidRotation("matrix is not a proper rotation");
  }
  return {R.col(0), R.col(1)};
}

PoseFrame PoseFrame::identity(int num_joints) {
  PoseFrame f;
  f.coords = Matrix::Zero(num_joints, kCoordDims);
  f.rots = Matrix::Zero(num_joints, kRotDims);
  for (int j = 0; j < num_joints; ++j) {
    f.rots(j, 0) = 1.0;
    f.rots(j, 4) = 1.0;
  }
  return f;
}

Rotation6D PoseFrame::rotation(int joint) const {
  Rotation6D r;
  r.a1 = Vec3(rots(joint, 0), rots(joint, 1), rots(joint, 2));
  r.a2 = Vec3(rots(joint, 3), rots(joint, 4), rots(joint, 5));
  return r;
}

void PoseFrame::set_rotation(int joint, const Rotation6D& r) {
  for (int k = 0; k < 3; ++k) {
    rots(joint, k) = r.a1[k];
    rots(joint, 3 + k) = r.a2[k];
  }
}

Matrix PoseFrame::stacked() const {
  Matrix x(num_joints(), kPoseDims);
  x.leftCols(kCoordDims) = coords;
  x.rightCols(kRotDims) = rots;
  return x;
}

PoseFrame PoseFrame::from_stacked(const Matrix& x) {
  if (x.cols() != kPoseDims) {
    throw ShapeError("pose matrix must have 9 columns, got " + std::to_string(x.cols()));
  }
  PoseFrame f;
  f.coords = x.leftCols(kCoordDims);
  f.rots = x.rightCols(kRotDims);
  return f;
}

void PoseFrame::validate() const {
  if (coords.cols() != kCoordDims || rots.cols() != kRotDims || coords.rows() != rots.rows()) {
    throw ShapeError("pose frame must be J x 3 coords and J x 6 rots");
  }
}

void root_relativize(PoseFrame& frame) {
  if (frame.coords.rows() == 0) return;
  const Eigen::RowVector3d root = frame.coords.row(0);
  frame.coords.rowwise() -= root;
}

void PoseSequence::validate() const {
  const int J = num_joints();
  for (const auto& f : frames) {
    f.validate();
    if (f.num_joints() != J) throw ShapeError("pose sequence frames disagree on J");
  }
}

void PointCloudSequence::validate() const {
  const int N = num_points();
  for (const auto& f : frames) {
    if (f.cols() != 3 || f.rows() != N) {
      throw ShapeError("point cloud frames must all be N x 3 with the same N");
    }
    if (!f.allFinite()) throw ShapeError("point cloud contains non-finite coordinates");
  }
}

SkeletonGraph::SkeletonGraph(int num_joints, std::vector<std::pair<int, int>> edges)
    : num_joints_(num_joints), edges_(std::move(edges)) {}

SkeletonGraph SkeletonGraph::from_parents(const std::vector<int>& parents) {
  std::vector<std::pair<int, int>> edges;
  for (int j = 0; j < static_cast<int>(parents.size()); ++j) {
    if (parents[j] >= 0) edges.emplace_back(parents[j], j);
  }
  SkeletonGraph g(static_cast<int>(parents.size()), std::move(edges));
  g.validate();
  return g;
}

SkeletonGraph SkeletonGraph::smpl24() {
  return from_parents({-1, 0, 0, 0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 9, 9, 12, 13, 14, 16, 17, 18, 19, 20, 21});
}

SkeletonGraph SkeletonGraph::standard(int num_joints) {
  if (num_joints == 24) return smpl24();
  if (num_joints < 1) throw InvalidSkeleton("skeleton needs at least one joint");
  std::vector<int> parents(num_joints);
  parents[0] = -1;
  for (int j = 1; j < num_joints; ++j) parents[j] = (j - 1) / 2;
  return from_parents(parents);
}

bool SkeletonGraph::is_connected() const {
  if (num_joints_ == 0) return false;
  std::vector<std::vector<int>> adj(num_joints_);
  for (auto [a, b] : edges_) {
    if (a < 0 || b < 0 || a >= num_joints_ || b >= num_joints_) return false;
    adj[a].push_back(b);
    adj[b].push_back(a);
  }
  std::vector<char> seen(num_joints_, 0);
  std::queue<int> q;
  q.push(0);
  seen[0] = 1;
  int count = 1;
  while (!q.empty()) {
    const int u = q.front();
    q.pop();
    for (int v : adj[u]) {
      if (!seen[v]) {
        seen[v] = 1;
        ++count;
        q.push(v);
      }
    }
  }
  return count == num_joints_;
}

void SkeletonGraph::validate() const {
  if (num_joints_ < 1) throw InvalidSkeleton("skeleton has no joints");
  for (auto [a, b] : edges_) {
    if (a < 0 || b < 0 || a >= num_joints_ || b >= num_joints_) {
      throw InvalidSkeleton("edge index out of range");
    }
    if (a == b) throw InvalidSkeleton("self-loop edge");
  }
  if (static_cast<int>(edges_.size()) != num_joints_ - 1) {
    throw InvalidSkeleton("skeleton must be a tree (J - 1 edges)");
  }
  if (!is_connected()) throw InvalidSkeleton("skeleton is disconnected");
}

std::vector<int> SkeletonGraph::parents() const {
  std::vector<std::vector<int>> adj(num_joints_);
  for (auto [a, b] : edges_) {
    adj[a].push_back(b);
    adj[b].push_back(a);
  }
  std::vector<int> parent(num_joints_, -2);
  parent[0] = -1;
  std::queue<int> q;
  q.push(0);
  while (!q.empty()) {
    const int u = q.front();
    q.pop();
    for (int v : adj[u]) {
      if (parent[v] == -2) {
        parent[v] = u;
        q.push(v);
      }
    }
  }
  return parent;
}

Matrix SkeletonGraph::normalized_adjacency() const {
  Matrix A = Matrix::Identity(num_joints_, num_joints_);
  for (auto [a, b] : edges_) {
    A(a, b) = 1.0;
    A(b, a) = 1.0;
  }
  const Eigen::VectorXd inv_sqrt = A.rowwise().sum().cwiseSqrt().cwiseInverse();
  return inv_sqrt.asDiagonal() * A * inv_sqrt.asDiagonal();
}

double mpjpe(const PoseFrame& pred, const PoseFrame& gt) {
  if (pred.num_joints() != gt.num_joints() || pred.coords.cols() != 3 || gt.coords.cols() != 3) {
    throw ShapeError("mpjpe: joint counts differ");
  }
  const int J = gt.num_joints();
  if (J == 0) return 0.0;
  const Eigen::RowVector3d pr = pred.coords.row(0);
  const Eigen::RowVector3d gr = gt.coords.row(0);
  double sum = 0.0;
  for (int j = 0; j < J; ++j) {
    sum += ((pred.coords.row(j) - pr) - (gt.coords.row(j) - gr)).norm();
  }
  return 1000.0 * sum / J;
}

double rotation_angle(const Mat3& R) {
  const double c = std::clamp((R.trace() - 1.0) / 2.0, -1.0, 1.0);
  return std::acos(c);
}

double angular_error(const PoseFrame& pred, const PoseFrame& gt) {
  if (pred.num_joints() != gt.num_joints()) {
    throw ShapeError("angular_error: joint counts differ");
  }
  const int J = gt.num_joints();
  if (J == 0) return 0.0;
  double sum = 0.0;
  for (int j = 0; j < J; ++j) {
    const Mat3 rp = decode_rotation(pred.rotation(j));
    const Mat3 rg = decode_rotation(gt.rotation(j));
    sum += rotation_angle(rp * rg.transpose());
  }
  return sum / J * 180.0 / std::numbers::pi;
}

}  // namespace p2p
