#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "p2p/pcd_prep.hpp"
#include "p2p/pose.hpp"

namespace p2p {

/// Articulated capsule body. rest_offsets row j is joint j's offset from its
/// parent, expressed in the parent's frame at rest (row 0 unused).
struct SyntheticBody {
  SkeletonGraph skeleton;
  Matrix rest_offsets;
  double limb_radius = 0.05;

  static SyntheticBody standard(int num_joints, double limb_radius = 0.05);

  /// Length of the bone ending at each joint (0 for the root).
  std::vector<double> bone_lengths() const;
  void validate() const;
};

/// Each joint rotates as Rz(c) * Ry(b) * Rx(a) where every angle is a sum of
/// sinusoids: angle(t) = sum_k amp_k * sin(2 pi freq_k t + phase_k).
struct MotionScript {
  struct Wave {
    double amplitude = 0.0;
    double frequency = 0.0;  // Hz
    double phase = 0.0;
  };
  static constexpr int kDofs = 3;

  std::vector<std::array<std::vector<Wave>, kDofs>> joints;
  double fps = 30.0;
  std::uint64_t seed = 0;

  static MotionScript still(int num_joints, double fps = 30.0);
  static MotionScript random(int num_joints, std::uint64_t seed, double max_amplitude = 0.5,
                             double max_frequency = 0.8, double fps = 30.0);

  double angle(int joint, int dof, double time) const;
  /// Upper bound on |d angle / dt| summed over the joint's three axes.
  double max_angular_speed(int joint) const;
  Mat3 local_rotation(int joint, double time) const;
};

struct SensorRig {
  Vec3 camera_position{0.0, 0.0, -3.0};  // world frame, looking along +z
  bool cull_backfaces = true;
  /// Points are sampled this far inside the capsule surface so float storage
  /// never pushes them past limb_radius.
  double surface_inset = 1e-6;
  int oversample = 4;
};

struct GeneratedSequence {
  PointCloudSequence clouds;
  PoseSequence poses;
};

/// Forward kinematics. Returns world joint positions (root at the origin) and
/// the local rotations used.
struct KinematicState {
  Matrix positions;  // J x 3
  std::vector<Mat3> local;
  std::vector<Mat3> global;
};
KinematicState forward_kinematics(const SyntheticBody& body, const MotionScript& script, double time);

/// Pure function of its arguments. Coordinates are rounded to float precision
/// so that datasets round-trip bit-exactly.
GeneratedSequence generate_sequence(const SyntheticBody& body, const MotionScript& script, int frames,
                                    int points_per_frame, const SensorRig& rig = {});

/// Distance from p to the segment [a, b].
double point_segment_distance(const Vec3& p, const Vec3& a, const Vec3& b);

/// Pinhole view of the synthetic scene used to produce depth frames.
struct DepthCamera {
  int rows = 60;
  int cols = 80;
  CameraIntrinsics intrinsics{70.0, 70.0, 40.0, 30.0};
  Vec3 position{0.0, 0.0, -3.0};
  double wall_depth = 6.0;  // background plane, camera frame

  /// camera -> world transform (camera axes: x right, y down, z forward).
  Eigen::Matrix4d extrinsics() const;
  Matrix background() const;
  /// Z-buffers densely sampled body surface points over the background.
  Matrix render(const SyntheticBody& body, const MotionScript& script, int frame, std::uint64_t seed) const;
};

}  // namespace p2p
