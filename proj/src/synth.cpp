#include "p2p/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "p2p/errors.hpp"
#include "p2p/geometry.hpp"

namespace p2p {
namespace {

double to_float(double x) { return static_cast<double>(static_cast<float>(x)); }

Matrix to_float(const Matrix& m) { return m.unaryExpr([](double x) { return to_float(x); }); }

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  // splitmix64 finalizer
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (salt + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

struct SurfaceSample {
  Vec3 point;
  Vec3 normal;
};

Vec3 any_orthogonal(const Vec3& d) {
  const Vec3 trial = std::abs(d.x()) < 0.9 ? Vec3::UnitX() : Vec3::UnitY();
  return d.cross(trial).normalized();
}

Vec3 random_unit(std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  Vec3 v;
  do {
    v = Vec3(g(rng), g(rng), g(rng));
  } while (v.norm() < 1e-12);
  return v.normalized();
}

// Uniform sample on the surface of the union of capsules around the bones.
class CapsuleSampler {
 public:
  CapsuleSampler(const SyntheticBody& body, const Matrix& positions) : radius_(body.limb_radius) {
    for (auto [p, c] : body.skeleton.edges()) {
      const Vec3 a = positions.row(p).transpose();
      const Vec3 b = positions.row(c).transpose();
      segments_.push_back({a, b});
      const double len = (b - a).norm();
      cumulative_.push_back((cumulative_.empty() ? 0.0 : cumulative_.back()) + 2.0 * std::numbers::pi * radius_ * len +
                            4.0 * std::numbers::pi * radius_ * radius_);
    }
    if (segments_.empty()) {
      const Vec3 root = positions.row(0).transpose();
      segments_.push_back({root, root});
      cumulative_.push_back(1.0);
    }
  }

  SurfaceSample sample(std::mt19937_64& rng, double inset) const {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const double r = radius_ - inset;
    for (;;) {
      const double pick = u(rng) * cumulative_.back();
      const auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), pick);
      const auto& [a, b] = segments_[static_cast<std::size_t>(std::min<std::ptrdiff_t>(
          it - cumulative_.begin(), static_cast<std::ptrdiff_t>(segments_.size()) - 1))];
      const Vec3 axis = b - a;
      const double len = axis.norm();
      const double side = 2.0 * std::numbers::pi * radius_ * len;
      const double caps = 4.0 * std::numbers::pi * radius_ * radius_;
      if (len > 0.0 && u(rng) * (side + caps) < side) {
        const Vec3 d = axis / len;
        const Vec3 e1 = any_orthogonal(d);
        const Vec3 e2 = d.cross(e1);
        const double phi = 2.0 * std::numbers::pi * u(rng);
        const Vec3 n = std::cos(phi) * e1 + std::sin(phi) * e2;
        return {a + u(rng) * axis + r * n, n};
      }
      const Vec3 n = random_unit(rng);
      const bool at_b = u(rng) < 0.5;
      const Vec3 c = at_b ? b : a;
      // reject sphere points that fall inside the cylinder part
      if (len > 0.0) {
        const double s = (c + radius_ * n - a).dot(axis) / (len * len);
        if (s > 0.0 && s < 1.0) continue;
      }
      return {c + r * n, n};
    }
  }

 private:
  double radius_;
  std::vector<std::pair<Vec3, Vec3>> segments_;
  std::vector<double> cumulative_;
};

}  // namespace

SyntheticBody SyntheticBody::standard(int num_joints, double limb_radius) {
  SyntheticBody body;
  body.skeleton = SkeletonGraph::standard(num_joints);
  body.limb_radius = limb_radius;
  body.rest_offsets = Matrix::Zero(num_joints, 3);
  if (num_joints == 24) {
    body.rest_offsets << 0.0, 0.0, 0.0,  //
        0.06, -0.09, 0.0,                //  1 left hip
        -0.06, -0.09, 0.0,               //  2 right hip
        0.0, 0.11, 0.0,                  //  3 spine
        0.04, -0.38, 0.0,                //  4 left knee
        -0.04, -0.38, 0.0,               //  5 right knee
        0.0, 0.13, 0.0,                  //  6 spine
        0.0, -0.40, -0.03,               //  7 left ankle
        0.0, -0.40, -0.03,               //  8 right ankle
        0.0, 0.06, 0.0,                  //  9 chest
        0.0, -0.05, 0.12,                // 10 left foot
        0.0, -0.05, 0.12,                // 11 right foot
        0.0, 0.21, 0.0,                  // 12 neck
        0.07, 0.12, 0.0,                 // 13 left collar
        -0.07, 0.12, 0.0,                // 14 right collar
        0.0, 0.09, 0.05,                 // 15 head
        0.11, 0.03, 0.0,                 // 16 left shoulder
        -0.11, 0.03, 0.0,                // 17 right shoulder
        0.26, 0.0, 0.0,                  // 18 left elbow
        -0.26, 0.0, 0.0,                 // 19 right elbow
        0.25, 0.0, 0.0,                  // 20 left wrist
        -0.25, 0.0, 0.0,                 // 21 right wrist
        0.08, 0.0, 0.0,                  // 22 left hand
        -0.08, 0.0, 0.0;                 // 23 right hand
    return body;
  }
  // Balanced tree: spread children over a cone pointing away from the parent.
  for (int j = 1; j < num_joints; ++j) {
    const double angle = 2.39996322972865332 * j;  // golden angle
    const int depth = static_cast<int>(std::floor(std::log2(j + 1)));
    const double sign = (depth % 2 == 0) ? -1.0 : 1.0;
    Vec3 dir(std::cos(angle), sign * 0.8, std::sin(angle) * 0.3);
    body.rest_offsets.row(j) = 0.25 * dir.normalized().transpose();
  }
  return body;
}

std::vector<double> SyntheticBody::bone_lengths() const {
  std::vector<double> out(rest_offsets.rows(), 0.0);
  for (Eigen::Index j = 1; j < rest_offsets.rows(); ++j) out[j] = rest_offsets.row(j).norm();
  return out;
}

void SyntheticBody::validate() const {
  skeleton.validate();
  if (rest_offsets.rows() != skeleton.num_joints() || rest_offsets.cols() != 3) {
    throw ShapeError("rest offsets must be J x 3");
  }
  if (!(limb_radius > 0.0)) throw ShapeError("limb radius must be positive");
  const auto lengths = bone_lengths();
  for (std::size_t j = 1; j < lengths.size(); ++j) {
    if (!(lengths[j] > 0.0)) throw ShapeError("bone lengths must be positive");
  }
}

MotionScript MotionScript::still(int num_joints, double fps) {
  MotionScript s;
  s.joints.resize(num_joints);
  s.fps = fps;
  return s;
}

MotionScript MotionScript::random(int num_joints, std::uint64_t seed, double max_amplitude, double max_frequency,
                                  double fps) {
  MotionScript s;
  s.fps = fps;
  s.seed = seed;
  s.joints.resize(num_joints);
  std::mt19937_64 rng(mix_seed(seed, 0x5c41));
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int j = 0; j < num_joints; ++j) {
    for (int d = 0; d < kDofs; ++d) {
      for (int k = 0; k < 2; ++k) {
        Wave w;
        w.amplitude = max_amplitude * u(rng) / (k + 1);
        w.frequency = max_frequency * (0.25 + 0.75 * u(rng));
        w.phase = 2.0 * std::numbers::pi * u(rng);
        s.joints[j][d].push_back(w);
      }
    }
  }
  return s;
}

double MotionScript::angle(int joint, int dof, double time) const {
  double a = 0.0;
  for (const Wave& w : joints[joint][dof]) {
    a += w.amplitude * std::sin(2.0 * std::numbers::pi * w.frequency * time + w.phase);
  }
  return a;
}

double MotionScript::max_angular_speed(int joint) const {
  double s = 0.0;
  for (int d = 0; d < kDofs; ++d) {
    for (const Wave& w : joints[joint][d]) s += std::abs(2.0 * std::numbers::pi * w.frequency * w.amplitude);
  }
  return s;
}

Mat3 MotionScript::local_rotation(int joint, double time) const {
  const double a = angle(joint, 0, time);
  const double b = angle(joint, 1, time);
  const double c = angle(joint, 2, time);
  return (Eigen::AngleAxisd(c, Vec3::UnitZ()) * Eigen::AngleAxisd(b, Vec3::UnitY()) *
          Eigen::AngleAxisd(a, Vec3::UnitX()))
      .toRotationMatrix();
}

KinematicState forward_kinematics(const SyntheticBody& body, const MotionScript& script, double time) {
  const int J = body.skeleton.num_joints();
  if (static_cast<int>(script.joints.size()) != J) throw ShapeError("motion script joint count differs from body");
  const auto parents = body.skeleton.parents();
  // process joints parent-before-child
  std::vector<int> order;
  order.reserve(J);
  std::vector<std::vector<int>> children(J);
  for (int j = 1; j < J; ++j) children[parents[j]].push_back(j);
  order.push_back(0);
  for (std::size_t h = 0; h < order.size(); ++h) {
    for (int c : children[order[h]]) order.push_back(c);
  }
  KinematicState st;
  st.positions = Matrix::Zero(J, 3);
  st.local.resize(J);
  st.global.resize(J);
  for (int j : order) {
    st.local[j] = script.local_rotation(j, time);
    if (j == 0) {
      st.global[j] = st.local[j];
      continue;
    }
    const int p = parents[j];
    st.global[j] = st.global[p] * st.local[j];
    st.positions.row(j) = st.positions.row(p) + (st.global[p] * body.rest_offsets.row(j).transpose()).transpose();
  }
  return st;
}

double point_segment_distance(const Vec3& p, const Vec3& a, const Vec3& b) {
  const Vec3 ab = b - a;
  const double len2 = ab.squaredNorm();
  if (len2 == 0.0) return (p - a).norm();
  const double s = std::clamp((p - a).dot(ab) / len2, 0.0, 1.0);
  return (p - (a + s * ab)).norm();
}

GeneratedSequence generate_sequence(const SyntheticBody& body, const MotionScript& script, int frames,
                                    int points_per_frame, const SensorRig& rig) {
  body.validate();
  const int J = body.skeleton.num_joints();
  if (frames < 1) throw ShapeError("generate_sequence: frames must be >= 1");
  if (points_per_frame < J) throw ShapeError("generate_sequence: points_per_frame must be >= J");
  GeneratedSequence out;
  for (int f = 0; f < frames; ++f) {
    const double time = f / script.fps;
    const KinematicState ks = forward_kinematics(body, script, time);
    PoseFrame pose = PoseFrame::identity(J);
    pose.coords = to_float(ks.positions);
    root_relativize(pose);
    for (int j = 0; j < J; ++j) pose.set_rotation(j, encode_rotation(ks.local[j]));
    pose.rots = to_float(pose.rots);
    out.poses.frames.push_back(std::move(pose));

    const CapsuleSampler sampler(body, ks.positions);
    std::mt19937_64 rng(mix_seed(script.seed, 1000 + static_cast<std::uint64_t>(f)));
    const int want = points_per_frame * std::max(1, rig.oversample);
    std::vector<Vec3> candidates;
    candidates.reserve(want);
    int attempts = 0;
    while (static_cast<int>(candidates.size()) < want && attempts < 200 * want) {
      ++attempts;
      const SurfaceSample s = sampler.sample(rng, rig.surface_inset);
      if (rig.cull_backfaces && s.normal.dot(rig.camera_position - s.point) <= 0.0) continue;
      candidates.push_back(s.point);
    }
    if (static_cast<int>(candidates.size()) < points_per_frame) {
      throw ShapeError("generate_sequence: not enough visible surface to sample from");
    }
    Matrix cand(static_cast<Eigen::Index>(candidates.size()), 3);
    for (std::size_t i = 0; i < candidates.size(); ++i) cand.row(static_cast<Eigen::Index>(i)) = candidates[i].transpose();
    const auto pick = farthest_point_sampling(cand, points_per_frame, 0);
    Matrix pts(points_per_frame, 3);
    for (int i = 0; i < points_per_frame; ++i) pts.row(i) = cand.row(pick[i]);
    out.clouds.frames.push_back(to_float(pts));
  }
  return out;
}

Eigen::Matrix4d DepthCamera::extrinsics() const {
  Eigen::Matrix4d T = Eigen::Matrix4d::Identity();
  T(1, 1) = -1.0;
  T.topRightCorner<3, 1>() = position;
  return T;
}

Matrix DepthCamera::background() const { return Matrix::Constant(rows, cols, wall_depth); }

Matrix DepthCamera::render(const SyntheticBody& body, const MotionScript& script, int frame, std::uint64_t seed) const {
  const KinematicState ks = forward_kinematics(body, script, frame / script.fps);
  const CapsuleSampler sampler(body, ks.positions);
  std::mt19937_64 rng(mix_seed(seed, 50000 + static_cast<std::uint64_t>(frame)));
  Matrix depth = background();
  const int samples = rows * cols * 8;
  for (int s = 0; s < samples; ++s) {
    const SurfaceSample p = sampler.sample(rng, 0.0);
    // world -> camera: flip y, shift by camera position
    const Vec3 c(p.point.x() - position.x(), -(p.point.y() - position.y()), p.point.z() - position.z());
    if (c.z() <= 0.0) continue;
    const int u = static_cast<int>(std::lround(intrinsics.fx * c.x() / c.z() + intrinsics.cx));
    const int v = static_cast<int>(std::lround(intrinsics.fy * c.y() / c.z() + intrinsics.cy));
    if (u < 0 || v < 0 || u >= cols || v >= rows) continue;
    depth(v, u) = std::min(depth(v, u), c.z());
  }
  return depth;
}

}  // namespace p2p
