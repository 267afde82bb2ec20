#pragma once

#include <memory>
#include <random>
#include <vector>

#include "p2p/autodiff.hpp"
#include "p2p/config.hpp"
#include "p2p/nn.hpp"
#include "p2p/pose.hpp"

namespace p2p {

/// Block-diagonal normalized adjacency for `frames` stacked copies of the
/// skeleton (rows ordered frame, joint). Throws InvalidSkeleton when the
/// skeleton is not a connected tree.
std::shared_ptr<const ad::SparseOp> spatial_operator(const SkeletonGraph& skeleton, int frames);

/// Zero-padded shift along the frame axis: row (t, j) of the result is row
/// (t + offset, j) of the input.
std::shared_ptr<const ad::SparseOp> temporal_shift(int joints, int frames, int offset);

/// Stacks a pose history into (T-1)*J rows of 9 channels, frame-major.
Matrix history_matrix(const PoseSequence& history);

/// [F_x | F_p^st broadcast over joints]. Pass an undefined pose Var to get the
/// cloud-only variant. Rows (batch, joint).
ad::Var fuse_pose_point(const ad::Var& pose, const ad::Var& cloud, int joints);

class PoseEncoder {
 public:
  PoseEncoder() = default;
  PoseEncoder(nn::ParamStore& store, const ModelConfig& config, SkeletonGraph skeleton, std::mt19937_64& rng);

  /// histories[b] is (T-1)*J x 9; returns (B*J) x pose_dim, rows (batch, joint).
  ad::Var encode(const std::vector<Matrix>& histories) const;

  ModelConfig config;
  SkeletonGraph skeleton;
  std::vector<nn::Linear> spatial;
  std::vector<nn::Linear> temporal;  // input width temporal_kernel * hidden
  nn::Mlp head;
};

}  // namespace p2p
