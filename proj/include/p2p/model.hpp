#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "p2p/autodiff.hpp"
#include "p2p/config.hpp"
#include "p2p/generative.hpp"
#include "p2p/nn.hpp"
#include "p2p/pc_encoder.hpp"
#include "p2p/pose_encoder.hpp"

namespace p2p {

/// One supervised example: T cloud frames ending at the current frame, the
/// T-1 preceding poses, and the current pose.
struct TrainingWindow {
  PointCloudSequence clouds;
  PoseSequence history;
  PoseFrame target;
};

/// Cross-attention heads for the coordinate and rotation branches. Each
/// branch: Q = query([x; e]) + skip(x) + P, K = key(tokens) + P with P the
/// learned joint code, H = Q + Attn(Q, K, K), then the output map
/// out(H + ffn(H)). `out` starts at zero.
struct DenoiserHeads {
  ad::Var joint_code;  // J x denoiser_dim
  nn::Mlp coord_query;
  nn::Linear coord_skip;
  nn::Linear coord_key;
  nn::Mlp coord_ffn;
  nn::Linear coord_out;
  nn::Mlp rot_query;
  nn::Linear rot_skip;
  nn::Linear rot_key;
  nn::Mlp rot_ffn;
  nn::Linear rot_out;

  DenoiserHeads() = default;
  DenoiserHeads(nn::ParamStore& store, const ModelConfig& config, std::mt19937_64& rng);
};

/// Per-row [e_i | e_J] for a batch where sample b sits at iteration its[b].
Matrix embedding_rows(const std::vector<int>& its, int joints);

/// Rows (batch, joint). Each joint's query attends the J pose-point tokens of
/// its own batch element; keys double as values.
ad::Var denoise_coords(const DenoiserHeads& heads, const ad::Var& noisy, const ad::Var& fpx, const Matrix& emb,
                       int joints, int num_heads, ad::AttentionProbe* probe = nullptr);
ad::Var denoise_rots(const DenoiserHeads& heads, const ad::Var& noisy, const ad::Var& coords, const ad::Var& fpx,
                     const Matrix& emb, int joints, int num_heads, ad::AttentionProbe* probe = nullptr);

class Point2Pose {
 public:
  Point2Pose(const ModelConfig& config, SkeletonGraph skeleton, std::uint64_t seed);
  Point2Pose(const Point2Pose&) = delete;
  Point2Pose& operator=(const Point2Pose&) = delete;

  const ModelConfig& config() const { return config_; }
  const SkeletonGraph& skeleton() const { return skeleton_; }
  nn::ParamStore& params() { return store_; }
  const nn::ParamStore& params() const { return store_; }

  /// Pose-point features, (B*J) x pose_point_dim.
  ad::Var condition(const std::vector<const PointCloudSequence*>& clouds, const std::vector<Matrix>& histories,
                    const std::vector<int>& fps_seeds) const;

  /// Batch training objective. Draws iterations, noise, (optionally) FPS seeds
  /// from rng in a fixed order, so equal rng state gives an equal graph.
  ad::Var loss(const std::vector<const TrainingWindow*>& batch, const DiffusionConfig& diffusion,
               std::mt19937_64& rng, bool random_fps_seed) const;

  /// Draws one pose for the last cloud frame given the pose history.
  PoseFrame sample(const PointCloudSequence& clouds, const PoseSequence& history, const DiffusionConfig& diffusion,
                   std::mt19937_64& rng) const;

  PointCloudEncoder cloud_encoder;
  PoseEncoder pose_encoder;
  DenoiserHeads heads;

 private:
  ModelConfig config_;
  SkeletonGraph skeleton_;
  nn::ParamStore store_;
};

/// Zeroes gradients, evaluates the loss and back-propagates. Throws
/// NumericalError on a non-finite loss.
double train_step(Point2Pose& model, const std::vector<const TrainingWindow*>& batch,
                  const DiffusionConfig& diffusion, std::mt19937_64& rng, bool random_fps_seed);

/// PoseDenoiser view of a model with fixed conditioning features.
class ConditionedDenoiser final : public PoseDenoiser {
 public:
  ConditionedDenoiser(const Point2Pose& model, Matrix fpx);
  int num_joints() const override;
  Matrix predict_coords(const Matrix& noisy_coords, int i) override;
  Matrix predict_rots(const Matrix& noisy_rots, const Matrix& coords_pred, int i) override;

 private:
  const Point2Pose& model_;
  Matrix fpx_;
};

}  // namespace p2p
