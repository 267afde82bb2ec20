#pragma once

#include <random>
#include <vector>

#include "p2p/autodiff.hpp"
#include "p2p/config.hpp"
#include "p2p/nn.hpp"
#include "p2p/pose.hpp"

namespace p2p {

/// FPS-centred kNN patches for every frame of a sequence. Rows are ordered
/// (frame, patch) for centers and (frame, patch, member) for patches; members
/// are sorted by distance so each patch starts with its own center.
struct PatchSet {
  int frames = 0;
  int patches = 0;     // G
  int patch_size = 0;  // M
  Matrix centers;      // (T*G) x 3
  Matrix members;      // (T*G*M) x 3, relative to the patch center
  std::vector<int> indices;  // source point of each member row
};

PatchSet make_patches(const PointCloudSequence& cloud, int patches, int patch_size, int seed_index);

/// [local | global broadcast over patches]; rows (frame, patch).
ad::Var fuse_features(const ad::Var& local, const ad::Var& global, int patches);

struct AttentionTrace {
  ad::AttentionProbe temporal;
  ad::AttentionProbe spatial;
};

/// Sinusoidal encoding of frame age (0 for the most recent frame).
Matrix temporal_positions(int frames, int dims);

class PointCloudEncoder {
 public:
  PointCloudEncoder() = default;
  PointCloudEncoder(nn::ParamStore& store, const ModelConfig& config, std::mt19937_64& rng);

  /// Mini-PointNet per patch; rows follow the concatenated PatchSets.
  ad::Var local_features(const std::vector<PatchSet>& batch) const;
  /// Two-level set abstraction then a global max-pool; one row per frame.
  ad::Var global_features(const std::vector<const PointCloudSequence*>& batch) const;
  /// Temporal then spatial self-attention, mean-pooled per batch element and
  /// projected to cloud_dim. `fused` rows are (batch, frame, patch).
  ad::Var attend(const ad::Var& fused, const std::vector<PatchSet>& batch, AttentionTrace* trace = nullptr) const;

  /// Full pipeline; seeds gives the FPS start index for each batch element.
  ad::Var encode(const std::vector<const PointCloudSequence*>& batch, const std::vector<int>& seeds,
                 AttentionTrace* trace = nullptr) const;

  ModelConfig config;
  nn::Mlp local_mlp;
  nn::Mlp sa1, sa2, sa3;
  nn::Linear temporal_q, temporal_k, temporal_v;
  nn::Linear spatial_q, spatial_k, spatial_v;
  nn::Linear center_embedding;
  nn::Linear output;
};

}  // namespace p2p
