#include "p2p/pose_encoder.hpp"

#include <string>

#include "p2p/errors.hpp"

namespace p2p {

using ad::Var;

std::shared_ptr<const ad::SparseOp> spatial_operator(const SkeletonGraph& skeleton, int frames) {
  skeleton.validate();
  const Matrix a = skeleton.normalized_adjacency();
  const int J = skeleton.num_joints();
  std::vector<Eigen::Triplet<double>> trip;
  for (int t = 0; t < frames; ++t) {
    for (int r = 0; r < J; ++r) {
      for (int c = 0; c < J; ++c) {
        if (a(r, c) != 0.0) trip.emplace_back(t * J + r, t * J + c, a(r, c));
      }
    }
  }
  auto op = std::make_shared<ad::SparseOp>(frames * J, frames * J);
  op->setFromTriplets(trip.begin(), trip.end());
  return op;
}

std::shared_ptr<const ad::SparseOp> temporal_shift(int joints, int frames, int offset) {
  std::vector<Eigen::Triplet<double>> trip;
  for (int t = 0; t < frames; ++t) {
    const int s = t + offset;
    if (s < 0 || s >= frames) continue;
    for (int j = 0; j < joints; ++j) trip.emplace_back(t * joints + j, s * joints + j, 1.0);
  }
  auto op = std::make_shared<ad::SparseOp>(frames * joints, frames * joints);
  op->setFromTriplets(trip.begin(), trip.end());
  return op;
}

Matrix history_matrix(const PoseSequence& history) {
  if (history.size() == 0) throw ShapeError("pose history must hold at least one frame");
  const int J = history.num_joints();
  Matrix out(static_cast<Eigen::Index>(history.size()) * J, kPoseDims);
  for (std::size_t t = 0; t < history.size(); ++t) {
    if (history.frames[t].num_joints() != J) throw ShapeError("pose history frames disagree on J");
    out.middleRows(static_cast<Eigen::Index>(t) * J, J) = history.frames[t].stacked();
  }
  return out;
}

Var fuse_pose_point(const Var& pose, const Var& cloud, int joints) {
  if (joints < 1) throw ShapeError("fuse_pose_point: joints must be >= 1");
  std::vector<int> broadcast(static_cast<std::size_t>(cloud.rows()) * joints);
  for (std::size_t r = 0; r < broadcast.size(); ++r) broadcast[r] = static_cast<int>(r) / joints;
  Var dup = ad::gather_rows(cloud, broadcast);
  if (!pose.defined()) return dup;
  if (pose.rows() != dup.rows()) {
    throw ShapeError("fuse_pose_point: pose features have " + std::to_string(pose.rows()) + " rows, expected " +
                     std::to_string(dup.rows()));
  }
  return ad::concat_cols({pose, dup});
}

PoseEncoder::PoseEncoder(nn::ParamStore& store, const ModelConfig& cfg, SkeletonGraph sk, std::mt19937_64& rng)
    : config(cfg), skeleton(std::move(sk)) {
  skeleton.validate();
  if (skeleton.num_joints() != cfg.joints) throw ShapeError("skeleton size differs from model.joints");
  int in = kPoseDims;
  for (int l = 0; l < cfg.gcn_layers; ++l) {
    const std::string p = "pose.layer" + std::to_string(l);
    spatial.emplace_back(store, p + ".spatial", in, cfg.hidden, rng);
    temporal.emplace_back(store, p + ".temporal", cfg.temporal_kernel * cfg.hidden, cfg.hidden, rng);
    in = cfg.hidden;
  }
  head = nn::Mlp(store, "pose.head", {in, cfg.hidden, cfg.pose_dim}, rng);
}

Var PoseEncoder::encode(const std::vector<Matrix>& histories) const {
  const int J = skeleton.num_joints();
  if (histories.empty()) throw ShapeError("pose encoder: empty batch");
  const Eigen::Index rows = histories.front().rows();
  if (rows == 0 || rows % J != 0) throw ShapeError("pose encoder: history rows must be a multiple of J");
  const int frames = static_cast<int>(rows / J);
  const int B = static_cast<int>(histories.size());

  Matrix stacked(rows * B, kPoseDims);
  for (int b = 0; b < B; ++b) {
    if (histories[b].rows() != rows || histories[b].cols() != kPoseDims) {
      throw ShapeError("pose encoder: histories must share shape (T-1)*J x 9");
    }
    stacked.middleRows(b * rows, rows) = histories[b];
  }

  // Batch elements are laid out as extra frames; shifts never cross element boundaries.
  const auto adj = spatial_operator(skeleton, frames * B);
  std::vector<std::shared_ptr<const ad::SparseOp>> shifts;
  const int half = config.temporal_kernel / 2;
  for (int o = -half; o <= half; ++o) {
    if (o == 0) {
      shifts.push_back(nullptr);
      continue;
    }
    std::vector<Eigen::Triplet<double>> trip;
    for (int b = 0; b < B; ++b) {
      for (int t = 0; t < frames; ++t) {
        const int s = t + o;
        if (s < 0 || s >= frames) continue;
        for (int j = 0; j < J; ++j) trip.emplace_back((b * frames + t) * J + j, (b * frames + s) * J + j, 1.0);
      }
    }
    auto op = std::make_shared<ad::SparseOp>(rows * B, rows * B);
    op->setFromTriplets(trip.begin(), trip.end());
    shifts.push_back(std::move(op));
  }

  Var x = ad::constant(std::move(stacked));
  for (std::size_t l = 0; l < spatial.size(); ++l) {
    Var y = ad::sparse_left_mul(adj, spatial[l](x));
    std::vector<Var> taps;
    for (const auto& s : shifts) taps.push_back(s ? ad::sparse_left_mul(s, y) : y);
    x = ad::gelu(temporal[l](ad::concat_cols(taps)));
  }

  std::vector<Eigen::Triplet<double>> pool;
  for (int b = 0; b < B; ++b) {
    for (int t = 0; t < frames; ++t) {
      for (int j = 0; j < J; ++j) pool.emplace_back(b * J + j, (b * frames + t) * J + j, 1.0 / frames);
    }
  }
  auto avg = std::make_shared<ad::SparseOp>(B * J, rows * B);
  avg->setFromTriplets(pool.begin(), pool.end());
  return head(ad::sparse_left_mul(avg, x));
}

}  // namespace p2p
