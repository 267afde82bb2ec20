#include "p2p/pc_encoder.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "p2p/errors.hpp"
#include "p2p/geometry.hpp"

namespace p2p {

using ad::Var;

PatchSet make_patches(const PointCloudSequence& cloud, int patches, int patch_size, int seed_index) {
  const int T = static_cast<int>(cloud.size());
  if (T == 0) throw ShapeError("make_patches: empty sequence");
  PatchSet ps;
  ps.frames = T;
  ps.patches = patches;
  ps.patch_size = patch_size;
  ps.centers.resize(static_cast<Eigen::Index>(T) * patches, 3);
  ps.members.resize(static_cast<Eigen::Index>(T) * patches * patch_size, 3);
  ps.indices.reserve(static_cast<std::size_t>(ps.members.rows()));
  Eigen::Index row = 0;
  for (int t = 0; t < T; ++t) {
    const Matrix& pts = cloud.frames[t];
    if (pts.cols() != 3) throw ShapeError("make_patches: points must be N x 3");
    if (patch_size < 1 || patch_size > pts.rows()) {
      throw ShapeError("make_patches: need 1 <= M <= N (M=" + std::to_string(patch_size) +
                       ", N=" + std::to_string(pts.rows()) + ")");
    }
    if (seed_index < 0 || seed_index >= pts.rows()) throw ShapeError("make_patches: seed index out of range");
    const auto centers = farthest_point_sampling(pts, patches, seed_index);
    for (int g = 0; g < patches; ++g) {
      const Vec3 c = pts.row(centers[g]).transpose();
      ps.centers.row(static_cast<Eigen::Index>(t) * patches + g) = c.transpose();
      for (int m : k_nearest(pts, c, patch_size)) {
        ps.members.row(row++) = pts.row(m) - c.transpose();
        ps.indices.push_back(m);
      }
    }
  }
  return ps;
}

Var fuse_features(const Var& local, const Var& global, int patches) {
  if (patches < 1 || local.rows() != global.rows() * patches) {
    throw ShapeError("fuse_features: local has " + std::to_string(local.rows()) + " rows, expected " +
                     std::to_string(global.rows()) + " frames x " + std::to_string(patches) + " patches");
  }
  std::vector<int> broadcast(static_cast<std::size_t>(local.rows()));
  for (std::size_t r = 0; r < broadcast.size(); ++r) broadcast[r] = static_cast<int>(r) / patches;
  return ad::concat_cols({local, ad::gather_rows(global, broadcast)});
}

Matrix temporal_positions(int frames, int dims) {
  Matrix p(frames, dims);
  for (int t = 0; t < frames; ++t) {
    const double age = frames - 1 - t;
    for (int c = 0; c < dims; ++c) {
      const double rate = std::pow(10000.0, -static_cast<double>(c - c % 2) / dims);
      p(t, c) = c % 2 == 0 ? std::sin(age * rate) : std::cos(age * rate);
    }
  }
  return p;
}

PointCloudEncoder::PointCloudEncoder(nn::ParamStore& store, const ModelConfig& cfg, std::mt19937_64& rng)
    : config(cfg) {
  const int h = cfg.hidden, k3 = cfg.fused_dim();
  local_mlp = nn::Mlp(store, "pc.local", {3, h, cfg.local_dim}, rng);
  sa1 = nn::Mlp(store, "pc.sa1", {3, h, h}, rng);
  sa2 = nn::Mlp(store, "pc.sa2", {3 + h, h, h}, rng);
  sa3 = nn::Mlp(store, "pc.sa3", {3 + h, h, cfg.global_dim}, rng);
  temporal_q = nn::Linear(store, "pc.temporal.q", k3, k3, rng);
  temporal_k = nn::Linear(store, "pc.temporal.k", k3, k3, rng);
  if (!cfg.tied_kv) temporal_v = nn::Linear(store, "pc.temporal.v", k3, k3, rng);
  center_embedding = nn::Linear(store, "pc.center_embedding", 3, k3, rng);
  spatial_q = nn::Linear(store, "pc.spatial.q", k3, k3, rng);
  spatial_k = nn::Linear(store, "pc.spatial.k", k3, k3, rng);
  if (!cfg.tied_kv) spatial_v = nn::Linear(store, "pc.spatial.v", k3, k3, rng);
  output = nn::Linear(store, "pc.output", k3, cfg.cloud_dim, rng);
}

Var PointCloudEncoder::local_features(const std::vector<PatchSet>& batch) const {
  Eigen::Index rows = 0;
  for (const auto& ps : batch) rows += ps.members.rows();
  Matrix stacked(rows, 3);
  std::vector<int> offsets{0};
  Eigen::Index r = 0;
  for (const auto& ps : batch) {
    if (ps.patch_size < 1) throw ShapeError("local_features: empty patches");
    stacked.middleRows(r, ps.members.rows()) = ps.members;
    for (Eigen::Index k = 0; k < ps.members.rows() / ps.patch_size; ++k) {
      offsets.push_back(offsets.back() + ps.patch_size);
    }
    r += ps.members.rows();
  }
  return ad::segment_max(local_mlp(ad::constant(std::move(stacked))), offsets);
}

namespace {

struct Grouping {
  std::vector<Vec3> centers;
  std::vector<int> center_rows;   // absolute row (in the level input) of each center
  std::vector<int> member_rows;   // absolute rows of grouped inputs
  std::vector<Vec3> member_rel;   // member position minus its center
  std::vector<int> offsets{0};
};

// Appends FPS centres of pts (rows offset by base) and their radius groups.
void group_frame(const Matrix& pts, int base, int count, double radius, Grouping& out) {
  const int n = static_cast<int>(pts.rows());
  const auto centers = farthest_point_sampling(pts, std::min(count, n), farthest_from_centroid(pts));
  for (int c : centers) {
    const Vec3 q = pts.row(c).transpose();
    out.centers.push_back(q);
    out.center_rows.push_back(base + c);
    for (int m : radius_neighbors(pts, q, radius)) {
      out.member_rows.push_back(base + m);
      out.member_rel.push_back(pts.row(m).transpose() - q);
    }
    out.offsets.push_back(static_cast<int>(out.member_rows.size()));
  }
}

Matrix rows_of(const std::vector<Vec3>& v) {
  Matrix m(static_cast<Eigen::Index>(v.size()), 3);
  for (std::size_t i = 0; i < v.size(); ++i) m.row(static_cast<Eigen::Index>(i)) = v[i].transpose();
  return m;
}

}  // namespace

Var PointCloudEncoder::global_features(const std::vector<const PointCloudSequence*>& batch) const {
  Grouping level1, level2;
  std::vector<int> frame_offsets{0};
  int base = 0;
  for (const auto* seq : batch) {
    for (const Matrix& pts : seq->frames) {
      if (pts.rows() == 0 || pts.cols() != 3) throw ShapeError("global_features: frames must be nonempty N x 3");
      const std::size_t first_center = level1.centers.size();
      group_frame(pts, base, config.sa1_centers, config.sa1_radius, level1);
      base += static_cast<int>(pts.rows());

      const int c1 = static_cast<int>(level1.centers.size() - first_center);
      Matrix centers1(c1, 3);
      for (int i = 0; i < c1; ++i) centers1.row(i) = level1.centers[first_center + i].transpose();
      group_frame(centers1, static_cast<int>(first_center), config.sa2_centers, config.sa2_radius, level2);
      frame_offsets.push_back(static_cast<int>(level2.centers.size()));
    }
  }

  Var f1 = ad::segment_max(sa1(ad::constant(rows_of(level1.member_rel))), level1.offsets);
  Var in2 = ad::concat_cols({ad::constant(rows_of(level2.member_rel)), ad::gather_rows(f1, level2.member_rows)});
  Var f2 = ad::segment_max(sa2(in2), level2.offsets);
  Var in3 = ad::concat_cols({ad::constant(rows_of(level2.centers)), f2});
  return ad::segment_max(sa3(in3), frame_offsets);
}

Var PointCloudEncoder::attend(const Var& fused, const std::vector<PatchSet>& batch, AttentionTrace* trace) const {
  const int k3 = config.fused_dim();
  if (fused.cols() != k3) throw ShapeError("attend: fused width must be local_dim + global_dim");
  Eigen::Index total = 0;
  for (const auto& ps : batch) total += static_cast<Eigen::Index>(ps.frames) * ps.patches;
  if (fused.rows() != total) throw ShapeError("attend: fused rows do not match the patch sets");

  Matrix positions(total, k3);
  Matrix centers(total, 3);
  std::vector<ad::AttentionGroup> temporal, spatial;
  std::vector<int> pool_offsets{0};
  int base = 0;
  for (const auto& ps : batch) {
    const int T = ps.frames, G = ps.patches;
    const Matrix pe = temporal_positions(T, k3);
    for (int t = 0; t < T; ++t) {
      for (int g = 0; g < G; ++g) positions.row(base + t * G + g) = pe.row(t);
    }
    centers.middleRows(base, static_cast<Eigen::Index>(T) * G) = ps.centers;
    for (int g = 0; g < G; ++g) {
      ad::AttentionGroup grp;
      for (int t = 0; t < T; ++t) grp.queries.push_back(base + t * G + g);
      grp.keys = grp.queries;
      temporal.push_back(std::move(grp));
    }
    for (int t = 0; t < T; ++t) {
      ad::AttentionGroup grp;
      for (int g = 0; g < G; ++g) grp.queries.push_back(base + t * G + g);
      grp.keys = grp.queries;
      spatial.push_back(std::move(grp));
    }
    base += T * G;
    pool_offsets.push_back(base);
  }

  const int heads = config.heads;
  Var xt = ad::add_constant(fused, positions);
  Var kt = temporal_k(xt);
  Var vt = config.tied_kv ? kt : temporal_v(fused);
  Var ht = ad::attention(temporal_q(xt), kt, vt, temporal, heads, trace ? &trace->temporal : nullptr);

  Var xs = ad::add(ht, center_embedding(ad::constant(std::move(centers))));
  Var ks = spatial_k(xs);
  Var vs = config.tied_kv ? ks : spatial_v(ht);
  Var hs = ad::attention(spatial_q(xs), ks, vs, spatial, heads, trace ? &trace->spatial : nullptr);

  return output(ad::segment_mean(hs, pool_offsets));
}

Var PointCloudEncoder::encode(const std::vector<const PointCloudSequence*>& batch, const std::vector<int>& seeds,
                              AttentionTrace* trace) const {
  if (seeds.size() != batch.size()) throw ShapeError("encode: one FPS seed per batch element");
  std::vector<PatchSet> patches;
  patches.reserve(batch.size());
  for (std::size_t b = 0; b < batch.size(); ++b) {
    patches.push_back(make_patches(*batch[b], config.patches, config.patch_size, seeds[b]));
  }
  Var fused = fuse_features(local_features(patches), global_features(batch), config.patches);
  return attend(fused, patches, trace);
}

}  // namespace p2p
