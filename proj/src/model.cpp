#include "p2p/model.hpp"

#include <cmath>
#include <string>

#include "p2p/errors.hpp"

namespace p2p {

using ad::Var;

DenoiserHeads::DenoiserHeads(nn::ParamStore& store, const ModelConfig& cfg, std::mt19937_64& rng) {
  const int d = cfg.denoiser_dim, px = cfg.pose_point_dim(), emb = 6;
  {
    std::normal_distribution<double> n(0.0, 1.0);
    Matrix code(cfg.joints, d);
    for (Eigen::Index k = 0; k < code.size(); ++k) code.data()[k] = n(rng);
    joint_code = store.create("denoise.joint_code", std::move(code));
  }
  coord_query = nn::Mlp(store, "denoise.coord.query", {kCoordDims + emb, d, d}, rng);
  coord_skip = nn::Linear(store, "denoise.coord.skip", kCoordDims, d, rng);
  coord_key = nn::Linear(store, "denoise.coord.key", px, d, rng);
  coord_ffn = nn::Mlp(store, "denoise.coord.ffn", {d, 2 * d, d}, rng);
  coord_out = nn::Linear(store, "denoise.coord.out", d, kCoordDims, rng);
  rot_query = nn::Mlp(store, "denoise.rot.query", {kRotDims + emb, d, d}, rng);
  rot_skip = nn::Linear(store, "denoise.rot.skip", kRotDims, d, rng);
  rot_key = nn::Linear(store, "denoise.rot.key", kCoordDims + px, d, rng);
  rot_ffn = nn::Mlp(store, "denoise.rot.ffn", {d, 2 * d, d}, rng);
  rot_out = nn::Linear(store, "denoise.rot.out", d, kRotDims, rng);
  coord_out.weight.mutable_value().setZero();
  rot_out.weight.mutable_value().setZero();
}

Matrix embedding_rows(const std::vector<int>& its, int joints) {
  Matrix out(static_cast<Eigen::Index>(its.size()) * joints, 6);
  for (std::size_t b = 0; b < its.size(); ++b) {
    const auto e = embeddings(its[b], joints);
    out.block(static_cast<Eigen::Index>(b) * joints, 0, joints, 3) = e.e_i;
    out.block(static_cast<Eigen::Index>(b) * joints, 3, joints, 3) = e.e_J;
  }
  return out;
}

namespace {

std::vector<ad::AttentionGroup> joint_groups(Eigen::Index rows, int joints) {
  if (joints < 1 || rows % joints != 0) throw ShapeError("denoiser rows must be a multiple of J");
  std::vector<ad::AttentionGroup> groups(static_cast<std::size_t>(rows / joints));
  for (std::size_t b = 0; b < groups.size(); ++b) {
    for (int j = 0; j < joints; ++j) groups[b].queries.push_back(static_cast<int>(b) * joints + j);
    groups[b].keys = groups[b].queries;
  }
  return groups;
}

Var joint_codes(const DenoiserHeads& h, Eigen::Index rows, int joints) {
  if (h.joint_code.rows() != joints) throw ShapeError("denoiser joint code has the wrong joint count");
  std::vector<int> index(static_cast<std::size_t>(rows));
  for (std::size_t r = 0; r < index.size(); ++r) index[r] = static_cast<int>(r % joints);
  return ad::gather_rows(h.joint_code, index);
}

void check_rows(const Var& a, const Var& b, const char* what) {
  if (a.rows() != b.rows()) throw ShapeError(std::string(what) + ": row count mismatch");
}

}  // namespace

Var denoise_coords(const DenoiserHeads& h, const Var& noisy, const Var& fpx, const Matrix& emb, int joints,
                   int num_heads, ad::AttentionProbe* probe) {
  if (noisy.cols() != kCoordDims) throw ShapeError("denoise_coords: noisy coordinates must have 3 columns");
  check_rows(noisy, fpx, "denoise_coords");
  if (emb.rows() != noisy.rows()) throw ShapeError("denoise_coords: embedding rows mismatch");
  const Var code = joint_codes(h, noisy.rows(), joints);
  Var q = ad::add(ad::add(h.coord_query(ad::concat_cols({noisy, ad::constant(emb)})), h.coord_skip(noisy)), code);
  Var k = ad::add(h.coord_key(fpx), code);
  Var mixed = ad::add(q, ad::attention(q, k, k, joint_groups(noisy.rows(), joints), num_heads, probe));
  return h.coord_out(ad::add(mixed, h.coord_ffn(mixed)));
}

Var denoise_rots(const DenoiserHeads& h, const Var& noisy, const Var& coords, const Var& fpx, const Matrix& emb,
                 int joints, int num_heads, ad::AttentionProbe* probe) {
  if (noisy.cols() != kRotDims) throw ShapeError("denoise_rots: noisy rotations must have 6 columns");
  if (coords.cols() != kCoordDims) throw ShapeError("denoise_rots: coordinates must have 3 columns");
  check_rows(noisy, fpx, "denoise_rots");
  check_rows(coords, fpx, "denoise_rots");
  if (emb.rows() != noisy.rows()) throw ShapeError("denoise_rots: embedding rows mismatch");
  const Var code = joint_codes(h, noisy.rows(), joints);
  Var q = ad::add(ad::add(h.rot_query(ad::concat_cols({noisy, ad::constant(emb)})), h.rot_skip(noisy)), code);
  Var k = ad::add(h.rot_key(ad::concat_cols({coords, fpx})), code);
  Var mixed = ad::add(q, ad::attention(q, k, k, joint_groups(noisy.rows(), joints), num_heads, probe));
  return ad::add(noisy, h.rot_out(ad::add(mixed, h.rot_ffn(mixed))));
}

Point2Pose::Point2Pose(const ModelConfig& config, SkeletonGraph skeleton, std::uint64_t seed)
    : config_(config), skeleton_(std::move(skeleton)) {
  config_.validate();
  std::mt19937_64 rng(seed);
  cloud_encoder = PointCloudEncoder(store_, config_, rng);
  if (config_.use_pose_encoder) {
    pose_encoder = PoseEncoder(store_, config_, skeleton_, rng);
  } else {
    skeleton_.validate();
  }
  heads = DenoiserHeads(store_, config_, rng);
}

Var Point2Pose::condition(const std::vector<const PointCloudSequence*>& clouds, const std::vector<Matrix>& histories,
                          const std::vector<int>& fps_seeds) const {
  if (clouds.size() != histories.size()) throw ShapeError("condition: clouds and histories differ in batch size");
  Var cloud = cloud_encoder.encode(clouds, fps_seeds);
  Var pose = config_.use_pose_encoder ? pose_encoder.encode(histories) : Var();
  return fuse_pose_point(pose, cloud, config_.joints);
}

namespace {

struct NoisyBatch {
  Matrix coords, rots;  // (B*J) x 3, (B*J) x 6
  Matrix gt_coords, gt_rots;
  std::vector<int> its;
};

NoisyBatch perturb_batch(const std::vector<const TrainingWindow*>& batch, const DiffusionConfig& d, int J,
                         std::mt19937_64& rng) {
  const int B = static_cast<int>(batch.size());
  NoisyBatch nb;
  nb.coords.resize(B * J, kCoordDims);
  nb.rots.resize(B * J, kRotDims);
  nb.gt_coords.resize(B * J, kCoordDims);
  nb.gt_rots.resize(B * J, kRotDims);
  std::uniform_int_distribution<int> pick(0, d.iterations);
  for (int b = 0; b < B; ++b) nb.its.push_back(pick(rng));

  std::vector<Matrix> zc, zr, gc, gr;
  for (int b = 0; b < B; ++b) {
    const PoseFrame& gt = batch[b]->target;
    if (gt.num_joints() != J) throw ShapeError("training target has the wrong joint count");
    gc.push_back(gt.coords);
    gr.push_back(gt.rots);
    zc.push_back(standard_normal(J, kCoordDims, rng));
    zr.push_back(standard_normal(J, kRotDims, rng));
  }

  if (d.mode == GenerativeMode::kDiffusion) {
    const auto sched = DmSchedule::linear(d.iterations, d.beta_start, d.beta_end);
    for (int b = 0; b < B; ++b) {
      const auto p = perturb_dm(batch[b]->target, nb.its[b], sched, zc[b], zr[b]);
      nb.coords.middleRows(b * J, J) = p.coords;
      nb.rots.middleRows(b * J, J) = p.rots;
    }
  } else {
    const CfmSchedule sched{d.iterations, d.sigma};
    const auto pc = ot_pair(zc, gc);
    const auto pr = ot_pair(zr, gr);
    std::vector<int> coord_src(B), rot_src(B);
    for (int b = 0; b < B; ++b) {
      coord_src[pc.target[b]] = b;
      rot_src[pr.target[b]] = b;
    }
    for (int b = 0; b < B; ++b) {
      const Matrix ec = standard_normal(J, kCoordDims, rng);
      const Matrix er = standard_normal(J, kRotDims, rng);
      const auto p = perturb_cfm(batch[b]->target, nb.its[b], sched, zc[coord_src[b]], zr[rot_src[b]], ec, er);
      nb.coords.middleRows(b * J, J) = p.coords;
      nb.rots.middleRows(b * J, J) = p.rots;
    }
  }
  for (int b = 0; b < B; ++b) {
    nb.gt_coords.middleRows(b * J, J) = gc[b];
    nb.gt_rots.middleRows(b * J, J) = gr[b];
  }
  return nb;
}

}  // namespace

Var Point2Pose::loss(const std::vector<const TrainingWindow*>& batch, const DiffusionConfig& diffusion,
                     std::mt19937_64& rng, bool random_fps_seed) const {
  if (batch.empty()) throw ShapeError("loss: empty batch");
  const int J = config_.joints;
  std::vector<const PointCloudSequence*> clouds;
  std::vector<Matrix> histories;
  std::vector<int> seeds;
  for (const auto* w : batch) {
    clouds.push_back(&w->clouds);
    histories.push_back(history_matrix(w->history));
    if (random_fps_seed) {
      std::uniform_int_distribution<int> pick(0, w->clouds.num_points() - 1);
      seeds.push_back(pick(rng));
    } else {
      seeds.push_back(0);
    }
  }
  const NoisyBatch nb = perturb_batch(batch, diffusion, J, rng);
  Var fpx = condition(clouds, histories, seeds);
  const Matrix emb = embedding_rows(nb.its, J);
  Var jp = denoise_coords(heads, ad::constant(nb.coords), fpx, emb, J, config_.heads);
  Var rp = denoise_rots(heads, ad::constant(nb.rots), jp, fpx, emb, J, config_.heads);
  Var total = ad::add(ad::smooth_l1(jp, nb.gt_coords, diffusion.tau), ad::smooth_l1(rp, nb.gt_rots, diffusion.tau));
  return ad::scale(total, 1.0 / (static_cast<double>(J) * static_cast<double>(batch.size())));
}

PoseFrame Point2Pose::sample(const PointCloudSequence& clouds, const PoseSequence& history,
                             const DiffusionConfig& diffusion, std::mt19937_64& rng) const {
  Matrix fpx;
  {
    ad::NoGradGuard guard;
    fpx = condition({&clouds}, {history_matrix(history)}, {0}).value();
  }
  ConditionedDenoiser denoiser(*this, std::move(fpx));
  if (diffusion.mode == GenerativeMode::kDiffusion) {
    const auto sched = DmSchedule::linear(diffusion.iterations, diffusion.beta_start, diffusion.beta_end);
    return sample_dm(denoiser, sched, rng, diffusion.two_pass);
  }
  return sample_cfm(denoiser, CfmSchedule{diffusion.iterations, diffusion.sigma}, rng, diffusion.two_pass);
}

double train_step(Point2Pose& model, const std::vector<const TrainingWindow*>& batch,
                  const DiffusionConfig& diffusion, std::mt19937_64& rng, bool random_fps_seed) {
  model.params().zero_grad();
  Var l = model.loss(batch, diffusion, rng, random_fps_seed);
  const double value = l.scalar();
  if (!std::isfinite(value)) throw NumericalError("non-finite training loss");
  ad::backward(l);
  return value;
}

ConditionedDenoiser::ConditionedDenoiser(const Point2Pose& model, Matrix fpx) : model_(model), fpx_(std::move(fpx)) {
  if (fpx_.rows() != model.config().joints) throw ShapeError("conditioning must hold one row per joint");
}

int ConditionedDenoiser::num_joints() const { return model_.config().joints; }

Matrix ConditionedDenoiser::predict_coords(const Matrix& noisy_coords, int i) {
  ad::NoGradGuard guard;
  const int J = num_joints();
  return denoise_coords(model_.heads, ad::constant(noisy_coords), ad::constant(fpx_), embedding_rows({i}, J), J,
                        model_.config().heads)
      .value();
}

Matrix ConditionedDenoiser::predict_rots(const Matrix& noisy_rots, const Matrix& coords_pred, int i) {
  ad::NoGradGuard guard;
  const int J = num_joints();
  return denoise_rots(model_.heads, ad::constant(noisy_rots), ad::constant(coords_pred), ad::constant(fpx_),
                      embedding_rows({i}, J), J, model_.config().heads)
      .value();
}

}  // namespace p2p
