#include "p2p/harness.hpp"

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <deque>
#include <fstream>
#include <numeric>
#include <sstream>

#include "p2p/errors.hpp"
#include "p2p/geometry.hpp"
#include "p2p/pcd_prep.hpp"

namespace p2p {

namespace fs = std::filesystem;
using nlohmann::json;

std::vector<TrainingWindow> make_windows(const PointCloudSequence& clouds, const PoseSequence& poses, int window) {
  if (window < 2) throw ShapeError("windows need T >= 2");
  if (clouds.size() != poses.size()) throw ShapeError("cloud and pose sequences differ in length");
  std::vector<TrainingWindow> out;
  const int frames = static_cast<int>(poses.size());
  for (int f = window - 1; f < frames; ++f) {
    TrainingWindow w;
    for (int t = f - window + 1; t <= f; ++t) w.clouds.frames.push_back(clouds.frames[t]);
    for (int t = f - window + 1; t < f; ++t) {
      PoseFrame p = poses.frames[t];
      root_relativize(p);
      w.history.frames.push_back(std::move(p));
    }
    w.target = poses.frames[f];
    root_relativize(w.target);
    out.push_back(std::move(w));
  }
  return out;
}

std::vector<TrainingWindow> make_windows(const Dataset& dataset, int window) {
  std::vector<TrainingWindow> out;
  for (const auto& seq : dataset.sequences) {
    auto w = make_windows(seq.clouds, seq.poses, window);
    std::move(w.begin(), w.end(), std::back_inserter(out));
  }
  return out;
}

namespace {

constexpr char kMagic[8] = {'P', '2', 'P', 'C', 'K', 'P', 'T', '1'};

void write_text(const fs::path& file, const std::string& text) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw IoError("cannot write " + file.string());
  out << text;
  if (!out) throw IoError("failed writing " + file.string());
}

std::string read_text(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw IoError("cannot read " + file.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

void save_checkpoint(const fs::path& file, const Point2Pose& model, const ExperimentConfig& config,
                     const CheckpointMeta& meta) {
  if (file.has_parent_path()) fs::create_directories(file.parent_path());
  const auto flat = model.params().flatten();
  const fs::path tmp = file.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw IoError("cannot write " + tmp.string());
    out.write(kMagic, sizeof kMagic);
    const std::uint64_t n = flat.size();
    out.write(reinterpret_cast<const char*>(&n), sizeof n);
    out.write(reinterpret_cast<const char*>(flat.data()), static_cast<std::streamsize>(flat.size() * sizeof(double)));
    if (!out) throw IoError("failed writing " + tmp.string());
  }
  json side = {{"config_hash", config.hash()},
               {"epoch", meta.epoch},
               {"step", meta.step},
               {"last_loss", meta.last_loss},
               {"parameters", flat.size()},
               {"parents", meta.parents},
               {"config", config.to_yaml()}};
  write_text(tmp.string() + ".json", side.dump(2) + "\n");
  fs::rename(tmp.string() + ".json", file.string() + ".json");
  fs::rename(tmp, file);
}

LoadedCheckpoint load_checkpoint(const fs::path& file) {
  json side;
  try {
    side = json::parse(read_text(file.string() + ".json"));
  } catch (const json::exception& e) {
    throw IoError("checkpoint metadata " + file.string() + ".json: " + e.what());
  }
  LoadedCheckpoint ck;
  ck.config = parse_config(side.at("config").get<std::string>());
  ck.meta.config_hash = side.at("config_hash").get<std::string>();
  if (ck.meta.config_hash != ck.config.hash()) throw IoError("checkpoint config hash mismatch");
  ck.meta.epoch = side.at("epoch").get<int>();
  ck.meta.step = side.at("step").get<long>();
  ck.meta.last_loss = side.at("last_loss").get<double>();
  ck.meta.parents = side.at("parents").get<std::vector<int>>();

  const std::string blob = read_text(file);
  std::uint64_t n = 0;
  if (blob.size() < sizeof kMagic + sizeof n || std::memcmp(blob.data(), kMagic, sizeof kMagic) != 0) {
    throw IoError("not a checkpoint: " + file.string());
  }
  std::memcpy(&n, blob.data() + sizeof kMagic, sizeof n);
  if (blob.size() != sizeof kMagic + sizeof n + n * sizeof(double)) throw IoError("truncated checkpoint " + file.string());
  std::vector<double> flat(n);
  std::memcpy(flat.data(), blob.data() + sizeof kMagic + sizeof n, n * sizeof(double));

  ck.model = std::make_unique<Point2Pose>(ck.config.model, SkeletonGraph::from_parents(ck.meta.parents),
                                          ck.config.train.seed);
  ck.model->params().load_flat(flat);
  return ck;
}

TrainResult train(Point2Pose& model, const ExperimentConfig& config, const std::vector<TrainingWindow>& windows,
                  const TrainHooks& hooks) {
  config.validate();
  if (windows.empty()) throw ShapeError("no training windows (sequences shorter than T?)");
  const auto& tc = config.train;
  nn::AdamW opt(model.params(), {tc.lr, 0.9, 0.999, 1e-8, tc.weight_decay});
  std::mt19937_64 rng(tc.seed + 0x9e3779b97f4a7c15ULL);
  std::vector<int> order(windows.size());
  std::iota(order.begin(), order.end(), 0);
  const int halve = tc.effective_halve_epoch();
  const auto parents = model.skeleton().parents();

  TrainResult result;
  bool done = false;
  for (int epoch = 0; epoch < tc.epochs && !done; ++epoch) {
    if (epoch == halve && halve > 0) opt.set_lr(opt.lr() * 0.5);
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += tc.batch_size) {
      std::vector<const TrainingWindow*> batch;
      for (std::size_t k = start; k < std::min(order.size(), start + tc.batch_size); ++k) {
        batch.push_back(&windows[order[k]]);
      }
      const double loss = train_step(model, batch, config.diffusion, rng, tc.random_fps_seed);
      opt.step();
      result.losses.push_back(loss);
      ++result.steps;
      if (hooks.on_step) hooks.on_step(result.steps, epoch, loss);
      if (tc.max_steps > 0 && result.steps >= tc.max_steps) {
        done = true;
        break;
      }
    }
    result.epochs = epoch + 1;
    if (!hooks.checkpoint.empty()) {
      save_checkpoint(hooks.checkpoint, model, config,
                      {config.hash(), result.epochs, result.steps, result.losses.back(), parents});
    }
  }
  return result;
}

PointCloudSequence apply_scenario(const PointCloudSequence& clouds, const ScenarioConfig& scenario, int points,
                                  std::mt19937_64& rng) {
  PointCloudSequence out = clouds;
  switch (scenario.kind) {
    case ScenarioKind::kClean:
    case ScenarioKind::kNoInitPose:
      return out;
    case ScenarioKind::kSparse:
      for (auto& f : out.frames) f = select_rows(f, farthest_point_sampling(f, points, farthest_from_centroid(f)));
      return out;
    case ScenarioKind::kNoisy: {
      std::normal_distribution<double> n(0.0, scenario.noise_sigma);
      for (auto& f : out.frames) {
        for (Eigen::Index k = 0; k < f.size(); ++k) f.data()[k] += n(rng);
      }
      return out;
    }
  }
  return out;
}

PoseFrame canonicalize(const PoseFrame& pose) {
  PoseFrame out = pose;
  root_relativize(out);
  for (int j = 0; j < out.num_joints(); ++j) {
    try {
      out.set_rotation(j, encode_rotation(decode_rotation(out.rotation(j))));
    } catch (const DegenerateRotation&) {
    }
  }
  return out;
}

void RolloutReport::finalize() {
  mean_mpjpe_mm = 0.0;
  mean_angular_deg = 0.0;
  if (frames.empty()) return;
  for (const auto& f : frames) {
    mean_mpjpe_mm += f.mpjpe_mm;
    mean_angular_deg += f.angular_deg;
  }
  mean_mpjpe_mm /= static_cast<double>(frames.size());
  mean_angular_deg /= static_cast<double>(frames.size());
}

RolloutReport rollout(const PoseSampler& sampler, const PointCloudSequence& clouds, const PoseSequence& gt,
                      const RolloutOptions& options) {
  const auto t0 = std::chrono::steady_clock::now();
  const int T = options.window;
  const int F = static_cast<int>(gt.size());
  if (T < 2) throw ShapeError("rollout window must be >= 2");
  if (static_cast<int>(clouds.size()) != F) throw ShapeError("rollout: clouds and poses differ in length");
  if (F < T) throw ShapeError("rollout: sequence shorter than the window");
  const int J = gt.num_joints();
  std::mt19937_64 rng(options.seed);

  struct Entry {
    PoseFrame pose;
    std::string source;
  };
  std::deque<Entry> buffer;
  for (int t = 0; t < T - 1; ++t) {
    if (options.init == InitMode::kGroundTruth) {
      PoseFrame p = gt.frames[t];
      root_relativize(p);
      buffer.push_back({std::move(p), "gt"});
    } else {
      buffer.push_back({{standard_normal(J, kCoordDims, rng), standard_normal(J, kRotDims, rng)}, "noise"});
    }
  }

  RolloutReport report;
  report.window = T;
  report.points = clouds.num_points();
  report.init = options.init == InitMode::kGroundTruth ? "gt" : "noise";
  for (int f = T - 1; f < F; ++f) {
    PointCloudSequence window;
    for (int t = f - T + 1; t <= f; ++t) window.frames.push_back(clouds.frames[t]);
    PoseSequence history;
    for (const auto& e : buffer) history.frames.push_back(e.pose);

    PoseFrame pred = sampler(window, history, rng);
    if (!pred.coords.allFinite() || !pred.rots.allFinite()) {
      throw NumericalError("non-finite prediction at frame " + std::to_string(f));
    }
    FrameMetrics m;
    m.frame = f;
    m.history = buffer.front().source;
    try {
      m.mpjpe_mm = mpjpe(pred, gt.frames[f]);
      m.angular_deg = angular_error(pred, gt.frames[f]);
    } catch (const DegenerateRotation& e) {
      throw NumericalError("degenerate rotation at frame " + std::to_string(f) + ": " + e.what());
    }
    report.frames.push_back(m);
    report.predictions.push_back(pred);
    report.ground_truth.push_back(gt.frames[f]);

    buffer.pop_front();
    if (options.teacher_forcing) {
      PoseFrame p = gt.frames[f];
      root_relativize(p);
      buffer.push_back({std::move(p), "gt"});
    } else {
      buffer.push_back({canonicalize(pred), "prediction"});
    }
  }
  report.finalize();
  report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return report;
}

RolloutReport rollout(const Point2Pose& model, const DiffusionConfig& diffusion, const PointCloudSequence& clouds,
                      const PoseSequence& gt, const RolloutOptions& options) {
  PoseSampler sampler = [&](const PointCloudSequence& c, const PoseSequence& h, std::mt19937_64& rng) {
    return model.sample(c, h, diffusion, rng);
  };
  RolloutReport r = rollout(sampler, clouds, gt, options);
  r.mode = to_string(diffusion.mode);
  r.parents = model.skeleton().parents();
  return r;
}

}  // namespace p2p
