#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "p2p/config.hpp"
#include "p2p/dataset.hpp"
#include "p2p/model.hpp"

namespace p2p {

/// Sliding windows with stride 1. Window ending at frame f holds clouds
/// f-T+1..f, root-relative poses f-T+1..f-1 as history and pose f as target.
std::vector<TrainingWindow> make_windows(const PointCloudSequence& clouds, const PoseSequence& poses, int window);
std::vector<TrainingWindow> make_windows(const Dataset& dataset, int window);

struct CheckpointMeta {
  std::string config_hash;
  int epoch = 0;
  long step = 0;
  double last_loss = 0.0;
  std::vector<int> parents;
};

/// Writes file (flat float64 parameters) and file + ".json" (metadata and the
/// full config). The blob is written to a temporary name and renamed.
void save_checkpoint(const std::filesystem::path& file, const Point2Pose& model, const ExperimentConfig& config,
                     const CheckpointMeta& meta);

struct LoadedCheckpoint {
  ExperimentConfig config;
  CheckpointMeta meta;
  std::unique_ptr<Point2Pose> model;
};
LoadedCheckpoint load_checkpoint(const std::filesystem::path& file);

struct TrainResult {
  std::vector<double> losses;  // one per optimizer step
  long steps = 0;
  int epochs = 0;
};

struct TrainHooks {
  std::filesystem::path checkpoint;  // empty: no checkpointing
  std::function<void(long step, int epoch, double loss)> on_step;
};

/// AdamW over shuffled windows; halves the learning rate once at the configured
/// epoch and checkpoints after every epoch. A non-finite loss throws
/// NumericalError and leaves the last checkpoint in place.
TrainResult train(Point2Pose& model, const ExperimentConfig& config, const std::vector<TrainingWindow>& windows,
                  const TrainHooks& hooks = {});

/// clean: identity; sparse: FPS down to N_infer; noisy: i.i.d. Gaussian on
/// every coordinate; no-init-pose leaves the clouds untouched.
PointCloudSequence apply_scenario(const PointCloudSequence& clouds, const ScenarioConfig& scenario, int points,
                                  std::mt19937_64& rng);

enum class InitMode { kGroundTruth, kNoise };

struct RolloutOptions {
  int window = 4;  // T_infer
  InitMode init = InitMode::kGroundTruth;
  bool teacher_forcing = false;
  std::uint64_t seed = 0;
};

struct FrameMetrics {
  int frame = 0;
  double mpjpe_mm = 0.0;
  double angular_deg = 0.0;
  std::string history;  // source of the oldest history entry: gt, noise, prediction
};

struct RolloutReport {
  std::string sequence;
  std::string scenario = "clean";
  std::string mode = "dm";
  std::string init = "gt";
  int window = 0;
  int points = 0;
  std::vector<FrameMetrics> frames;
  double mean_mpjpe_mm = 0.0;
  double mean_angular_deg = 0.0;
  double wall_seconds = 0.0;
  std::vector<int> parents;
  std::vector<PoseFrame> predictions;
  std::vector<PoseFrame> ground_truth;

  void finalize();
};

/// Produces the pose for the last cloud frame given the pose history.
using PoseSampler =
    std::function<PoseFrame(const PointCloudSequence& clouds, const PoseSequence& history, std::mt19937_64& rng)>;

/// Autoregressive evaluation. Ground truth is never modified.
RolloutReport rollout(const PoseSampler& sampler, const PointCloudSequence& clouds, const PoseSequence& gt,
                      const RolloutOptions& options);
RolloutReport rollout(const Point2Pose& model, const DiffusionConfig& diffusion, const PointCloudSequence& clouds,
                      const PoseSequence& gt, const RolloutOptions& options);

/// Root-relative coordinates and re-orthonormalized rotations.
PoseFrame canonicalize(const PoseFrame& pose);

}  // namespace p2p
