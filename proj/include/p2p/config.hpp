#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

namespace p2p {

enum class GenerativeMode { kDiffusion, kFlowMatching };

GenerativeMode parse_mode(const std::string& s);
std::string to_string(GenerativeMode mode);

/// Network widths. Defaults follow the desk-scale choices; none of them are
/// dictated by the method itself.
struct ModelConfig {
  int joints = 24;        // J
  int window = 4;         // T
  int points = 256;       // N
  int patches = 32;       // G
  int patch_size = 32;    // M
  int local_dim = 128;    // k1
  int global_dim = 128;   // k2
  int cloud_dim = 256;    // k_p
  int pose_dim = 128;     // k_x
  int heads = 4;
  int denoiser_dim = 128;
  int hidden = 64;
  int sa1_centers = 64;
  double sa1_radius = 0.2;
  int sa2_centers = 16;
  double sa2_radius = 0.45;
  int gcn_layers = 2;
  int temporal_kernel = 3;
  bool tied_kv = true;
  bool use_pose_encoder = true;

  int fused_dim() const { return local_dim + global_dim; }
  int pose_point_dim() const { return use_pose_encoder ? pose_dim + cloud_dim : cloud_dim; }
  void validate() const;
};

struct DiffusionConfig {
  GenerativeMode mode = GenerativeMode::kDiffusion;
  int iterations = 20;  // I
  double beta_start = 1e-4;
  double beta_end = 0.02;
  double sigma = 0.01;  // flow-matching path noise
  double tau = 0.01;    // smooth-L1 threshold
  bool two_pass = false;
  void validate() const;
};

struct TrainConfig {
  double lr = 1e-4;
  double weight_decay = 1e-4;
  int batch_size = 32;
  int epochs = 30;
  int lr_halve_epoch = -1;  // -1: two thirds of the way through
  int max_steps = 0;        // 0: no cap
  std::uint64_t seed = 0;
  bool random_fps_seed = true;
  void validate() const;
  int effective_halve_epoch() const;
};

enum class ScenarioKind { kClean, kSparse, kNoisy, kNoInitPose };

ScenarioKind parse_scenario(const std::string& s);
std::string to_string(ScenarioKind kind);

struct ScenarioConfig {
  ScenarioKind kind = ScenarioKind::kClean;
  int points = 0;            // N_infer for sparse; 0 means N
  double noise_sigma = 0.01;  // sigma_pts for noisy
  int window = 0;            // T_infer; 0 means T
  bool teacher_forcing = false;
  std::uint64_t seed = 0;
};

struct ExperimentConfig {
  ModelConfig model;
  DiffusionConfig diffusion;
  TrainConfig train;
  ScenarioConfig scenario;

  /// Throws ConfigError on inconsistent values (e.g. T_infer > T).
  void validate() const;
  int infer_window() const { return scenario.window > 0 ? scenario.window : model.window; }
  int infer_points() const { return scenario.points > 0 ? scenario.points : model.points; }

  /// Canonical YAML text; hashing it gives the config hash stored in checkpoints.
  std::string to_yaml() const;
  std::string hash() const;
};

/// Nested YAML with optional sections model/diffusion/train/scenario.
/// Unknown keys raise ConfigError.
ExperimentConfig load_config(const std::filesystem::path& file);
ExperimentConfig parse_config(const std::string& text);

}  // namespace p2p
