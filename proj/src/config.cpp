#include "p2p/config.hpp"

#include <yaml-cpp/yaml.h>

#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "p2p/errors.hpp"

namespace p2p {

GenerativeMode parse_mode(const std::string& s) {
  if (s == "dm" || s == "DM" || s == "diffusion") return GenerativeMode::kDiffusion;
  if (s == "ot-cfm" || s == "OT-CFM" || s == "cfm" || s == "flow") return GenerativeMode::kFlowMatching;
  throw ConfigError("unknown generative mode '" + s + "' (expected dm or ot-cfm)");
}

std::string to_string(GenerativeMode mode) { return mode == GenerativeMode::kDiffusion ? "dm" : "ot-cfm"; }

ScenarioKind parse_scenario(const std::string& s) {
  if (s == "clean") return ScenarioKind::kClean;
  if (s == "sparse") return ScenarioKind::kSparse;
  if (s == "noisy") return ScenarioKind::kNoisy;
  if (s == "no-init-pose") return ScenarioKind::kNoInitPose;
  throw ConfigError("unknown scenario '" + s + "' (expected clean, sparse, noisy or no-init-pose)");
}

std::string to_string(ScenarioKind kind) {
  switch (kind) {
    case ScenarioKind::kClean: return "clean";
    case ScenarioKind::kSparse: return "sparse";
    case ScenarioKind::kNoisy: return "noisy";
    case ScenarioKind::kNoInitPose: return "no-init-pose";
  }
  return "clean";
}

void ModelConfig::validate() const {
  auto positive = [](int v, const char* name) {
    if (v < 1) throw ConfigError(std::string("model.") + name + " must be >= 1");
  };
  positive(joints, "joints");
  positive(window, "window");
  positive(points, "points");
  positive(patches, "patches");
  positive(patch_size, "patch_size");
  positive(local_dim, "local_dim");
  positive(global_dim, "global_dim");
  positive(cloud_dim, "cloud_dim");
  positive(pose_dim, "pose_dim");
  positive(heads, "heads");
  positive(denoiser_dim, "denoiser_dim");
  positive(hidden, "hidden");
  positive(sa1_centers, "sa1_centers");
  positive(sa2_centers, "sa2_centers");
  positive(gcn_layers, "gcn_layers");
  if (window < 2) throw ConfigError("model.window must be >= 2 (one history frame plus the current one)");
  if (patches > points || patch_size > points) throw ConfigError("model.patches and model.patch_size must be <= points");
  if (fused_dim() % heads != 0) throw ConfigError("local_dim + global_dim must be divisible by heads");
  if (denoiser_dim % heads != 0) throw ConfigError("denoiser_dim must be divisible by heads");
  if (temporal_kernel < 1 || temporal_kernel % 2 == 0) throw ConfigError("temporal_kernel must be odd");
  if (!(sa1_radius > 0.0) || !(sa2_radius > 0.0)) throw ConfigError("set-abstraction radii must be positive");
}

void DiffusionConfig::validate() const {
  if (iterations < 1) throw ConfigError("diffusion.iterations must be >= 1");
  if (!(beta_start > 0.0 && beta_start < 1.0 && beta_end > 0.0 && beta_end < 1.0)) {
    throw ConfigError("diffusion betas must lie in (0, 1)");
  }
  if (!(beta_end > beta_start)) throw ConfigError("diffusion.beta_end must exceed beta_start");
  if (sigma < 0.0) throw ConfigError("diffusion.sigma must be >= 0");
  if (!(tau > 0.0)) throw ConfigError("diffusion.tau must be positive");
}

void TrainConfig::validate() const {
  if (!(lr > 0.0)) throw ConfigError("train.lr must be positive");
  if (weight_decay < 0.0) throw ConfigError("train.weight_decay must be >= 0");
  if (batch_size < 1) throw ConfigError("train.batch_size must be >= 1");
  if (epochs < 1) throw ConfigError("train.epochs must be >= 1");
  if (max_steps < 0) throw ConfigError("train.max_steps must be >= 0");
}

int TrainConfig::effective_halve_epoch() const { return lr_halve_epoch >= 0 ? lr_halve_epoch : (2 * epochs) / 3; }

void ExperimentConfig::validate() const {
  model.validate();
  diffusion.validate();
  train.validate();
  if (infer_window() > model.window || infer_window() < 2) {
    throw ConfigError("scenario.window (T_infer) must lie in [2, model.window]");
  }
  if (infer_points() > model.points) throw ConfigError("scenario.points (N_infer) must be <= model.points");
  if (infer_points() < model.patches || infer_points() < model.patch_size) {
    throw ConfigError("scenario.points must be >= model.patches and model.patch_size");
  }
  if (scenario.noise_sigma < 0.0) throw ConfigError("scenario.noise_sigma must be >= 0");
}

namespace {

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

template <class T>
void read_into(const YAML::Node& section, const char* key, T& out, std::set<std::string>& seen) {
  seen.insert(key);
  if (!section[key]) return;
  try {
    out = section[key].as<T>();
  } catch (const YAML::Exception& e) {
    throw ConfigError(std::string("config key '") + key + "': " + e.what());
  }
}

void reject_unknown(const YAML::Node& section, const std::string& name, const std::set<std::string>& known) {
  if (!section) return;
  if (!section.IsMap()) throw ConfigError("config section '" + name + "' must be a mapping");
  for (const auto& kv : section) {
    const auto key = kv.first.as<std::string>();
    if (!known.count(key)) throw ConfigError("unknown config key '" + name + "." + key + "'");
  }
}

}  // namespace

std::string ExperimentConfig::to_yaml() const {
  std::ostringstream o;
  const auto& m = model;
  o << "model:\n"
    << "  joints: " << m.joints << "\n  window: " << m.window << "\n  points: " << m.points
    << "\n  patches: " << m.patches << "\n  patch_size: " << m.patch_size << "\n  local_dim: " << m.local_dim
    << "\n  global_dim: " << m.global_dim << "\n  cloud_dim: " << m.cloud_dim << "\n  pose_dim: " << m.pose_dim
    << "\n  heads: " << m.heads << "\n  denoiser_dim: " << m.denoiser_dim << "\n  hidden: " << m.hidden
    << "\n  sa1_centers: " << m.sa1_centers << "\n  sa1_radius: " << fmt_double(m.sa1_radius)
    << "\n  sa2_centers: " << m.sa2_centers << "\n  sa2_radius: " << fmt_double(m.sa2_radius)
    << "\n  gcn_layers: " << m.gcn_layers << "\n  temporal_kernel: " << m.temporal_kernel
    << "\n  tied_kv: " << (m.tied_kv ? "true" : "false")
    << "\n  use_pose_encoder: " << (m.use_pose_encoder ? "true" : "false") << "\n";
  const auto& d = diffusion;
  o << "diffusion:\n"
    << "  mode: " << to_string(d.mode) << "\n  iterations: " << d.iterations
    << "\n  beta_start: " << fmt_double(d.beta_start) << "\n  beta_end: " << fmt_double(d.beta_end)
    << "\n  sigma: " << fmt_double(d.sigma) << "\n  tau: " << fmt_double(d.tau)
    << "\n  two_pass: " << (d.two_pass ? "true" : "false") << "\n";
  const auto& t = train;
  o << "train:\n"
    << "  lr: " << fmt_double(t.lr) << "\n  weight_decay: " << fmt_double(t.weight_decay)
    << "\n  batch_size: " << t.batch_size << "\n  epochs: " << t.epochs << "\n  lr_halve_epoch: " << t.lr_halve_epoch
    << "\n  max_steps: " << t.max_steps << "\n  seed: " << t.seed
    << "\n  random_fps_seed: " << (t.random_fps_seed ? "true" : "false") << "\n";
  const auto& s = scenario;
  o << "scenario:\n"
    << "  name: " << to_string(s.kind) << "\n  points: " << s.points << "\n  noise_sigma: " << fmt_double(s.noise_sigma)
    << "\n  window: " << s.window << "\n  teacher_forcing: " << (s.teacher_forcing ? "true" : "false")
    << "\n  seed: " << s.seed << "\n";
  return o.str();
}

std::string ExperimentConfig::hash() const {
  // FNV-1a 64 over the canonical text
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : to_yaml()) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

ExperimentConfig parse_config(const std::string& text) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::Exception& e) {
    throw ConfigError(std::string("config is not valid YAML: ") + e.what());
  }
  ExperimentConfig cfg;
  if (!root || root.IsNull()) {
    cfg.validate();
    return cfg;
  }
  if (!root.IsMap()) throw ConfigError("config root must be a mapping");
  reject_unknown(root, "<root>", {"model", "diffusion", "train", "scenario"});

  std::set<std::string> seen;
  if (auto n = root["model"]) {
    auto& m = cfg.model;
    seen.clear();
    read_into(n, "joints", m.joints, seen);
    read_into(n, "window", m.window, seen);
    read_into(n, "points", m.points, seen);
    read_into(n, "patches", m.patches, seen);
    read_into(n, "patch_size", m.patch_size, seen);
    read_into(n, "local_dim", m.local_dim, seen);
    read_into(n, "global_dim", m.global_dim, seen);
    read_into(n, "cloud_dim", m.cloud_dim, seen);
    read_into(n, "pose_dim", m.pose_dim, seen);
    read_into(n, "heads", m.heads, seen);
    read_into(n, "denoiser_dim", m.denoiser_dim, seen);
    read_into(n, "hidden", m.hidden, seen);
    read_into(n, "sa1_centers", m.sa1_centers, seen);
    read_into(n, "sa1_radius", m.sa1_radius, seen);
    read_into(n, "sa2_centers", m.sa2_centers, seen);
    read_into(n, "sa2_radius", m.sa2_radius, seen);
    read_into(n, "gcn_layers", m.gcn_layers, seen);
    read_into(n, "temporal_kernel", m.temporal_kernel, seen);
    read_into(n, "tied_kv", m.tied_kv, seen);
    read_into(n, "use_pose_encoder", m.use_pose_encoder, seen);
    reject_unknown(n, "model", seen);
  }
  if (auto n = root["diffusion"]) {
    auto& d = cfg.diffusion;
    seen.clear();
    std::string mode = to_string(d.mode);
    read_into(n, "mode", mode, seen);
    d.mode = parse_mode(mode);
    read_into(n, "iterations", d.iterations, seen);
    read_into(n, "beta_start", d.beta_start, seen);
    read_into(n, "beta_end", d.beta_end, seen);
    read_into(n, "sigma", d.sigma, seen);
    read_into(n, "tau", d.tau, seen);
    read_into(n, "two_pass", d.two_pass, seen);
    reject_unknown(n, "diffusion", seen);
  }
  if (auto n = root["train"]) {
    auto& t = cfg.train;
    seen.clear();
    read_into(n, "lr", t.lr, seen);
    read_into(n, "weight_decay", t.weight_decay, seen);
    read_into(n, "batch_size", t.batch_size, seen);
    read_into(n, "epochs", t.epochs, seen);
    read_into(n, "lr_halve_epoch", t.lr_halve_epoch, seen);
    read_into(n, "max_steps", t.max_steps, seen);
    read_into(n, "seed", t.seed, seen);
    read_into(n, "random_fps_seed", t.random_fps_seed, seen);
    reject_unknown(n, "train", seen);
  }
  if (auto n = root["scenario"]) {
    auto& s = cfg.scenario;
    seen.clear();
    std::string name = to_string(s.kind);
    read_into(n, "name", name, seen);
    s.kind = parse_scenario(name);
    read_into(n, "points", s.points, seen);
    read_into(n, "noise_sigma", s.noise_sigma, seen);
    read_into(n, "window", s.window, seen);
    read_into(n, "teacher_forcing", s.teacher_forcing, seen);
    read_into(n, "seed", s.seed, seen);
    reject_unknown(n, "scenario", seen);
  }
  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw ConfigError("cannot read config " + file.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

}  // namespace p2p
