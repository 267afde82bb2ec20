#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>

#include "p2p/config.hpp"
#include "p2p/dataset.hpp"
#include "p2p/errors.hpp"
#include "p2p/geometry.hpp"
#include "p2p/harness.hpp"
#include "p2p/pcd_prep.hpp"
#include "p2p/report.hpp"
#include "p2p/synth.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace p2p;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;

struct SynthArgs {
  fs::path out;
  int sequences = 4;
  int frames = 32;
  int points = 256;
  int joints = 24;
  int window = 4;
  std::uint64_t seed = 0;
  double amplitude = 0.5;
  bool depth = false;
};

struct PrepArgs {
  fs::path in, out;
  bool use_gpc = false;
  double tau = 0.05;
  double lambda = 2.0;
  int min_cluster = 10;
  int points = 0;
};

struct TrainArgs {
  fs::path config, data, out = "run";
};

struct EvalArgs {
  fs::path ckpt, data, out = "eval";
  std::string scenario;
  std::string init;
  int points = 0;
  double sigma = -1.0;
  int window = 0;
  bool teacher_forcing = false;
  std::uint64_t seed = 0;
};

struct SampleArgs {
  fs::path ckpt, data, out;
  std::string sequence;
  int frame = -1;
  std::uint64_t seed = 0;
};

struct PlotArgs {
  fs::path report, out;
};

Matrix resample(const Matrix& pts, int n) {
  if (pts.rows() == 0) throw EmptySegmentation("no points to resample");
  if (pts.rows() >= n) return select_rows(pts, farthest_point_sampling(pts, n, farthest_from_centroid(pts)));
  Matrix out(n, 3);
  for (int i = 0; i < n; ++i) out.row(i) = pts.row(i % pts.rows());
  return out;
}

int run_synth(const SynthArgs& a) {
  Dataset ds;
  const auto body = SyntheticBody::standard(a.joints);
  ds.meta.num_joints = a.joints;
  ds.meta.window = a.window;
  ds.meta.num_points = a.points;
  ds.meta.parents = body.skeleton.parents();
  const DepthCamera camera;
  for (int s = 0; s < a.sequences; ++s) {
    const auto script = MotionScript::random(a.joints, a.seed * 1000 + s, a.amplitude);
    auto gen = generate_sequence(body, script, a.frames, a.points);
    SequenceRecord rec;
    char id[16];
    std::snprintf(id, sizeof id, "s%03d", s);
    rec.id = id;
    rec.clouds = std::move(gen.clouds);
    rec.poses = std::move(gen.poses);
    if (a.depth) {
      DepthFrames d;
      for (int f = 0; f < a.frames; ++f) d.frames.push_back(camera.render(body, script, f, a.seed * 1000 + s));
      d.background = camera.background();
      d.intrinsics = camera.intrinsics;
      d.extrinsics = camera.extrinsics();
      rec.depth = std::move(d);
    }
    ds.sequences.push_back(std::move(rec));
  }
  write_dataset(a.out, ds);
  std::cout << "wrote " << a.sequences << " sequences to " << a.out.string() << "\n";
  return kExitOk;
}

int run_prep(const PrepArgs& a) {
  Dataset ds = read_dataset(a.in);
  const int n = a.points > 0 ? a.points : ds.meta.num_points;
  GpcParams gp;
  gp.lambda = a.lambda;
  gp.min_cluster = a.min_cluster;
  std::size_t removed = 0, total = 0;
  const DepthCamera camera;
  for (auto& seq : ds.sequences) {
    // GPC measures depth along the camera axis.
    const Eigen::Matrix4d to_camera = (seq.depth ? seq.depth->extrinsics : camera.extrinsics()).inverse();
    for (std::size_t f = 0; f < seq.clouds.size(); ++f) {
      Matrix pts = seq.clouds.frames[f];
      if (seq.depth) {
        const auto& d = *seq.depth;
        pts = segment_human({d.frames[f], d.intrinsics}, {d.background, d.intrinsics}, a.tau, d.extrinsics);
      }
      total += pts.rows();
      if (a.use_gpc) {
        const auto keep = gpc(transform_points(pts, to_camera), gp);
        removed += pts.rows() - keep.size();
        pts = select_rows(pts, keep);
      }
      seq.clouds.frames[f] = resample(pts, n);
    }
    seq.depth.reset();
  }
  ds.meta.num_points = n;
  write_dataset(a.out, ds);
  std::cout << "prepared " << ds.sequences.size() << " sequences";
  if (a.use_gpc) std::cout << ", gpc removed " << removed << " of " << total << " points";
  std::cout << "\n";
  return kExitOk;
}

void check_compatible(const ExperimentConfig& cfg, const Dataset& ds) {
  if (cfg.model.joints != ds.meta.num_joints) {
    throw ConfigError("model.joints=" + std::to_string(cfg.model.joints) + " but the dataset has " +
                      std::to_string(ds.meta.num_joints) + " joints");
  }
  if (cfg.model.points != ds.meta.num_points) {
    throw ConfigError("model.points=" + std::to_string(cfg.model.points) + " but the dataset has " +
                      std::to_string(ds.meta.num_points) + " points per frame");
  }
}

int run_train(const TrainArgs& a) {
  const auto cfg = load_config(a.config);
  const Dataset ds = read_dataset(a.data);
  check_compatible(cfg, ds);
  const auto windows = make_windows(ds, cfg.model.window);
  Point2Pose model(cfg.model, SkeletonGraph::from_parents(ds.meta.parents), cfg.train.seed);
  fs::create_directories(a.out);
  std::ofstream log(a.out / "loss.csv");
  if (!log) throw IoError("cannot write " + (a.out / "loss.csv").string());
  log << "step,epoch,loss\n";
  TrainHooks hooks;
  hooks.checkpoint = a.out / "model.ckpt";
  hooks.on_step = [&](long step, int epoch, double loss) {
    char line[96];
    std::snprintf(line, sizeof line, "%ld,%d,%.17g\n", step, epoch, loss);
    log << line;
  };
  const auto result = train(model, cfg, windows, hooks);
  std::cout << "trained " << result.steps << " steps over " << result.epochs << " epochs, final loss "
            << result.losses.back() << ", checkpoint " << hooks.checkpoint.string() << "\n";
  return kExitOk;
}

int run_eval(const EvalArgs& a) {
  auto ck = load_checkpoint(a.ckpt);
  ExperimentConfig cfg = ck.config;
  if (!a.scenario.empty()) cfg.scenario.kind = parse_scenario(a.scenario);
  if (a.points > 0) cfg.scenario.points = a.points;
  if (a.sigma >= 0.0) cfg.scenario.noise_sigma = a.sigma;
  if (a.window > 0) cfg.scenario.window = a.window;
  if (a.teacher_forcing) cfg.scenario.teacher_forcing = true;
  cfg.scenario.seed = a.seed;
  cfg.validate();

  InitMode init = cfg.scenario.kind == ScenarioKind::kNoInitPose ? InitMode::kNoise : InitMode::kGroundTruth;
  if (a.init == "noise") init = InitMode::kNoise;
  else if (a.init == "gt") init = InitMode::kGroundTruth;
  else if (!a.init.empty()) throw ConfigError("--init must be gt or noise");

  const Dataset ds = read_dataset(a.data);
  check_compatible(cfg, ds);
  std::mt19937_64 rng(cfg.scenario.seed);
  json summary = {{"scenario", to_string(cfg.scenario.kind)}, {"mode", to_string(cfg.diffusion.mode)}};
  json seqs = json::array();
  double mpjpe_sum = 0.0, ang_sum = 0.0;
  std::size_t frames = 0;
  for (const auto& seq : ds.sequences) {
    const auto clouds = apply_scenario(seq.clouds, cfg.scenario, cfg.infer_points(), rng);
    RolloutOptions ro;
    ro.window = cfg.infer_window();
    ro.init = init;
    ro.teacher_forcing = cfg.scenario.teacher_forcing;
    ro.seed = cfg.scenario.seed;
    auto report = rollout(*ck.model, cfg.diffusion, clouds, seq.poses, ro);
    report.sequence = seq.id;
    report.scenario = to_string(cfg.scenario.kind);
    emit_report(report, a.out / seq.id);
    for (const auto& f : report.frames) {
      mpjpe_sum += f.mpjpe_mm;
      ang_sum += f.angular_deg;
    }
    frames += report.frames.size();
    seqs.push_back({{"sequence", seq.id},
                    {"frames", report.frames.size()},
                    {"mean_mpjpe_mm", report.mean_mpjpe_mm},
                    {"mean_angular_deg", report.mean_angular_deg}});
  }
  summary["init"] = init == InitMode::kNoise ? "noise" : "gt";
  summary["window"] = cfg.infer_window();
  summary["points"] = cfg.infer_points();
  summary["sequences"] = seqs;
  summary["frames"] = frames;
  summary["mean_mpjpe_mm"] = frames ? mpjpe_sum / frames : 0.0;
  summary["mean_angular_deg"] = frames ? ang_sum / frames : 0.0;
  std::ofstream out(a.out / "summary.json");
  if (!out) throw IoError("cannot write " + (a.out / "summary.json").string());
  out << summary.dump(2) << "\n";
  std::printf("%s: %zu frames, MPJPE %.2f mm, angular error %.2f deg\n", to_string(cfg.scenario.kind).c_str(), frames,
              summary["mean_mpjpe_mm"].get<double>(), summary["mean_angular_deg"].get<double>());
  return kExitOk;
}

int run_sample(const SampleArgs& a) {
  auto ck = load_checkpoint(a.ckpt);
  const Dataset ds = read_dataset(a.data);
  check_compatible(ck.config, ds);
  const SequenceRecord* seq = ds.sequences.empty() ? nullptr : &ds.sequences.front();
  for (const auto& s : ds.sequences) {
    if (s.id == a.sequence) seq = &s;
  }
  if (!seq || (!a.sequence.empty() && seq->id != a.sequence)) throw ConfigError("unknown sequence '" + a.sequence + "'");
  const int T = ck.config.model.window;
  const int frame = a.frame >= 0 ? a.frame : seq->frame_count() - 1;
  if (frame < T - 1 || frame >= seq->frame_count()) {
    throw ConfigError("--frame must lie in [" + std::to_string(T - 1) + ", " + std::to_string(seq->frame_count() - 1) + "]");
  }
  PointCloudSequence clouds;
  PoseSequence history;
  for (int t = frame - T + 1; t <= frame; ++t) clouds.frames.push_back(seq->clouds.frames[t]);
  for (int t = frame - T + 1; t < frame; ++t) {
    PoseFrame p = seq->poses.frames[t];
    root_relativize(p);
    history.frames.push_back(std::move(p));
  }
  std::mt19937_64 rng(a.seed);
  const PoseFrame pose = ck.model->sample(clouds, history, ck.config.diffusion, rng);
  auto rows = [](const Matrix& m) {
    json arr = json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) arr.push_back(std::vector<double>(m.row(r).data(), m.row(r).data() + m.cols()));
    return arr;
  };
  json j = {{"sequence", seq->id},
            {"frame", frame},
            {"coords", rows(pose.coords)},
            {"rots", rows(pose.rots)},
            {"mpjpe_mm", mpjpe(pose, seq->poses.frames[frame])}};
  if (a.out.empty()) {
    std::cout << j.dump(2) << "\n";
  } else {
    std::ofstream out(a.out);
    if (!out) throw IoError("cannot write " + a.out.string());
    out << j.dump(2) << "\n";
  }
  return kExitOk;
}

int run_plot(const PlotArgs& a) {
  const RolloutReport report = read_report(a.report);
  const fs::path out = a.out.empty() ? a.report.parent_path() : a.out;
  emit_report(report, out);
  std::cout << "wrote plots for " << report.frames.size() << " frames to " << out.string() << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Point2Pose: generative 3D human pose estimation from point cloud sequences"};
  app.require_subcommand(1);

  SynthArgs sa;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic dataset");
  synth->add_option("--out", sa.out, "Output dataset directory")->required();
  synth->add_option("--sequences", sa.sequences, "Number of sequences")->check(CLI::PositiveNumber);
  synth->add_option("--frames", sa.frames, "Frames per sequence")->check(CLI::PositiveNumber);
  synth->add_option("--points", sa.points, "Points per frame (N)")->check(CLI::PositiveNumber);
  synth->add_option("--joints", sa.joints, "Joint count (J)")->check(CLI::PositiveNumber);
  synth->add_option("--window", sa.window, "Window length T recorded in the manifest")->check(CLI::PositiveNumber);
  synth->add_option("--seed", sa.seed, "Motion seed");
  synth->add_option("--amplitude", sa.amplitude, "Maximum per-wave joint angle amplitude (rad)");
  synth->add_flag("--depth", sa.depth, "Also render depth frames for the segmentation path");

  PrepArgs pa;
  auto* prep = app.add_subcommand("prep", "Segment depth frames and clean point clouds");
  prep->add_option("--in", pa.in, "Input dataset directory")->required();
  prep->add_option("--out", pa.out, "Output dataset directory")->required();
  prep->add_flag("--gpc", pa.use_gpc, "Apply graph-based point cloud clustering");
  prep->add_option("--tau", pa.tau, "Background subtraction threshold (m)");
  prep->add_option("--lambda", pa.lambda, "GPC depth trim factor");
  prep->add_option("--nc", pa.min_cluster, "GPC minimum cluster size");
  prep->add_option("--points", pa.points, "Points per frame after resampling (default: dataset N)");

  TrainArgs ta;
  auto* trainc = app.add_subcommand("train", "Train a model");
  trainc->add_option("--config", ta.config, "YAML config")->required();
  trainc->add_option("--data", ta.data, "Dataset directory")->required();
  trainc->add_option("--out", ta.out, "Run directory (checkpoint and loss log)");

  EvalArgs ea;
  auto* evalc = app.add_subcommand("eval", "Autoregressive rollout evaluation");
  evalc->add_option("--ckpt", ea.ckpt, "Checkpoint file")->required();
  evalc->add_option("--data", ea.data, "Dataset directory")->required();
  evalc->add_option("--scenario", ea.scenario, "clean, sparse, noisy or no-init-pose");
  evalc->add_option("--out", ea.out, "Report directory");
  evalc->add_option("--init", ea.init, "History initialisation: gt or noise");
  evalc->add_option("--points", ea.points, "N_infer for the sparse scenario");
  evalc->add_option("--sigma", ea.sigma, "Point noise for the noisy scenario (m)");
  evalc->add_option("--window", ea.window, "T_infer");
  evalc->add_flag("--teacher-forcing", ea.teacher_forcing, "Feed ground-truth poses as history");
  evalc->add_option("--seed", ea.seed, "Sampling seed");

  SampleArgs sma;
  auto* sample = app.add_subcommand("sample", "Sample one pose");
  sample->add_option("--ckpt", sma.ckpt, "Checkpoint file")->required();
  sample->add_option("--data", sma.data, "Dataset directory")->required();
  sample->add_option("--seq", sma.sequence, "Sequence id (default: first)");
  sample->add_option("--frame", sma.frame, "Frame index (default: last)");
  sample->add_option("--seed", sma.seed, "Sampling seed");
  sample->add_option("--out", sma.out, "Output JSON file (default: stdout)");

  PlotArgs pla;
  auto* plot = app.add_subcommand("plot", "Redraw plots from a metrics.json");
  plot->add_option("--report", pla.report, "metrics.json path")->required();
  plot->add_option("--out", pla.out, "Output directory (default: alongside the report)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    if (*synth) return run_synth(sa);
    if (*prep) return run_prep(pa);
    if (*trainc) return run_train(ta);
    if (*evalc) return run_eval(ea);
    if (*sample) return run_sample(sma);
    if (*plot) return run_plot(pla);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitFailure;
}
