// Acceptance run: one PASS/FAIL line per criterion. Pass criterion numbers as
// arguments to run a subset; --out <dir> keeps the scenario reports.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "p2p/config.hpp"
#include "p2p/errors.hpp"
#include "p2p/generative.hpp"
#include "p2p/geometry.hpp"
#include "p2p/harness.hpp"
#include "p2p/model.hpp"
#include "p2p/pc_encoder.hpp"
#include "p2p/pcd_prep.hpp"
#include "p2p/pose.hpp"
#include "p2p/report.hpp"
#include "p2p/synth.hpp"

using namespace p2p;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

fs::path g_out;

Mat3 random_rotation(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::Quaterniond q(n(rng), n(rng), n(rng), n(rng));
  return q.normalized().toRotationMatrix();
}

Matrix uniform(int rows, int cols, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Matrix m(rows, cols);
  for (Eigen::Index k = 0; k < m.size(); ++k) m.data()[k] = u(rng);
  return m;
}

PoseFrame random_pose(int joints, std::mt19937_64& rng) {
  PoseFrame p;
  p.coords = uniform(joints, 3, rng);
  p.rots.resize(joints, 6);
  for (int j = 0; j < joints; ++j) p.set_rotation(j, encode_rotation(random_rotation(rng)));
  return p;
}

ExperimentConfig desk_config() { return load_config(fs::path(P2P_SOURCE_DIR) / "configs" / "desk.yaml"); }

GeneratedSequence synthetic(std::uint64_t seed, int frames, int points, int joints = 24) {
  return generate_sequence(SyntheticBody::standard(joints), MotionScript::random(joints, seed), frames, points);
}

double rollout_mpjpe(const Point2Pose& model, const ExperimentConfig& cfg, const GeneratedSequence& seq,
                     std::uint64_t seed) {
  RolloutOptions o;
  o.window = cfg.model.window;
  o.teacher_forcing = true;
  o.seed = seed;
  return rollout(model, cfg.diffusion, seq.clouds, seq.poses, o).mean_mpjpe_mm;
}

// 1
Outcome rotation_round_trip() {
  std::mt19937_64 rng(1);
  double worst = 0.0, worst_det = 0.0, worst_orth = 0.0;
  for (int k = 0; k < 1000; ++k) {
    const Mat3 R = random_rotation(rng);
    worst = std::max(worst, (decode_rotation(encode_rotation(R)) - R).cwiseAbs().maxCoeff());
    Rotation6D r;
    r.a1 = uniform(3, 1, rng, -2.0, 2.0);
    r.a2 = uniform(3, 1, rng, -2.0, 2.0);
    const Mat3 D = decode_rotation(r);
    worst_det = std::max(worst_det, std::abs(D.determinant() - 1.0));
    worst_orth = std::max(worst_orth, (D.transpose() * D - Mat3::Identity()).cwiseAbs().maxCoeff());
  }
  return {worst <= 1e-8 && worst_det <= 1e-10 && worst_orth <= 1e-10,
          fmt("max round-trip error %.2e, max |det-1| %.2e, max |R^T R - I| %.2e", worst, worst_det, worst_orth)};
}

// 2
Outcome gradient_verification() {
  ModelConfig m;
  m.joints = 4;
  m.window = 2;
  m.points = 32;
  m.patches = 4;
  m.patch_size = 4;
  m.local_dim = 4;
  m.global_dim = 4;
  m.cloud_dim = 8;
  m.pose_dim = 8;
  m.heads = 2;
  m.denoiser_dim = 8;
  m.hidden = 8;
  m.sa1_centers = 8;
  m.sa1_radius = 0.6;
  m.sa2_centers = 4;
  m.sa2_radius = 1.2;
  std::string detail;
  bool pass = true;
  for (auto mode : {GenerativeMode::kDiffusion, GenerativeMode::kFlowMatching}) {
    std::mt19937_64 rng(2);
    Point2Pose model(m, SkeletonGraph::standard(4), 2);
    std::normal_distribution<double> n(0.0, 0.1);
    for (const auto& [name, p] : model.params().entries()) {
      ad::Var v = p;
      for (Eigen::Index k = 0; k < v.value().size(); ++k) {
        if (v.value().data()[k] == 0.0) v.mutable_value().data()[k] = n(rng);
      }
    }
    std::vector<TrainingWindow> windows(2);
    for (auto& w : windows) {
      for (int t = 0; t < 2; ++t) w.clouds.frames.push_back(uniform(32, 3, rng));
      w.history.frames.push_back(random_pose(4, rng));
      w.target = random_pose(4, rng);
    }
    const std::vector<const TrainingWindow*> batch{&windows[0], &windows[1]};
    DiffusionConfig d;
    d.mode = mode;
    d.iterations = 5;
    d.tau = 0.05;
    auto loss = [&] {
      std::mt19937_64 fixed(7);
      return model.loss(batch, d, fixed, false);
    };
    model.params().zero_grad();
    ad::backward(loss());
    std::vector<std::pair<ad::Var, Eigen::Index>> slots;
    for (const auto& [name, p] : model.params().entries()) {
      for (Eigen::Index k = 0; k < p.value().size(); ++k) slots.emplace_back(p, k);
    }
    std::shuffle(slots.begin(), slots.end(), rng);
    slots.resize(40);
    double worst = 0.0;
    const double h = 1e-6;
    for (auto [p, k] : slots) {
      double& x = p.mutable_value().data()[k];
      const double analytic = p.grad().data()[k], x0 = x;
      double up, down;
      {
        ad::NoGradGuard guard;
        x = x0 + h;
        up = loss().scalar();
        x = x0 - h;
        down = loss().scalar();
        x = x0;
      }
      const double numeric = (up - down) / (2 * h);
      worst = std::max(worst, std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), 1e-5}));
    }
    pass = pass && worst <= 1e-3;
    detail += fmt("%s: 40 params, worst rel err %.2e; ", to_string(mode).c_str(), worst);
  }
  detail.resize(detail.size() - 2);
  return {pass, detail};
}

// 3
Outcome oracle_exactness() {
  std::mt19937_64 rng(3);
  const auto dm = DmSchedule::linear(20);
  const CfmSchedule cfm{20, 0.0};
  double worst = 0.0;
  for (int k = 0; k < 100; ++k) {
    const auto gt = random_pose(24, rng);
    OracleDenoiser oracle(gt);
    for (const auto& out : {sample_dm(oracle, dm, rng), sample_cfm(oracle, cfm, rng)}) {
      worst = std::max({worst, (out.coords - gt.coords).cwiseAbs().maxCoeff(), (out.rots - gt.rots).cwiseAbs().maxCoeff()});
    }
  }
  return {worst <= 1e-12, fmt("100 poses, max |X - X_gt| = %.2e", worst)};
}

// 4
Outcome ot_optimality() {
  std::mt19937_64 rng(4);
  int exact = 0;
  double worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const int B = 1 + trial % 6;
    std::vector<Matrix> noise, gt;
    for (int b = 0; b < B; ++b) {
      noise.push_back(uniform(24, 3, rng));
      gt.push_back(uniform(24, 3, rng));
    }
    std::vector<int> perm(B);
    std::iota(perm.begin(), perm.end(), 0);
    double best = std::numeric_limits<double>::infinity();
    do {
      double c = 0.0;
      for (int b = 0; b < B; ++b) c += (noise[b] - gt[perm[b]]).squaredNorm();
      best = std::min(best, c);
    } while (std::next_permutation(perm.begin(), perm.end()));
    const double got = ot_pair(noise, gt).cost;
    exact += got == best;
    worst = std::max(worst, std::abs(got - best) / best);
  }
  return {worst <= 1e-12, fmt("50 batches, %d bit-identical, max rel gap %.2e", exact, worst)};
}

// 5
Outcome smooth_l1_branches() {
  const double tau = 0.01;
  const double below = std::nextafter(tau, 0.0), above = std::nextafter(tau, 1.0);
  const double dv = std::abs(ad::smooth_l1_value(below, tau) - ad::smooth_l1_value(above, tau));
  const double dd = std::abs(ad::smooth_l1_derivative(below, tau) - ad::smooth_l1_derivative(above, tau));
  // same check through the graph
  ad::Var lo(Matrix::Constant(1, 1, below), true), hi(Matrix::Constant(1, 1, above), true);
  ad::backward(ad::smooth_l1(lo, Matrix::Zero(1, 1), tau));
  ad::backward(ad::smooth_l1(hi, Matrix::Zero(1, 1), tau));
  const double dg = std::abs(lo.grad()(0, 0) - hi.grad()(0, 0));
  return {dv <= 1e-12 && dd <= 1e-12 && dg <= 1e-12,
          fmt("value jump %.2e, derivative jump %.2e, graph gradient jump %.2e", dv, dd, dg)};
}

// 6
Outcome overfit() {
  auto cfg = desk_config();
  const auto seq = synthetic(6, 32, cfg.model.points);
  const auto body = SyntheticBody::standard(24);
  Point2Pose model(cfg.model, body.skeleton, cfg.train.seed);
  const auto windows = make_windows(seq.clouds, seq.poses, cfg.model.window);
  const int per_epoch = (static_cast<int>(windows.size()) + cfg.train.batch_size - 1) / cfg.train.batch_size;
  cfg.train.epochs = (cfg.train.max_steps + per_epoch - 1) / per_epoch;
  const auto r = train(model, cfg, windows);
  const std::size_t tail = std::min<std::size_t>(20, r.losses.size());
  const double initial = r.losses.front();
  const double final_loss =
      std::accumulate(r.losses.end() - static_cast<long>(tail), r.losses.end(), 0.0) / static_cast<double>(tail);
  const double mm = rollout_mpjpe(model, cfg, seq, 0);
  return {r.steps <= 500 && final_loss <= 0.1 * initial && mm <= 50.0,
          fmt("%s, %ld steps, loss %.4f -> %.4f (ratio %.3f), GT-history MPJPE %.1f mm",
              to_string(cfg.diffusion.mode).c_str(), r.steps, initial, final_loss, final_loss / initial, mm)};
}

// 7
Outcome ablation_direction() {
  const auto base = desk_config();
  bool pass = true;
  std::string detail;
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    std::vector<GeneratedSequence> train_seqs, test_seqs;
    for (int s = 0; s < 8; ++s) {
      (s < 6 ? train_seqs : test_seqs).push_back(synthetic(700 + seed * 1000 + s, 32, base.model.points));
    }
    std::vector<TrainingWindow> windows;
    for (const auto& s : train_seqs) {
      auto w = make_windows(s.clouds, s.poses, base.model.window);
      std::move(w.begin(), w.end(), std::back_inserter(windows));
    }
    double score[2];
    for (int ablate = 0; ablate < 2; ++ablate) {
      auto cfg = base;
      cfg.train.seed = seed;
      cfg.model.use_pose_encoder = ablate == 0;
      const int per_epoch = (static_cast<int>(windows.size()) + cfg.train.batch_size - 1) / cfg.train.batch_size;
      cfg.train.epochs = (cfg.train.max_steps + per_epoch - 1) / per_epoch;
      Point2Pose model(cfg.model, SyntheticBody::standard(24).skeleton, seed);
      train(model, cfg, windows);
      double sum = 0.0;
      for (const auto& s : test_seqs) sum += rollout_mpjpe(model, cfg, s, seed);
      score[ablate] = sum / static_cast<double>(test_seqs.size());
    }
    pass = pass && score[1] > score[0];
    detail += fmt("seed %d full %.1f mm vs w/o pose-point encoder %.1f mm; ", int(seed), score[0], score[1]);
  }
  detail.resize(detail.size() - 2);
  return {pass, detail};
}

// 8
Outcome gpc_efficacy() {
  const auto body = SyntheticBody::standard(24);
  GpcParams params;
  params.cell = 0.1;
  int wins = 0;
  double before_sum = 0.0, after_sum = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    std::mt19937_64 rng(800 + trial);
    Matrix clean = generate_sequence(body, MotionScript::random(24, 800 + trial), 1, 256).clouds.frames[0];
    clean.col(2).array() += 3.0;  // camera frame: depth along +z
    const Eigen::RowVector3d lo = clean.colwise().minCoeff().array() - 0.5;
    const Eigen::RowVector3d hi = clean.colwise().maxCoeff().array() + 0.5;
    const int extra = static_cast<int>(clean.rows()) * 5 / 100;
    Matrix noisy(clean.rows() + extra, 3);
    noisy.topRows(clean.rows()) = clean;
    for (int i = 0; i < extra; ++i) {
      for (int c = 0; c < 3; ++c) noisy(clean.rows() + i, c) = std::uniform_real_distribution<double>(lo[c], hi[c])(rng);
    }
    const double before = chamfer(noisy, clean);
    double after = std::numeric_limits<double>::infinity();
    try {
      after = chamfer(select_rows(noisy, gpc(noisy, params)), clean);
    } catch (const EmptyResult&) {
    }
    wins += after < before;
    before_sum += before;
    after_sum += after;
  }
  return {wins >= 95, fmt("%d/100 trials improved, mean chamfer %.5f -> %.5f (cell %.2f m)", wins, before_sum / 100,
                          after_sum / 100, params.cell)};
}

// 9
Outcome scenario_robustness() {
  auto cfg = desk_config();
  cfg.model.points = 256;
  cfg.model.window = 4;
  cfg.train.max_steps = 40;
  const auto seq = synthetic(900, 32, 256);
  const auto test = synthetic(901, 12, 256);
  Point2Pose model(cfg.model, SyntheticBody::standard(24).skeleton, 9);
  train(model, cfg, make_windows(seq.clouds, seq.poses, 4));

  struct Case {
    std::string name;
    ScenarioConfig scenario;
    InitMode init = InitMode::kGroundTruth;
  };
  std::vector<Case> cases;
  for (int n : {128, 64, 32}) cases.push_back({"sparse_" + std::to_string(n), {ScenarioKind::kSparse, n}});
  for (double s : {0.01, 0.04}) {
    ScenarioConfig sc;
    sc.kind = ScenarioKind::kNoisy;
    sc.noise_sigma = s;
    cases.push_back({fmt("noisy_%.2f", s), sc});
  }
  for (int t : {2, 3}) {
    ScenarioConfig sc;
    sc.window = t;
    cases.push_back({"window_" + std::to_string(t), sc});
  }
  cases.push_back({"init_noise", {ScenarioKind::kNoInitPose}, InitMode::kNoise});

  const fs::path out = g_out.empty() ? fs::temp_directory_path() / "p2p_acceptance_scenarios" : g_out;
  int ok = 0;
  std::string failures;
  for (const auto& c : cases) {
    try {
      std::mt19937_64 rng(c.scenario.seed);
      const auto clouds = apply_scenario(test.clouds, c.scenario, c.scenario.points > 0 ? c.scenario.points : 256, rng);
      RolloutOptions o;
      o.window = c.scenario.window > 0 ? c.scenario.window : 4;
      o.init = c.init;
      auto r = rollout(model, cfg.diffusion, clouds, test.poses, o);
      r.sequence = "s901";
      r.scenario = to_string(c.scenario.kind);
      const bool finite = std::isfinite(r.mean_mpjpe_mm) && std::isfinite(r.mean_angular_deg);
      emit_report(r, out / c.name);
      if (finite && fs::exists(out / c.name / "metrics.json")) {
        ++ok;
      } else {
        failures += " " + c.name;
      }
    } catch (const Error& e) {
      failures += " " + c.name + "(" + e.what() + ")";
    }
  }
  return {ok == static_cast<int>(cases.size()),
          fmt("%d/%d rollouts finite with reports in %s%s", ok, int(cases.size()), out.c_str(),
              failures.empty() ? "" : ("; failed:" + failures).c_str())};
}

// 10
std::vector<int> reference_fps(const Matrix& p, int count, int seed) {
  std::vector<int> out{seed};
  std::vector<double> d(p.rows(), std::numeric_limits<double>::infinity());
  while (static_cast<int>(out.size()) < count) {
    for (Eigen::Index i = 0; i < p.rows(); ++i) d[i] = std::min(d[i], (p.row(i) - p.row(out.back())).squaredNorm());
    out.push_back(static_cast<int>(std::max_element(d.begin(), d.end()) - d.begin()));
  }
  return out;
}

std::vector<int> reference_knn(const Matrix& p, Eigen::Index q, int k) {
  std::vector<std::pair<double, int>> d;
  for (Eigen::Index i = 0; i < p.rows(); ++i) d.emplace_back((p.row(i) - p.row(q)).squaredNorm(), static_cast<int>(i));
  std::sort(d.begin(), d.end());
  std::vector<int> out;
  for (int i = 0; i < k; ++i) out.push_back(d[i].second);
  return out;
}

std::vector<int> reference_dbscan(const Matrix& p, double eps, int min_pts) {
  const int n = static_cast<int>(p.rows());
  std::vector<std::vector<int>> nb(n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if ((p.row(i) - p.row(j)).norm() <= eps) nb[i].push_back(j);
    }
  }
  std::vector<int> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  std::function<int(int)> find = [&](int x) { return parent[x] == x ? x : parent[x] = find(parent[x]); };
  auto core = [&](int i) { return static_cast<int>(nb[i].size()) >= min_pts; };
  for (int i = 0; i < n; ++i) {
    for (int j : nb[i]) {
      if (core(i) && core(j)) parent[std::max(find(i), find(j))] = std::min(find(i), find(j));
    }
  }
  std::map<int, int> label_of_root;
  std::vector<int> labels(n, kNoise);
  for (int i = 0; i < n; ++i) {
    if (!core(i)) continue;
    const int root = find(i);
    if (!label_of_root.count(root)) label_of_root.emplace(root, static_cast<int>(label_of_root.size()));
    labels[i] = label_of_root[root];
  }
  for (int i = 0; i < n; ++i) {
    if (core(i)) continue;
    for (int j : nb[i]) {
      if (core(j) && (labels[i] == kNoise || labels[j] < labels[i])) labels[i] = labels[j];
    }
  }
  return labels;
}

std::vector<int> reference_sor(const Matrix& p, int k, double ratio) {
  const int n = static_cast<int>(p.rows());
  std::vector<double> mean(n);
  for (int i = 0; i < n; ++i) {
    std::vector<double> d;
    for (int j = 0; j < n; ++j) {
      if (j != i) d.push_back((p.row(i) - p.row(j)).norm());
    }
    std::sort(d.begin(), d.end());
    mean[i] = std::accumulate(d.begin(), d.begin() + k, 0.0) / k;
  }
  const double mu = std::accumulate(mean.begin(), mean.end(), 0.0) / n;
  double var = 0.0;
  for (double m : mean) var += (m - mu) * (m - mu);
  std::vector<int> keep;
  for (int i = 0; i < n; ++i) {
    if (mean[i] <= mu + ratio * std::sqrt(var / n)) keep.push_back(i);
  }
  return keep;
}

double reference_chamfer(const Matrix& a, const Matrix& b) {
  auto one_way = [](const Matrix& x, const Matrix& y) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (Eigen::Index j = 0; j < y.rows(); ++j) best = std::min(best, (x.row(i) - y.row(j)).squaredNorm());
      s += best;
    }
    return s / static_cast<double>(x.rows());
  };
  return one_way(a, b) + one_way(b, a);
}

Matrix blobs(int n, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 0.05);
  Matrix centers = uniform(4, 3, rng);
  Matrix p(n, 3);
  for (int i = 0; i < n; ++i) {
    if (i % 10 == 9) {
      p.row(i) = uniform(1, 3, rng);
    } else {
      p.row(i) = centers.row(i % 4) + Eigen::RowVector3d(g(rng), g(rng), g(rng));
    }
  }
  return p;
}

Outcome brute_force_suite() {
  std::mt19937_64 rng(10);
  int mismatches[5] = {0, 0, 0, 0, 0};
  double chamfer_gap = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 40 + trial * 8;  // 40..192
    const Matrix p = trial % 2 ? blobs(n, rng) : uniform(n, 3, rng);
    const Matrix q = uniform(n / 2 + 3, 3, rng);

    mismatches[0] += dbscan(p, 0.12, 4) != reference_dbscan(p, 0.12, 4);
    mismatches[1] += sor(p, 6, 1.0) != reference_sor(p, 6, 1.0);

    const int seed = static_cast<int>(rng() % n);
    const auto centres = reference_fps(p, 8, seed);
    mismatches[3] += farthest_point_sampling(p, 8, seed) != centres;
    const auto patches = make_patches(PointCloudSequence{{p}}, 8, 6, seed);
    for (int g = 0; g < 8; ++g) {
      const std::vector<int> got(patches.indices.begin() + g * 6, patches.indices.begin() + (g + 1) * 6);
      mismatches[2] += got != reference_knn(p, centres[g], 6);
    }

    chamfer_gap = std::max(chamfer_gap, std::abs(chamfer(p, q) - reference_chamfer(p, q)));
  }
  mismatches[4] = chamfer_gap > 1e-9;
  const bool pass = std::all_of(std::begin(mismatches), std::end(mismatches), [](int m) { return m == 0; });
  return {pass, fmt("20 inputs of 40-192 points; mismatches dbscan %d, sor %d, knn patches %d, fps %d; chamfer max gap %.1e",
                    mismatches[0], mismatches[1], mismatches[2], mismatches[3], chamfer_gap)};
}

// 11
std::string slurp(const fs::path& f) {
  std::ifstream in(f, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome determinism() {
  const fs::path root = fs::temp_directory_path() / "p2p_acceptance_determinism";
  fs::remove_all(root);
  const std::string cli = P2P_CLI_PATH;
  const std::string config = (fs::path(P2P_SOURCE_DIR) / "configs" / "tiny.yaml").string();
  std::vector<std::map<std::string, std::string>> runs;
  for (int run = 0; run < 2; ++run) {
    const fs::path dir = root / ("run" + std::to_string(run));
    const std::string cmd = "\"" + cli + "\" synth --out \"" + (dir / "data").string() +
                            "\" --sequences 2 --frames 8 --points 64 --joints 8 --window 3 --seed 11 > /dev/null && \"" +
                            cli + "\" train --config \"" + config + "\" --data \"" + (dir / "data").string() +
                            "\" --out \"" + (dir / "run").string() + "\" > /dev/null && \"" + cli + "\" eval --ckpt \"" +
                            (dir / "run" / "model.ckpt").string() + "\" --data \"" + (dir / "data").string() +
                            "\" --out \"" + (dir / "eval").string() + "\" --seed 5 > /dev/null";
    if (std::system(cmd.c_str()) != 0) return {false, "p2p train/eval exited non-zero"};
    std::map<std::string, std::string> files;
    for (const auto& e : fs::recursive_directory_iterator(dir / "eval")) {
      const auto name = e.path().filename().string();
      if (name == "metrics.json" || name == "summary.json") {
        files[fs::relative(e.path(), dir).string()] = slurp(e.path());
      }
    }
    runs.push_back(std::move(files));
  }
  const bool same = !runs[0].empty() && runs[0] == runs[1];
  return {same, fmt("%zu metric JSON files compared, %s", runs[0].size(), same ? "byte-identical" : "differ")};
}

}  // namespace

int main(int argc, char** argv) {
  std::set<int> only;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--out" && i + 1 < argc) {
      g_out = argv[++i];
    } else {
      only.insert(std::atoi(argv[i]));
    }
  }
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"rotation round-trip", rotation_round_trip},
      {"gradient verification", gradient_verification},
      {"oracle sampler exactness", oracle_exactness},
      {"OT coupling optimality", ot_optimality},
      {"smooth-L1 branch consistency", smooth_l1_branches},
      {"overfit check", overfit},
      {"ablation direction", ablation_direction},
      {"GPC efficacy", gpc_efficacy},
      {"scenario robustness", scenario_robustness},
      {"brute-force equivalence", brute_force_suite},
      {"determinism", determinism},
  };
  int failed = 0;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    const int id = static_cast<int>(k) + 1;
    if (!only.empty() && !only.count(id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[k].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("[%s] %2d %s: %s (%.1f s)\n", o.pass ? "PASS" : "FAIL", id, criteria[k].first.c_str(),
                o.detail.c_str(), secs);
    std::fflush(stdout);
    failed += !o.pass;
  }
  return failed == 0 ? 0 : 1;
}
