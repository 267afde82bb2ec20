#include "p2p/generative.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "p2p/errors.hpp"

namespace p2p {

DmSchedule DmSchedule::linear(int iterations, double beta_start, double beta_end) {
  if (iterations < 1) throw ShapeError("DmSchedule needs at least one iteration");
  DmSchedule s;
  s.iterations = iterations;
  s.beta.resize(iterations + 1);
  s.alpha.resize(iterations + 1);
  s.alpha_bar.resize(iterations + 1);
  double running = 1.0;
  for (int i = 0; i <= iterations; ++i) {
    s.beta[i] = beta_start + (beta_end - beta_start) * static_cast<double>(i) / iterations;
    s.alpha[i] = 1.0 - s.beta[i];
    running *= s.alpha[i];
    s.alpha_bar[i] = running;
  }
  s.validate();
  return s;
}

void DmSchedule::validate() const {
  const auto n = static_cast<std::size_t>(iterations) + 1;
  if (iterations < 1 || beta.size() != n || alpha.size() != n || alpha_bar.size() != n) {
    throw ShapeError("DmSchedule arrays must have iterations + 1 entries");
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (!(beta[i] > 0.0 && beta[i] < 1.0)) throw ConfigError("DmSchedule beta outside (0, 1)");
    if (i > 0 && !(alpha_bar[i] < alpha_bar[i - 1])) throw ConfigError("DmSchedule alpha_bar must decrease");
  }
}

void CfmSchedule::validate() const {
  if (iterations < 1) throw ConfigError("CfmSchedule needs at least one step");
  if (!(sigma >= 0.0)) throw ConfigError("CfmSchedule sigma must be >= 0");
}

namespace {

void check_like(const Matrix& a, const Matrix& b, const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw ShapeError(std::string(what) + " shape mismatch");
}

void check_iteration(int i, int iterations) {
  if (i < 0 || i > iterations) {
    throw ShapeError("iteration " + std::to_string(i) + " outside [0, " + std::to_string(iterations) + "]");
  }
}

void check_finite(const Matrix& m, const char* what, int i) {
  if (!m.allFinite()) throw NumericalError(std::string("non-finite ") + what + " at iteration " + std::to_string(i));
}

}  // namespace

PerturbedPose perturb_dm(const PoseFrame& gt, int i, const DmSchedule& schedule, const Matrix& coord_noise,
                         const Matrix& rot_noise) {
  check_iteration(i, schedule.iterations);
  check_like(gt.coords, coord_noise, "coordinate noise");
  check_like(gt.rots, rot_noise, "rotation noise");
  const double a = std::sqrt(schedule.alpha_bar[i]);
  const double b = std::sqrt(1.0 - schedule.alpha_bar[i]);
  return {a * gt.coords + b * coord_noise, a * gt.rots + b * rot_noise, i};
}

PerturbedPose perturb_cfm(const PoseFrame& gt, int i, const CfmSchedule& schedule, const Matrix& z0_coords,
                          const Matrix& z0_rots, const Matrix& eps_coords, const Matrix& eps_rots) {
  check_iteration(i, schedule.iterations);
  check_like(gt.coords, z0_coords, "paired coordinate noise");
  check_like(gt.rots, z0_rots, "paired rotation noise");
  check_like(gt.coords, eps_coords, "coordinate path noise");
  check_like(gt.rots, eps_rots, "rotation path noise");
  const double t = static_cast<double>(i) / schedule.iterations;
  PerturbedPose p;
  p.iteration = i;
  p.coords = t * gt.coords + (1.0 - t) * z0_coords + schedule.sigma * eps_coords;
  p.rots = t * gt.rots + (1.0 - t) * z0_rots + schedule.sigma * eps_rots;
  return p;
}

double pairing_cost(const std::vector<Matrix>& noise, const std::vector<Matrix>& gt, const std::vector<int>& target) {
  double cost = 0.0;
  for (std::size_t b = 0; b < noise.size(); ++b) cost += (noise[b] - gt[target[b]]).squaredNorm();
  return cost;
}

Assignment ot_pair(const std::vector<Matrix>& noise, const std::vector<Matrix>& gt) {
  if (noise.size() != gt.size()) throw ShapeError("ot_pair needs equal batch sizes");
  const int n = static_cast<int>(noise.size());
  Assignment out;
  if (n == 0) return out;
  for (int b = 0; b < n; ++b) check_like(noise[b], gt[0], "ot_pair sample");
  for (int b = 0; b < n; ++b) check_like(gt[b], gt[0], "ot_pair sample");

  std::vector<std::vector<double>> c(n, std::vector<double>(n));
  for (int r = 0; r < n; ++r) {
    for (int k = 0; k < n; ++k) c[r][k] = (noise[r] - gt[k]).squaredNorm();
  }

  // Hungarian method with row/column potentials, 1-based.
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<int> p(n + 1, 0), way(n + 1, 0);
  for (int r = 1; r <= n; ++r) {
    p[0] = r;
    int j0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      const int i0 = p[j0];
      double delta = inf;
      int j1 = 0;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = c[i0 - 1][j - 1] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }

  out.target.assign(n, 0);
  for (int j = 1; j <= n; ++j) out.target[p[j] - 1] = j - 1;
  out.cost = pairing_cost(noise, gt, out.target);
  return out;
}

IterJointEmbedding embeddings(int i, int num_joints) {
  if (i < 0) throw ShapeError("iteration index must be >= 0");
  if (num_joints < 1) throw ShapeError("embeddings need at least one joint");
  IterJointEmbedding e;
  e.e_i.resize(num_joints, 3);
  e.e_J.resize(num_joints, 3);
  const double di = i;
  for (int j = 0; j < num_joints; ++j) {
    const double dj = j;
    e.e_i.row(j) << di, std::sin(di), std::cos(di);
    e.e_J.row(j) << dj, std::sin(dj), std::cos(dj);
  }
  return e;
}

Matrix standard_normal(int rows, int cols, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Matrix m(rows, cols);
  for (Eigen::Index k = 0; k < m.size(); ++k) m.data()[k] = n(rng);
  return m;
}

PoseFrame sample_dm(PoseDenoiser& denoiser, const DmSchedule& schedule, std::mt19937_64& rng, bool two_pass) {
  schedule.validate();
  const int J = denoiser.num_joints();
  const int I = schedule.iterations;
  const auto& ab = schedule.alpha_bar;

  // x_{i-1} from x_i and the clean prediction.
  auto step = [&](const Matrix& x, const Matrix& pred, int i) {
    const double a_i = ab[i], a_prev = ab[i - 1];
    const Matrix eps_hat = (x - std::sqrt(a_i) * pred) / std::sqrt(1.0 - a_i);
    const double var = (1.0 - a_prev) * (a_prev - a_i) / (a_prev * (1.0 - a_i));
    const double dir = std::sqrt(std::max(0.0, 1.0 - a_prev - var));
    Matrix next = std::sqrt(a_prev) * pred + dir * eps_hat + std::sqrt(var) * standard_normal(
        static_cast<int>(x.rows()), static_cast<int>(x.cols()), rng);
    check_finite(next, "sample", i);
    return next;
  };

  Matrix xj = standard_normal(J, kCoordDims, rng);
  Matrix xr = standard_normal(J, kRotDims, rng);
  PoseFrame out;
  if (!two_pass) {
    for (int i = I; i >= 1; --i) {
      Matrix jp = denoiser.predict_coords(xj, i);
      check_finite(jp, "coordinate prediction", i);
      Matrix rp = denoiser.predict_rots(xr, jp, i);
      check_finite(rp, "rotation prediction", i);
      if (i == 1) return {std::move(jp), std::move(rp)};
      xj = step(xj, jp, i);
      xr = step(xr, rp, i);
    }
    return out;
  }

  std::vector<Matrix> coord_preds(I + 1);
  for (int i = I; i >= 1; --i) {
    coord_preds[i] = denoiser.predict_coords(xj, i);
    check_finite(coord_preds[i], "coordinate prediction", i);
    if (i > 1) xj = step(xj, coord_preds[i], i);
  }
  for (int i = I; i >= 1; --i) {
    Matrix rp = denoiser.predict_rots(xr, coord_preds[i], i);
    check_finite(rp, "rotation prediction", i);
    if (i == 1) return {coord_preds[1], std::move(rp)};
    xr = step(xr, rp, i);
  }
  return out;
}

PoseFrame sample_cfm(PoseDenoiser& denoiser, const CfmSchedule& schedule, std::mt19937_64& rng, bool two_pass) {
  schedule.validate();
  const int J = denoiser.num_joints();
  const int I = schedule.iterations;

  auto step = [&](const Matrix& z0, const Matrix& pred, int i) {
    const double t = static_cast<double>(i + 1) / I;
    Matrix next = t * pred + (1.0 - t) * z0;
    if (schedule.sigma > 0.0) {
      next += schedule.sigma * standard_normal(static_cast<int>(z0.rows()), static_cast<int>(z0.cols()), rng);
    }
    check_finite(next, "sample", i);
    return next;
  };

  const Matrix zj = standard_normal(J, kCoordDims, rng);
  const Matrix zr = standard_normal(J, kRotDims, rng);
  Matrix xj = zj, xr = zr;
  if (!two_pass) {
    for (int i = 0; i <= I; ++i) {
      Matrix jp = denoiser.predict_coords(xj, i);
      check_finite(jp, "coordinate prediction", i);
      Matrix rp = denoiser.predict_rots(xr, jp, i);
      check_finite(rp, "rotation prediction", i);
      if (i == I) return {std::move(jp), std::move(rp)};
      xj = step(zj, jp, i);
      xr = step(zr, rp, i);
    }
    return {};
  }

  std::vector<Matrix> coord_preds(I + 1);
  for (int i = 0; i <= I; ++i) {
    coord_preds[i] = denoiser.predict_coords(xj, i);
    check_finite(coord_preds[i], "coordinate prediction", i);
    if (i < I) xj = step(zj, coord_preds[i], i);
  }
  for (int i = 0; i <= I; ++i) {
    Matrix rp = denoiser.predict_rots(xr, coord_preds[i], i);
    check_finite(rp, "rotation prediction", i);
    if (i == I) return {coord_preds[I], std::move(rp)};
    xr = step(zr, rp, i);
  }
  return {};
}

}  // namespace p2p
