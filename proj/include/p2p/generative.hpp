#pragma once

#include <random>
#include <vector>

#include "p2p/pose.hpp"

namespace p2p {

/// Linear variance schedule. beta has I+1 entries; alpha_bar[i] is the
/// running product of (1 - beta[j]) for j <= i.
struct DmSchedule {
  int iterations = 20;
  std::vector<double> beta;
  std::vector<double> alpha;
  std::vector<double> alpha_bar;

  static DmSchedule linear(int iterations, double beta_start = 1e-4, double beta_end = 0.02);
  void validate() const;
};

struct CfmSchedule {
  int iterations = 20;
  double sigma = 0.01;
  void validate() const;
};

struct PerturbedPose {
  Matrix coords;  // J x 3
  Matrix rots;    // J x 6
  int iteration = 0;
};

/// sqrt(abar_i) * gt + sqrt(1 - abar_i) * noise, for coordinates and rotations
/// separately.
PerturbedPose perturb_dm(const PoseFrame& gt, int i, const DmSchedule& schedule, const Matrix& coord_noise,
                         const Matrix& rot_noise);

/// (i/I) * gt + (1 - i/I) * z0 + sigma * eps.
PerturbedPose perturb_cfm(const PoseFrame& gt, int i, const CfmSchedule& schedule, const Matrix& z0_coords,
                          const Matrix& z0_rots, const Matrix& eps_coords, const Matrix& eps_rots);

struct Assignment {
  std::vector<int> target;  // noise sample b is paired with gt sample target[b]
  double cost = 0.0;
};

/// Exact minimum-cost assignment under squared Euclidean distance between the
/// flattened samples (Hungarian algorithm, O(B^3)).
Assignment ot_pair(const std::vector<Matrix>& noise, const std::vector<Matrix>& gt);
double pairing_cost(const std::vector<Matrix>& noise, const std::vector<Matrix>& gt, const std::vector<int>& target);

struct IterJointEmbedding {
  Matrix e_i;  // J x 3, rows [i, sin i, cos i]
  Matrix e_J;  // J x 3, row j = [j, sin j, cos j]
};
IterJointEmbedding embeddings(int i, int num_joints);

/// What the samplers need from a trained model: clean-sample predictions for
/// the coordinate branch and, given those, for the rotation branch.
class PoseDenoiser {
 public:
  virtual ~PoseDenoiser() = default;
  virtual int num_joints() const = 0;
  virtual Matrix predict_coords(const Matrix& noisy_coords, int i) = 0;
  virtual Matrix predict_rots(const Matrix& noisy_rots, const Matrix& coords_pred, int i) = 0;
};

/// Returns ground truth regardless of input.
class OracleDenoiser final : public PoseDenoiser {
 public:
  explicit OracleDenoiser(PoseFrame gt) : gt_(std::move(gt)) {}
  int num_joints() const override { return gt_.num_joints(); }
  Matrix predict_coords(const Matrix&, int) override { return gt_.coords; }
  Matrix predict_rots(const Matrix&, const Matrix&, int) override { return gt_.rots; }

 private:
  PoseFrame gt_;
};

Matrix standard_normal(int rows, int cols, std::mt19937_64& rng);

/// DDIM-style reverse process from standard normal noise. With two_pass the
/// coordinate chain runs to completion before the rotation chain; step i of
/// the rotation chain conditions on the coordinate prediction made at step i.
PoseFrame sample_dm(PoseDenoiser& denoiser, const DmSchedule& schedule, std::mt19937_64& rng, bool two_pass = false);

/// Straight-path integration from a fixed standard normal endpoint.
PoseFrame sample_cfm(PoseDenoiser& denoiser, const CfmSchedule& schedule, std::mt19937_64& rng,
                     bool two_pass = false);

}  // namespace p2p
