#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "p2p/autodiff.hpp"

namespace p2p::nn {

using ad::Var;

/// Ordered registry of trainable tensors. Order is registration order and
/// defines the flat checkpoint layout.
class ParamStore {
 public:
  Var create(const std::string& name, Matrix init);

  const std::vector<std::pair<std::string, Var>>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  Eigen::Index total_scalars() const;
  Var find(const std::string& name) const;

  void zero_grad();
  std::vector<double> flatten() const;
  void load_flat(const std::vector<double>& flat);

 private:
  std::vector<std::pair<std::string, Var>> entries_;
};

/// Xavier-uniform weights, zero bias.
struct Linear {
  Var weight;  // in x out
  Var bias;    // 1 x out

  Linear() = default;
  Linear(ParamStore& store, const std::string& name, int in, int out, std::mt19937_64& rng);
  Var operator()(const Var& x) const;
  int in_features() const { return static_cast<int>(weight.rows()); }
  int out_features() const { return static_cast<int>(weight.cols()); }
};

/// Linear layers with GELU between them (none after the last).
struct Mlp {
  std::vector<Linear> layers;

  Mlp() = default;
  Mlp(ParamStore& store, const std::string& name, const std::vector<int>& widths, std::mt19937_64& rng);
  Var operator()(Var x) const;
};

struct AdamWOptions {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 1e-4;
};

/// Adam with decoupled weight decay.
class AdamW {
 public:
  AdamW(const ParamStore& store, AdamWOptions options);
  void step();
  void set_lr(double lr) { options_.lr = lr; }
  double lr() const { return options_.lr; }

 private:
  const ParamStore& store_;
  AdamWOptions options_;
  std::vector<Matrix> m_, v_;
  long step_ = 0;
};

}  // namespace p2p::nn
