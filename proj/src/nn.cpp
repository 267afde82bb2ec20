#include "p2p/nn.hpp"

#include <cmath>

#include "p2p/errors.hpp"

namespace p2p::nn {

Var ParamStore::create(const std::string& name, Matrix init) {
  for (const auto& [n, v] : entries_) {
    if (n == name) throw ShapeError("duplicate parameter name " + name);
  }
  Var v(std::move(init), true);
  entries_.emplace_back(name, v);
  return v;
}

Eigen::Index ParamStore::total_scalars() const {
  Eigen::Index n = 0;
  for (const auto& [name, v] : entries_) n += v.value().size();
  return n;
}

Var ParamStore::find(const std::string& name) const {
  for (const auto& [n, v] : entries_) {
    if (n == name) return v;
  }
  throw ShapeError("no parameter named " + name);
}

void ParamStore::zero_grad() {
  for (auto& [name, v] : entries_) v.zero_grad();
}

std::vector<double> ParamStore::flatten() const {
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(total_scalars()));
  for (const auto& [name, v] : entries_) out.insert(out.end(), v.value().data(), v.value().data() + v.value().size());
  return out;
}

void ParamStore::load_flat(const std::vector<double>& flat) {
  if (static_cast<Eigen::Index>(flat.size()) != total_scalars()) {
    throw ShapeError("parameter blob has " + std::to_string(flat.size()) + " values, model expects " +
                     std::to_string(total_scalars()));
  }
  std::size_t at = 0;
  for (auto& [name, v] : entries_) {
    Matrix& m = v.mutable_value();
    std::copy(flat.begin() + static_cast<std::ptrdiff_t>(at), flat.begin() + static_cast<std::ptrdiff_t>(at + m.size()),
              m.data());
    at += static_cast<std::size_t>(m.size());
  }
}

Linear::Linear(ParamStore& store, const std::string& name, int in, int out, std::mt19937_64& rng) {
  const double a = std::sqrt(6.0 / (in + out));
  std::uniform_real_distribution<double> u(-a, a);
  Matrix w(in, out);
  for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = u(rng);
  weight = store.create(name + ".weight", std::move(w));
  bias = store.create(name + ".bias", Matrix::Zero(1, out));
}

Var Linear::operator()(const Var& x) const { return ad::linear(x, weight, bias); }

Mlp::Mlp(ParamStore& store, const std::string& name, const std::vector<int>& widths, std::mt19937_64& rng) {
  if (widths.size() < 2) throw ShapeError("mlp needs at least input and output widths");
  for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
    layers.emplace_back(store, name + "." + std::to_string(i), widths[i], widths[i + 1], rng);
  }
}

Var Mlp::operator()(Var x) const {
  for (std::size_t i = 0; i < layers.size(); ++i) {
    x = layers[i](x);
    if (i + 1 < layers.size()) x = ad::gelu(x);
  }
  return x;
}

AdamW::AdamW(const ParamStore& store, AdamWOptions options) : store_(store), options_(options) {
  for (const auto& [name, v] : store.entries()) {
    m_.push_back(Matrix::Zero(v.rows(), v.cols()));
    v_.push_back(Matrix::Zero(v.rows(), v.cols()));
  }
}

void AdamW::step() {
  ++step_;
  const double bc1 = 1.0 - std::pow(options_.beta1, static_cast<double>(step_));
  const double bc2 = 1.0 - std::pow(options_.beta2, static_cast<double>(step_));
  std::size_t i = 0;
  for (const auto& [name, var] : store_.entries()) {
    Var p = var;
    Matrix& value = p.mutable_value();
    const Matrix& g = var.grad();
    if (g.size() == value.size()) {
      m_[i] = options_.beta1 * m_[i] + (1.0 - options_.beta1) * g;
      v_[i] = options_.beta2 * v_[i] + (1.0 - options_.beta2) * g.cwiseProduct(g);
    } else {
      m_[i] *= options_.beta1;
      v_[i] *= options_.beta2;
    }
    value *= (1.0 - options_.lr * options_.weight_decay);
    value.array() -= options_.lr * (m_[i].array() / bc1) / ((v_[i].array() / bc2).sqrt() + options_.eps);
    ++i;
  }
}

}  // namespace p2p::nn
