#include "cyin/nn.hpp"

#include <cmath>

#include "cyin/errors.hpp"

namespace cyin::nn {

Matrix round_to_float(Matrix m) {
  for (Index i = 0; i < m.size(); ++i) {
    m.data()[i] = static_cast<double>(static_cast<float>(m.data()[i]));
  }
  return m;
}

Matrix glorot(Index fan_in, Index fan_out, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  Matrix w(fan_in, fan_out);
  for (Index j = 0; j < fan_out; ++j)
    for (Index i = 0; i < fan_in; ++i) w(i, j) = (2.0 * rng.uniform() - 1.0) * limit;
  return round_to_float(std::move(w));
}

Var activate(const Var& x, Activation act) {
  switch (act) {
    case Activation::Relu:
      return ag::relu(x);
    case Activation::Tanh:
      return ag::tanh(x);
    case Activation::Identity:
      break;
  }
  return x;
}

Linear::Linear(Index in, Index out, Rng& rng)
    : weight(ag::leaf(glorot(in, out, rng))), bias(ag::leaf(Matrix::Zero(1, out))) {}

Var Linear::operator()(const Var& x) const {
  if (x.cols() != weight.rows()) {
    throw DimensionError("linear layer expects " + std::to_string(weight.rows()) +
                         " input channels, got " + std::to_string(x.cols()));
  }
  return ag::add_row(ag::matmul(x, weight), bias);
}

void Linear::collect(ParamList& out, const std::string& prefix, ParamGroup group) const {
  out.push_back({prefix + ".weight", weight, group});
  out.push_back({prefix + ".bias", bias, group});
}

void Linear::set_zero() {
  weight.mutable_value().setZero();
  bias.mutable_value().setZero();
}

Mlp::Mlp(const std::vector<Index>& dims, Activation hidden, Rng& rng)
    : hidden_activation(hidden) {
  if (dims.size() < 2) throw ConfigError("mlp needs at least input and output dims");
  for (std::size_t i = 0; i + 1 < dims.size(); ++i) layers.emplace_back(dims[i], dims[i + 1], rng);
}

Var Mlp::operator()(const Var& x) const {
  Var h = x;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    h = layers[i](h);
    if (i + 1 < layers.size()) h = activate(h, hidden_activation);
  }
  return h;
}

void Mlp::collect(ParamList& out, const std::string& prefix, ParamGroup group) const {
  for (std::size_t i = 0; i < layers.size(); ++i)
    layers[i].collect(out, prefix + "." + std::to_string(i), group);
}

LayerNormParams::LayerNormParams(Index dim)
    : gain(ag::leaf(Matrix::Ones(1, dim))), bias(ag::leaf(Matrix::Zero(1, dim))) {}

Var LayerNormParams::operator()(const Var& x) const { return ag::layer_norm(x, gain, bias); }

void LayerNormParams::collect(ParamList& out, const std::string& prefix,
                              ParamGroup group) const {
  out.push_back({prefix + ".gain", gain, group});
  out.push_back({prefix + ".bias", bias, group});
}

void zero_grads(const ParamList& params) {
  for (const auto& p : params) {
    Var v = p.var;
    v.zero_grad();
  }
}

}  // namespace cyin::nn
