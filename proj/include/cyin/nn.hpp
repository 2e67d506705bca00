#pragma once

#include <string>
#include <utility>
#include <vector>

#include "cyin/autograd.hpp"
#include "cyin/rng.hpp"

namespace cyin::nn {

using ag::Index;
using ag::Matrix;
using ag::Var;

/// Parameter group used by the optimizer for separate learning rates.
enum class ParamGroup { Encoder, Other };

struct NamedParam {
  std::string name;
  Var var;
  ParamGroup group = ParamGroup::Other;
};

using ParamList = std::vector<NamedParam>;

/// Rounds every entry to the nearest IEEE-754 single value, so parameters
/// survive the f32 checkpoint format unchanged.
Matrix round_to_float(Matrix m);

/// Glorot-uniform initialization.
Matrix glorot(Index fan_in, Index fan_out, Rng& rng);

enum class Activation { Identity, Relu, Tanh };

Var activate(const Var& x, Activation act);

/// Per-row affine map: y = x W + b.
struct Linear {
  Var weight;  // in x out
  Var bias;    // 1 x out

  Linear() = default;
  Linear(Index in, Index out, Rng& rng);

  Var operator()(const Var& x) const;
  Index in_dim() const { return weight.rows(); }
  Index out_dim() const { return weight.cols(); }
  void collect(ParamList& out, const std::string& prefix,
               ParamGroup group = ParamGroup::Other) const;
  void set_zero();
};

/// Stack of Linear layers with an activation between layers (not after the
/// last one).
struct Mlp {
  std::vector<Linear> layers;
  Activation hidden_activation = Activation::Relu;

  Mlp() = default;
  Mlp(const std::vector<Index>& dims, Activation hidden, Rng& rng);

  Var operator()(const Var& x) const;
  Index in_dim() const { return layers.front().in_dim(); }
  Index out_dim() const { return layers.back().out_dim(); }
  void collect(ParamList& out, const std::string& prefix,
               ParamGroup group = ParamGroup::Other) const;
};

struct LayerNormParams {
  Var gain;
  Var bias;

  LayerNormParams() = default;
  explicit LayerNormParams(Index dim);

  Var operator()(const Var& x) const;
  void collect(ParamList& out, const std::string& prefix,
               ParamGroup group = ParamGroup::Other) const;
};

void zero_grads(const ParamList& params);

}  // namespace cyin::nn
