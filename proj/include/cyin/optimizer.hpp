#pragma once

#include <map>
#include <string>

#include "cyin/nn.hpp"

namespace cyin {

using ag::Matrix;

struct AdamWConfig {
  double lr_encoder = 4e-5;
  double lr_other = 1e-3;
  double weight_decay = 1e-2;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Decoupled weight-decay Adam with one learning rate per parameter group.
/// Parameters without a gradient this step are left untouched (no decay and
/// no moment update).
class AdamW {
 public:
  AdamW(nn::ParamList params, AdamWConfig cfg);

  void step();
  void zero_grad();
  long steps() const { return t_; }

 private:
  struct Moments {
    Matrix m, v;
    long t = 0;
  };
  nn::ParamList params_;
  AdamWConfig cfg_;
  std::map<std::string, Moments> state_;
  long t_ = 0;
};

/// Global L2 norm over all present gradients.
double grad_norm(const nn::ParamList& params);
/// Rescales gradients so the global norm is at most max_norm; returns the
/// norm before clipping.
double clip_grad_norm(const nn::ParamList& params, double max_norm);

}  // namespace cyin
