#include "cyin/optimizer.hpp"

#include <cmath>

#include "cyin/errors.hpp"

namespace cyin {

AdamW::AdamW(nn::ParamList params, AdamWConfig cfg) : params_(std::move(params)), cfg_(cfg) {
  for (const auto& p : params_)
    if (!state_.emplace(p.name, Moments{}).second)
      throw ValidationError("duplicate parameter name " + p.name);
}

void AdamW::step() {
  ++t_;
  for (auto& p : params_) {
    if (!p.var.has_grad()) continue;
    Moments& s = state_[p.name];
    const Matrix& g = p.var.grad();
    if (s.t == 0) {
      s.m = Matrix::Zero(g.rows(), g.cols());
      s.v = Matrix::Zero(g.rows(), g.cols());
    }
    ++s.t;
    const double lr = p.group == nn::ParamGroup::Encoder ? cfg_.lr_encoder : cfg_.lr_other;
    s.m = cfg_.beta1 * s.m + (1.0 - cfg_.beta1) * g;
    s.v = cfg_.beta2 * s.v + (1.0 - cfg_.beta2) * g.cwiseProduct(g);
    const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(s.t));
    const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(s.t));
    Matrix& w = p.var.mutable_value();
    w *= 1.0 - lr * cfg_.weight_decay;
    w.array() -= lr * (s.m.array() / c1) / ((s.v.array() / c2).sqrt() + cfg_.eps);
  }
}

void AdamW::zero_grad() { nn::zero_grads(params_); }

double grad_norm(const nn::ParamList& params) {
  double sq = 0.0;
  for (const auto& p : params)
    if (p.var.has_grad()) sq += p.var.grad().squaredNorm();
  return std::sqrt(sq);
}

double clip_grad_norm(const nn::ParamList& params, double max_norm) {
  const double norm = grad_norm(params);
  if (norm > max_norm && std::isfinite(norm)) {
    const double s = max_norm / norm;
    for (const auto& p : params)
      if (p.var.has_grad()) p.var.node()->grad *= s;
  }
  return norm;
}

}  // namespace cyin
