#include "cyin/fusion.hpp"

#include <cmath>

#include "cyin/errors.hpp"

namespace cyin {

std::string to_string(Reduction r) { return r == Reduction::LastToken ? "last" : "mean"; }

Reduction parse_reduction(const std::string& text) {
  if (text == "last") return Reduction::LastToken;
  if (text == "mean") return Reduction::Mean;
  throw ConfigError("unknown fusion reduction '" + text + "' (expected last|mean)");
}

std::string to_string(NormPlacement p) { return p == NormPlacement::Literal ? "literal" : "post"; }

NormPlacement parse_norm(const std::string& text) {
  if (text == "literal") return NormPlacement::Literal;
  if (text == "post") return NormPlacement::PostNorm;
  throw ConfigError("unknown fusion norm placement '" + text + "' (expected literal|post)");
}

void FusionConfig::validate() const {
  if (dim < 1 || num_heads < 1 || num_layers < 1 || ff_hidden < 1 || head_hidden < 1)
    throw ConfigError("fusion dimensions, heads and layers must be >= 1");
  if (dim % num_heads != 0)
    throw ConfigError("fusion dim " + std::to_string(dim) + " is not divisible by " +
                      std::to_string(num_heads) + " heads");
}

std::vector<std::pair<int, int>> fusion_pairs(int num_modalities, bool symmetric) {
  if (num_modalities < 2) throw ArityError("fusion needs at least two modalities");
  std::vector<std::pair<int, int>> base;
  for (int j = 0; j + 1 < num_modalities; ++j) base.emplace_back(j, j + 1);
  for (int j = 0; j < num_modalities; ++j)
    for (int k = j + 2; k < num_modalities; ++k) base.emplace_back(j, k);
  if (!symmetric) return base;
  std::vector<std::pair<int, int>> out;
  for (auto [j, k] : base) {
    out.emplace_back(j, k);
    out.emplace_back(k, j);
  }
  return out;
}

CrossModalLayer::CrossModalLayer(const FusionConfig& cfg, Rng& rng)
    : cfg_(cfg),
      wq_(cfg.dim, cfg.dim, rng),
      wk_(cfg.dim, cfg.dim, rng),
      wv_(cfg.dim, cfg.dim, rng),
      wo_(cfg.dim, cfg.dim, rng),
      norm_a_(cfg.dim),
      norm_b_(cfg.dim),
      ff_({cfg.dim, cfg.ff_hidden, cfg.dim}, nn::Activation::Relu, rng) {
  cfg.validate();
}

ag::Var CrossModalLayer::attend(const ag::Var& query, const ag::Var& kv, int seq_len) const {
  if (query.cols() != cfg_.dim || kv.cols() != cfg_.dim)
    throw DimensionError("cross-modal attention expects " + std::to_string(cfg_.dim) +
                         " channels, got " + std::to_string(query.cols()) + " and " +
                         std::to_string(kv.cols()));
  if (query.rows() != kv.rows())
    throw DimensionError("cross-modal attention: query and key/value token counts differ");
  const double scale = 1.0 / std::sqrt(static_cast<double>(cfg_.dim));
  ag::Var q = wq_(query), k = wk_(kv), v = wv_(kv);
  const int dh = cfg_.head_dim();
  std::vector<ag::Var> heads;
  for (int h = 0; h < cfg_.num_heads; ++h) {
    heads.push_back(ag::segment_attention(ag::slice_cols(q, h * dh, dh),
                                          ag::slice_cols(k, h * dh, dh),
                                          ag::slice_cols(v, h * dh, dh), seq_len, scale));
  }
  ag::Var cat = heads.size() == 1 ? heads.front() : ag::concat_cols(heads);
  return wo_(cat);
}

ag::Var CrossModalLayer::operator()(const ag::Var& query, const ag::Var& kv, int seq_len) const {
  ag::Var y = attend(query, kv, seq_len);
  if (cfg_.norm == NormPlacement::Literal) {
    ag::Var z = ag::add(y, norm_a_(query));
    ag::Var zn = norm_b_(z);
    return ag::add(ff_(zn), zn);
  }
  ag::Var z = norm_a_(ag::add(query, y));
  return norm_b_(ag::add(z, ff_(z)));
}

void CrossModalLayer::collect(nn::ParamList& out, const std::string& prefix) const {
  wq_.collect(out, prefix + ".wq");
  wk_.collect(out, prefix + ".wk");
  wv_.collect(out, prefix + ".wv");
  wo_.collect(out, prefix + ".wo");
  norm_a_.collect(out, prefix + ".norm_a");
  norm_b_.collect(out, prefix + ".norm_b");
  ff_.collect(out, prefix + ".ff");
}

ag::Var cross_modal_attention(const ag::Var& query, const ag::Var& kv,
                              const CrossModalLayer& layer, int seq_len) {
  return layer(query, kv, seq_len);
}

PairFusion::PairFusion(const FusionConfig& cfg, Rng& rng) {
  for (int r = 0; r < cfg.num_layers; ++r) layers.emplace_back(cfg, rng);
}

void PairFusion::collect(nn::ParamList& out, const std::string& prefix) const {
  for (std::size_t r = 0; r < layers.size(); ++r)
    layers[r].collect(out, prefix + ".layer" + std::to_string(r));
}

ag::Var fuse_pair(const ag::Var& latent_j, const ag::Var& latent_k, const PairFusion& pair,
                  int seq_len, Reduction reduction) {
  if (seq_len < 1 || latent_j.rows() % seq_len != 0)
    throw DimensionError("fuse_pair: token rows are not a multiple of L");
  ag::Var m = latent_j;
  for (const CrossModalLayer& layer : pair.layers) m = layer(m, latent_k, seq_len);
  if (reduction == Reduction::Mean) return ag::segment_mean(m, seq_len);
  const ag::Index n = m.rows() / seq_len;
  std::vector<ag::Index> last(static_cast<std::size_t>(n));
  for (ag::Index i = 0; i < n; ++i) last[static_cast<std::size_t>(i)] = i * seq_len + seq_len - 1;
  return ag::gather_rows(m, last);
}

FusionHead::FusionHead(int num_modalities, int out_dim, const FusionConfig& cfg, Rng& rng)
    : u_(num_modalities), cfg_(cfg), pairs_(fusion_pairs(num_modalities, cfg.symmetric)) {
  cfg.validate();
  for (std::size_t p = 0; p < pairs_.size(); ++p) fusions_.emplace_back(cfg, rng);
  const auto fused = static_cast<ag::Index>(pairs_.size()) * cfg.dim;
  head_ = nn::Mlp({fused, cfg.head_hidden, out_dim}, nn::Activation::Relu, rng);
}

ag::Var FusionHead::fuse_all(std::span<const ag::Var> latents, int seq_len) const {
  if (static_cast<int>(latents.size()) != u_)
    throw ArityError("fusion expects " + std::to_string(u_) + " latents, got " +
                     std::to_string(latents.size()));
  std::vector<ag::Var> parts;
  for (std::size_t p = 0; p < pairs_.size(); ++p) {
    const auto [j, k] = pairs_[p];
    parts.push_back(fuse_pair(latents[j], latents[k], fusions_[p], seq_len, cfg_.reduction));
  }
  return parts.size() == 1 ? parts.front() : ag::concat_cols(parts);
}

void FusionHead::collect(nn::ParamList& out, const std::string& prefix) const {
  for (std::size_t p = 0; p < pairs_.size(); ++p)
    fusions_[p].collect(out, prefix + ".pair" + std::to_string(pairs_[p].first) +
                                 std::to_string(pairs_[p].second));
  head_.collect(out, prefix + ".head");
}

Matrix class_probabilities(const Matrix& logits) {
  ag::NoGradGuard guard;
  return ag::softmax_rows(ag::constant(logits)).value();
}

ag::Var task_loss(const ag::Var& output, const Labels& labels) {
  if (output.rows() != labels.size())
    throw DimensionError("task loss: " + std::to_string(output.rows()) + " predictions for " +
                         std::to_string(labels.size()) + " labels");
  if (labels.task == Task::Regression) {
    if (output.cols() != 1)
      throw TaskMismatchError("regression loss needs one output column, got " +
                              std::to_string(output.cols()));
    return ag::mean(ag::abs(ag::sub(ag::constant(labels.values), output)));
  }
  if (output.cols() != labels.num_classes)
    throw TaskMismatchError("classification loss needs " + std::to_string(labels.num_classes) +
                            " logits, got " + std::to_string(output.cols()));
  ag::Var picked = ag::row_sum(ag::mul(ag::constant(labels.one_hot()), ag::log_softmax_rows(output)));
  return ag::scale(ag::mean(picked), -1.0);
}

}  // namespace cyin
