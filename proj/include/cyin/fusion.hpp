#pragma once

// Pairwise cross-modal attention fusion and the prediction head.

#include <span>
#include <string>
#include <utility>
#include <vector>

#include "cyin/autograd.hpp"
#include "cyin/batch.hpp"
#include "cyin/nn.hpp"
#include "cyin/rng.hpp"

namespace cyin {

enum class Reduction { LastToken, Mean };
enum class NormPlacement { Literal, PostNorm };

std::string to_string(Reduction r);
Reduction parse_reduction(const std::string& text);
std::string to_string(NormPlacement p);
NormPlacement parse_norm(const std::string& text);

struct FusionConfig {
  int dim = 128;  // C_B
  int num_heads = 8;
  int num_layers = 2;
  int ff_hidden = 256;
  int head_hidden = 128;
  NormPlacement norm = NormPlacement::Literal;
  Reduction reduction = Reduction::LastToken;
  bool symmetric = false;

  int head_dim() const { return dim / num_heads; }
  void validate() const;
};

/// Fused pairs in output order: (0,1), (1,2), ..., (U-2,U-1), then the
/// remaining pairs lexicographically. Symmetric mode appends each pair
/// reversed right after it. The first index supplies the queries.
std::vector<std::pair<int, int>> fusion_pairs(int num_modalities, bool symmetric = false);

/// One multi-head cross-modal attention block.
class CrossModalLayer {
 public:
  CrossModalLayer() = default;
  CrossModalLayer(const FusionConfig& cfg, Rng& rng);

  /// query: (N*L) x C stream of the querying modality, kv: (N*L) x C.
  ag::Var operator()(const ag::Var& query, const ag::Var& kv, int seq_len) const;
  /// Concat-of-heads attention through W_o, before any residual.
  ag::Var attend(const ag::Var& query, const ag::Var& kv, int seq_len) const;

  nn::Linear& wq() { return wq_; }
  nn::Linear& wk() { return wk_; }
  nn::Linear& wv() { return wv_; }
  nn::Linear& wo() { return wo_; }
  nn::LayerNormParams& norm_a() { return norm_a_; }
  nn::LayerNormParams& norm_b() { return norm_b_; }
  nn::Mlp& feed_forward() { return ff_; }
  const FusionConfig& config() const { return cfg_; }
  void collect(nn::ParamList& out, const std::string& prefix) const;

 private:
  FusionConfig cfg_;
  nn::Linear wq_, wk_, wv_, wo_;
  nn::LayerNormParams norm_a_, norm_b_;
  nn::Mlp ff_;
};

ag::Var cross_modal_attention(const ag::Var& query, const ag::Var& kv,
                              const CrossModalLayer& layer, int seq_len);

/// R stacked layers for one ordered pair.
struct PairFusion {
  std::vector<CrossModalLayer> layers;

  PairFusion() = default;
  PairFusion(const FusionConfig& cfg, Rng& rng);
  void collect(nn::ParamList& out, const std::string& prefix) const;
};

/// M_R^{j,k} reduced to N x C.
ag::Var fuse_pair(const ag::Var& latent_j, const ag::Var& latent_k, const PairFusion& pair,
                  int seq_len, Reduction reduction);

class FusionHead {
 public:
  FusionHead() = default;
  FusionHead(int num_modalities, int out_dim, const FusionConfig& cfg, Rng& rng);

  /// latents[u]: (N*L) x C for every modality. Returns N x (pairs * C).
  ag::Var fuse_all(std::span<const ag::Var> latents, int seq_len) const;
  /// Regression: N x 1 score. Classification: N x V logits.
  ag::Var predict(const ag::Var& fused) const { return head_(fused); }
  ag::Var forward(std::span<const ag::Var> latents, int seq_len) const {
    return predict(fuse_all(latents, seq_len));
  }

  int num_modalities() const { return u_; }
  const std::vector<std::pair<int, int>>& pairs() const { return pairs_; }
  std::vector<PairFusion>& pair_fusions() { return fusions_; }
  nn::Mlp& head() { return head_; }
  const FusionConfig& config() const { return cfg_; }
  void collect(nn::ParamList& out, const std::string& prefix) const;

 private:
  int u_ = 0;
  FusionConfig cfg_;
  std::vector<std::pair<int, int>> pairs_;
  std::vector<PairFusion> fusions_;
  nn::Mlp head_;
};

/// Normalized class probabilities from logits (plain values).
Matrix class_probabilities(const Matrix& logits);

/// Mean |y - y_hat| for regression, mean cross-entropy for classification.
ag::Var task_loss(const ag::Var& output, const Labels& labels);

}  // namespace cyin
