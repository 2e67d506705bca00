#pragma once

// Gaussian information-bottleneck machinery: per-token IB encoders with the
// reparameterized sample, the closed-form KL to a standard normal prior,
// token-level IB with cyclic source/target interaction, and label-level IB
// on token-pooled latents.

#include <span>
#include <string>
#include <vector>

#include "cyin/autograd.hpp"
#include "cyin/batch.hpp"
#include "cyin/encoders.hpp"
#include "cyin/nn.hpp"
#include "cyin/rng.hpp"

namespace cyin {

enum class Mode { Train, Eval };

inline constexpr double kSigmaFloor = 1e-4;

struct IBConfig {
  int bottleneck_dim = 128;
  int hidden_dim = 256;
  double beta = 16.0;

  void validate() const;
};

/// Per-token Gaussian latent. All matrices are (N*L) x C_B.
struct BottleneckLatent {
  ag::Var mu;
  ag::Var sigma;
  ag::Var sample;
  ag::Matrix noise;  // standard-normal draw used for sample (zeros in eval)
  int modality_id = 0;
  int seq_len = 1;
};

/// sample = mu + sigma * z with fresh z in training, sample = mu in eval.
BottleneckLatent reparameterize(const ag::Var& mu, const ag::Var& sigma, Mode mode, Rng& rng,
                                int modality_id = 0, int seq_len = 1);

/// Maps unimodal tokens to (mu, sigma); sigma = softplus(pre) + kSigmaFloor.
class IBEncoder {
 public:
  IBEncoder() = default;
  IBEncoder(int rep_dim, const IBConfig& cfg, Rng& rng);

  BottleneckLatent encode(const UnimodalRepr& repr, Mode mode, Rng& rng) const;

  nn::Linear& hidden() { return hidden_; }
  nn::Linear& mu_head() { return mu_head_; }
  nn::Linear& sigma_head() { return sigma_head_; }
  void collect(nn::ParamList& out, const std::string& prefix) const;

 private:
  nn::Linear hidden_;
  nn::Linear mu_head_;
  nn::Linear sigma_head_;
};

/// D_{S->T}: bottleneck tokens back to a target modality's representation.
class IBDecoder {
 public:
  IBDecoder() = default;
  IBDecoder(int bottleneck_dim, int hidden_dim, int rep_dim, Rng& rng);

  ag::Var decode(const ag::Var& latent_tokens) const { return mlp_(latent_tokens); }
  nn::Mlp& mlp() { return mlp_; }
  void collect(nn::ParamList& out, const std::string& prefix) const;

 private:
  nn::Mlp mlp_;
};

/// P_S: pooled latent to a score (regression) or class logits.
class LabelPredictor {
 public:
  LabelPredictor() = default;
  LabelPredictor(int bottleneck_dim, int hidden_dim, int out_dim, Rng& rng);

  /// Raw output: N x 1 score or N x V logits.
  ag::Var forward(const ag::Var& latent) const { return mlp_(latent); }
  nn::Mlp& mlp() { return mlp_; }
  void collect(nn::ParamList& out, const std::string& prefix) const;

 private:
  nn::Mlp mlp_;
};

/// Mean over rows of sum over channels of -1/2 (log s^2 + 1 - m^2 - s^2).
/// Throws DomainError unless sigma > 0 everywhere.
ag::Var gaussian_kl(const ag::Var& mu, const ag::Var& sigma);
double gaussian_kl(const ag::Matrix& mu, const ag::Matrix& sigma);

/// KL and likelihood parts of one IB objective; total = kl + beta * likelihood.
struct IBTerms {
  ag::Var kl;
  ag::Var likelihood;

  ag::Var total(double beta) const { return ag::add(kl, ag::scale(likelihood, beta)); }
};

/// Token-level IB S -> T: KL of the source tokens plus the mean squared
/// reconstruction of the target tokens from the sampled source latent.
IBTerms token_ib_terms(const BottleneckLatent& source, const UnimodalRepr& target,
                       const IBDecoder& decoder);
ag::Var token_ib_loss(const BottleneckLatent& source, const UnimodalRepr& target,
                      const IBDecoder& decoder, double beta);

/// decoders[s * U + t] is D_{s->t}.
struct CyclicTokenIB {
  ag::Var loss;
  ag::Var self_terms;   // mean over S of L^{S->S}
  ag::Var cross_terms;  // mean over pairs {S,T} of (L^{S->T} + L^{T->S}) / 2
};

/// self-pairs plus, when include_cross, the symmetric cross-modal pairs.
CyclicTokenIB cyclic_token_ib(std::span<const BottleneckLatent> latents,
                              std::span<const UnimodalRepr> reprs,
                              std::span<const IBDecoder> decoders, double beta,
                              bool include_cross = true);
ag::Var cyclic_token_ib_loss(std::span<const BottleneckLatent> latents,
                             std::span<const UnimodalRepr> reprs,
                             std::span<const IBDecoder> decoders, double beta);

/// Token-pooled Gaussian summary, N x C_B: mean of means, root of mean variance.
struct PooledLatent {
  ag::Var mu;
  ag::Var sigma;
};

PooledLatent pool_label_latent(const BottleneckLatent& latent);

/// Mean over modalities of [KL(pooled) + beta * (|y - y_hat| or cross-entropy)],
/// each averaged over the batch.
ag::Var label_ib_loss(std::span<const PooledLatent> pooled, const Labels& labels,
                      std::span<const LabelPredictor> predictors, double beta, Mode mode,
                      Rng& rng);

}  // namespace cyin
