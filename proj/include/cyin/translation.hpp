#pragma once

// Cascaded residual autoencoder (CRA) translators between bottleneck spaces.

#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "cyin/autograd.hpp"
#include "cyin/bottleneck.hpp"
#include "cyin/nn.hpp"
#include "cyin/rng.hpp"

namespace cyin {

struct TranslationConfig {
  int num_blocks = 8;
  std::vector<int> widths{64, 32, 16};
  /// Per ordered pair (source, target) overrides of num_blocks.
  std::map<std::pair<int, int>, int> pair_blocks;
  bool combine_mean = false;

  int blocks_for(int source, int target) const;
  void validate(int num_modalities) const;
};

/// One residual autoencoder: C_B down through `widths`, mirrored back up to
/// C_B, ReLU between layers and a linear output.
class RABlock {
 public:
  RABlock() = default;
  RABlock(int dim, const std::vector<int>& widths, Rng& rng);

  ag::Var operator()(const ag::Var& x) const { return mlp_(x); }
  nn::Mlp& mlp() { return mlp_; }
  const nn::Mlp& mlp() const { return mlp_; }

 private:
  nn::Mlp mlp_;
};

class CRATranslator {
 public:
  CRATranslator() = default;
  CRATranslator(int source_id, int target_id, int dim, int num_blocks,
                const std::vector<int>& widths, Rng& rng);

  /// r_1 = RA_1(B), r_i = RA_i(B + r_1 + ... + r_{i-1}); returns r_n.
  ag::Var translate(const ag::Var& latent_tokens) const;

  int source_id() const { return source_; }
  int target_id() const { return target_; }
  int dim() const { return dim_; }
  std::vector<RABlock>& blocks() { return blocks_; }
  const std::vector<RABlock>& blocks() const { return blocks_; }
  void collect(nn::ParamList& out, const std::string& prefix) const;

 private:
  int source_ = 0;
  int target_ = 0;
  int dim_ = 0;
  std::vector<RABlock> blocks_;
};

ag::Var cra_translate(const CRATranslator& translator, const ag::Var& latent_tokens);

/// All U(U-1) ordered translators.
class TranslatorBank {
 public:
  TranslatorBank() = default;
  TranslatorBank(int num_modalities, int dim, const TranslationConfig& cfg, Rng& rng);

  const CRATranslator& at(int source, int target) const;
  CRATranslator& at(int source, int target);
  int num_modalities() const { return u_; }
  bool combine_mean() const { return mean_; }
  void collect(nn::ParamList& out, const std::string& prefix) const;

 private:
  std::size_t slot(int source, int target) const;

  int u_ = 0;
  bool mean_ = false;
  std::vector<CRATranslator> translators_;
};

/// Mean squared error against the target's sampled latent tokens.
ag::Var forward_rec_loss(const ag::Var& translated, const BottleneckLatent& target);

/// MSE between B_S and reverse(forward(B_S)); the pair must be mutually inverse.
ag::Var reverse_cyc_loss(const CRATranslator& forward, const CRATranslator& reverse,
                         const BottleneckLatent& source);

/// Sum (or mean, when requested) of the translations of every remained
/// latent into the missing modality.
ag::Var combine_translations(const TranslatorBank& bank,
                             std::span<const BottleneckLatent> remained, int missing_id);
ag::Var combine_translations(const TranslatorBank& bank,
                             std::span<const BottleneckLatent> remained, int missing_id,
                             bool mean);

struct TranslationLoss {
  ag::Var total;  // rec + cyc
  ag::Var rec;    // mean over ordered pairs
  ag::Var cyc;
};

/// latents[u] must hold modality u for every u.
TranslationLoss translation_loss(std::span<const BottleneckLatent> latents,
                                 const TranslatorBank& bank);

}  // namespace cyin
