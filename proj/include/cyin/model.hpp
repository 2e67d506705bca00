#pragma once

// The full network: per-modality encoders and IB encoders, the IB decoder
// grid, label predictors, the translator bank and the fusion head.

#include <vector>

#include "cyin/batch.hpp"
#include "cyin/bottleneck.hpp"
#include "cyin/config.hpp"
#include "cyin/encoders.hpp"
#include "cyin/fusion.hpp"
#include "cyin/nn.hpp"
#include "cyin/protocols.hpp"
#include "cyin/translation.hpp"

namespace cyin {

/// Shape of the data a model is built for.
struct DataShape {
  int num_modalities = 0;
  int seq_len = 1;
  std::vector<int> feat_dims;
  Task task = Task::Regression;
  int num_classes = 0;

  static DataShape of(const DatasetSpec& spec);
  int output_dim() const { return task == Task::Regression ? 1 : num_classes; }
};

class CyinModel {
 public:
  CyinModel(const ExperimentConfig& config, const DataShape& shape);
  CyinModel(const CyinModel&) = delete;  // parameters are shared graph nodes
  CyinModel& operator=(const CyinModel&) = delete;
  CyinModel(CyinModel&&) = default;
  CyinModel& operator=(CyinModel&&) = default;

  const ExperimentConfig& config() const { return config_; }
  const DataShape& shape() const { return shape_; }
  int num_modalities() const { return shape_.num_modalities; }
  bool uses_informative_space() const { return config_.ablation != Ablation::NoInformativeSpace; }

  std::vector<UnimodalRepr> encode(const Batch& batch) const;
  /// Latents feeding translation and fusion. Without the informative space
  /// the latent is a deterministic projection of the representation.
  std::vector<BottleneckLatent> bottleneck(const std::vector<UnimodalRepr>& reprs, Mode mode,
                                           Rng& rng) const;

  /// Replaces the latent of every missing (sample, modality) slot by the
  /// combination of translations from that sample's present modalities.
  std::vector<ag::Var> substitute_translated(const std::vector<BottleneckLatent>& latents,
                                             const PresenceMask& mask) const;
  /// Replaces missing slots with the latents of an all-zero input.
  std::vector<ag::Var> substitute_zero_input(const std::vector<BottleneckLatent>& latents,
                                             const PresenceMask& mask, Mode mode,
                                             Rng& rng) const;

  /// Deterministic (mean latent) prediction under a presence mask.
  /// Regression: N x 1 scores. Classification: N x V logits.
  Matrix predict(const Batch& batch, const PresenceMask& mask) const;

  std::vector<ModalityEncoder>& encoders() { return encoders_; }
  std::vector<IBEncoder>& ib_encoders() { return ib_; }
  const std::vector<IBDecoder>& ib_decoders() const { return decoders_; }
  const std::vector<LabelPredictor>& label_predictors() const { return predictors_; }
  TranslatorBank& translators() { return bank_; }
  const TranslatorBank& translators() const { return bank_; }
  FusionHead& fusion() { return fusion_; }
  const FusionHead& fusion() const { return fusion_; }

  /// Every parameter with a stable unique name, in a fixed order.
  nn::ParamList parameters() const;
  nn::ParamList translator_parameters() const;

 private:
  ExperimentConfig config_;
  DataShape shape_;
  std::vector<ModalityEncoder> encoders_;
  std::vector<IBEncoder> ib_;
  std::vector<nn::Linear> projections_;  // only without the informative space
  std::vector<IBDecoder> decoders_;      // [s * U + t]
  std::vector<LabelPredictor> predictors_;
  TranslatorBank bank_;
  FusionHead fusion_;
};

/// Expands per-sample flags to per-token-row flags.
std::vector<bool> token_rows(const std::vector<bool>& per_sample, int seq_len);

}  // namespace cyin
