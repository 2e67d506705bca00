#pragma once

// Experiment configuration: a sectioned key = value text file.
//
//   # comment
//   [model]
//   bottleneck_dim = 128
//   ra_widths = 64, 32, 16
//   [train]
//   epochs = 50
//
// Unknown sections or keys are rejected. Lists are comma separated, except
// eval.protocols which is separated by ';' because fixed protocols contain
// commas.

#include <cstdint>
#include <string>
#include <vector>

#include "cyin/bottleneck.hpp"
#include "cyin/encoders.hpp"
#include "cyin/fusion.hpp"
#include "cyin/translation.hpp"

namespace cyin {

enum class Ablation {
  Full,
  NoTib,
  NoLib,
  NoCyclicInteraction,
  NoCyclicTranslation,
  NoInformativeSpace,
  NoTranslatedLatents,
};

std::string to_string(Ablation a);
Ablation parse_ablation(const std::string& text);
/// Display order used by the report tables.
const std::vector<Ablation>& all_ablations();

struct ExperimentConfig {
  // [model]
  int rep_dim = 256;  // C_U
  MixingKind mixing = MixingKind::Attention;
  IBConfig ib{128, 256, 16.0};  // C_B, C_ib, beta
  TranslationConfig translation;
  FusionConfig fusion;  // fusion.dim follows ib.bottleneck_dim

  // [loss]
  double gamma = 10.0;
  Ablation ablation = Ablation::Full;

  // [train]
  int epochs = 50;
  int batch_size = 128;
  double lr_encoder = 4e-5;
  double lr_other = 1e-3;
  double weight_decay = 1e-2;
  double clip_norm = 1.0;
  std::string optimizer = "adamw";
  double stage_split = 0.1;
  std::vector<double> curriculum{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7};
  std::uint64_t seed = 0;

  // [eval]
  std::vector<std::string> protocols{"complete"};
  double test_fraction = 0.2;

  double beta() const { return ib.beta; }
  int stage1_epochs() const;

  void validate() const;
  /// Canonical text; parse(to_text()) reproduces the config exactly.
  std::string to_text() const;
  static ExperimentConfig parse(const std::string& text);
  static ExperimentConfig load(const std::string& path);
  /// FNV-1a of the canonical text.
  std::uint64_t hash() const;
};

}  // namespace cyin
