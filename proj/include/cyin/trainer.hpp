#pragma once

// Objective assembly, the two-stage training schedule, protocol evaluation
// and checkpoints.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"

#include "cyin/config.hpp"
#include "cyin/data_synth.hpp"
#include "cyin/metrics.hpp"
#include "cyin/model.hpp"
#include "cyin/protocols.hpp"

namespace cyin {

/// Scalar loss components of one step. Components inactive under the
/// current stage or ablation are nullopt and count as zero.
struct LossBundle {
  double task = 0.0;
  double task_complete = 0.0;
  double task_masked = 0.0;
  std::optional<double> tib;
  std::optional<double> lib;
  std::optional<double> rec;
  std::optional<double> cyc;
  double total = 0.0;
  double beta = 1.0;
  double gamma = 0.0;

  /// task + (tib + lib) / beta + gamma * (rec + cyc).
  double recombined() const;
  nlohmann::json to_json() const;
};

struct LossResult {
  ag::Var total;
  LossBundle bundle;
};

/// One objective evaluation. `gamma` overrides the configured value (stage 1
/// passes 0). The mask drives the masked view; an all-present mask makes the
/// masked view identical to the complete one.
LossResult total_loss(const CyinModel& model, const Batch& batch, const PresenceMask& mask,
                      double gamma, Rng& rng);

struct StepRecord {
  long step = 0;
  int epoch = 0;
  int stage = 1;
  double missing_rate = 0.0;
  double grad_norm = 0.0;
  LossBundle losses;

  nlohmann::json to_json() const;
};

struct TrainResult {
  std::vector<StepRecord> steps;
  /// Mean total loss over the steps of each epoch.
  std::vector<double> epoch_loss;
};

struct TrainOptions {
  /// Called after every optimizer step; may be empty.
  std::function<void(const StepRecord&, const CyinModel&)> on_step;
  /// JSON-lines sink for the step log; may be null.
  std::ostream* log = nullptr;
};

/// Thrown when a loss component turns non-finite.
TrainResult train(CyinModel& model, const Dataset& data, const TrainOptions& options = {});

struct TranslatorFit {
  double initial = 0.0;  // full-data loss before the first step
  double final = 0.0;    // full-data loss after the last step
  std::vector<double> history;  // minibatch loss of every step
};

/// Fits only the translators on frozen mean latents, minimizing the mean
/// forward reconstruction loss over ordered pairs with Adam.
TranslatorFit fit_translators(CyinModel& model, const Dataset& data, int steps, double lr,
                              int batch_size, std::uint64_t seed);

/// Mean forward reconstruction loss over ordered pairs on mean latents.
double translator_rec_loss(const CyinModel& model, const Batch& batch);

/// Predictions under a protocol: regression scores or argmax classes.
std::vector<double> predict_protocol(const CyinModel& model, const Dataset& data,
                                     const Protocol& protocol, std::uint64_t mask_seed);

MetricReport evaluate(const CyinModel& model, const Dataset& data, const Protocol& protocol,
                      std::uint64_t mask_seed = 0);

/// Splits the dataset into (train, test) with the configured test fraction;
/// the test part is the tail, so the split is deterministic.
std::pair<Dataset, Dataset> train_test_split(const Dataset& data, double test_fraction);

struct LoadedModel {
  ExperimentConfig config;
  DatasetSpec data_spec;
  std::optional<CyinModel> model;
};

inline constexpr std::uint16_t kCheckpointVersion = 1;

void save_checkpoint(const CyinModel& model, const DatasetSpec& data_spec,
                     const std::filesystem::path& path);
/// Reads a checkpoint and rebuilds the model from its embedded config.
LoadedModel load_checkpoint(const std::filesystem::path& path);
/// As above, and throws IncompatibleCheckpointError unless the embedded
/// config hash equals expected.hash().
LoadedModel load_checkpoint(const std::filesystem::path& path, const ExperimentConfig& expected);

}  // namespace cyin
