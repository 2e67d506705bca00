#pragma once

// Synthetic correlated multimodal datasets with a known linear-Gaussian
// generative model, a closed-form Bayes regression oracle for it, and the
// binary dataset container used to exchange precomputed features.

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace cyin {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class Task : std::uint8_t { Regression = 0, Classification = 1 };

std::string to_string(Task task);
Task parse_task(const std::string& text);

struct DatasetSpec {
  int num_modalities = 3;
  int seq_len = 4;
  std::vector<int> feat_dims{8, 8, 8};
  int latent_dim = 4;
  Task task = Task::Regression;
  int num_classes = 0;
  double noise_scale = 0.1;
  int distractor_dim = 0;
  std::size_t num_samples = 500;
  std::uint64_t seed = 0;

  /// Throws ValidationError naming the first violated invariant.
  void validate() const;

  /// key=value lines, one field per line.
  std::string to_metadata() const;
  static DatasetSpec from_metadata(const std::string& text);
};

struct MultimodalSample {
  std::vector<Matrix> modalities;  // each seq_len x feat_dims[u]
  double label = 0.0;              // score in [-3, 3] or class index
  std::size_t sample_id = 0;

  int class_label() const { return static_cast<int>(label); }
};

struct Dataset {
  DatasetSpec spec;
  std::vector<MultimodalSample> samples;
};

/// Fixed maps of the generative model, derived from the spec seed.
struct GeneratorParams {
  std::vector<Matrix> loadings;             // per modality: C_u x d
  std::vector<Matrix> distractor_loadings;  // per modality: C_u x distractor_dim
  Vector label_weights;                     // d
  Matrix class_map;                         // V x d (classification)
  double noise_scale = 0.0;
};

GeneratorParams make_generator_params(const DatasetSpec& spec);

/// Pure function of spec (seed included).
std::vector<MultimodalSample> generate_dataset(const DatasetSpec& spec);
Dataset generate(const DatasetSpec& spec);

/// Posterior-mean regression oracle under the generating model. Gains are
/// cached per observed-modality pattern.
class RegressionOracle {
 public:
  RegressionOracle(DatasetSpec spec, GeneratorParams params);

  /// observed[u] selects which modalities condition the posterior; empty
  /// means all.
  double predict(const MultimodalSample& sample, std::span<const bool> observed = {});

  /// Posterior mean and variance of the latent projection w^T z.
  std::pair<double, double> projection_posterior(const MultimodalSample& sample,
                                                 std::span<const bool> observed = {});

 private:
  struct Gain {
    Matrix gain;        // d x obs_dim
    Matrix covariance;  // d x d
  };
  const Gain& gain_for(const std::vector<bool>& observed);

  DatasetSpec spec_;
  GeneratorParams params_;
  std::map<std::vector<bool>, Gain> cache_;
};

double bayes_oracle_regression(const MultimodalSample& sample, const DatasetSpec& spec,
                               const GeneratorParams& params,
                               std::span<const bool> observed = {});

/// E[clamp(t, lo, hi)] for t ~ N(mean, var).
double clamped_gaussian_mean(double mean, double var, double lo, double hi);

void write_dataset(const Dataset& data, const std::filesystem::path& path);
/// Also writes the key=value sidecar at path + ".meta".
void write_dataset_with_metadata(const Dataset& data, const std::filesystem::path& path);
/// Reads the binary container; spec fields absent from the binary header are
/// filled from the sidecar when present.
Dataset read_dataset(const std::filesystem::path& path);

std::filesystem::path metadata_path(const std::filesystem::path& dataset_path);

/// Samples [begin, end) as a new dataset sharing the spec.
Dataset subset(const Dataset& data, std::size_t begin, std::size_t end);

}  // namespace cyin
