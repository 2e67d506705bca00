#pragma once

#include <span>
#include <vector>

#include "cyin/autograd.hpp"
#include "cyin/data_synth.hpp"

namespace cyin {

/// Regression scores or class indices of a minibatch.
struct Labels {
  Task task = Task::Regression;
  Vector values;  // N; class index stored as a double for classification
  int num_classes = 0;

  ag::Index size() const { return values.size(); }
  /// N x V indicator matrix (classification only).
  Matrix one_hot() const;
};

/// Minibatch with one (N*L) x C_u input matrix per modality, sample-major.
struct Batch {
  int seq_len = 1;
  std::vector<Matrix> inputs;
  Labels labels;

  int num_modalities() const { return static_cast<int>(inputs.size()); }
  ag::Index size() const { return labels.size(); }
};

Batch make_batch(const Dataset& data, std::span<const std::size_t> indices);
Batch make_batch(const Dataset& data);

}  // namespace cyin
