#include "cyin/batch.hpp"

#include <numeric>

#include "cyin/errors.hpp"

namespace cyin {

Matrix Labels::one_hot() const {
  if (task != Task::Classification) throw TaskMismatchError("one_hot needs classification labels");
  Matrix m = Matrix::Zero(values.size(), num_classes);
  for (ag::Index i = 0; i < values.size(); ++i) {
    const auto c = static_cast<ag::Index>(values(i));
    if (c < 0 || c >= num_classes)
      throw ValidationError("class label " + std::to_string(c) + " outside [0, " +
                            std::to_string(num_classes) + ")");
    m(i, c) = 1.0;
  }
  return m;
}

Batch make_batch(const Dataset& data, std::span<const std::size_t> indices) {
  const DatasetSpec& spec = data.spec;
  Batch b;
  b.seq_len = spec.seq_len;
  b.labels.task = spec.task;
  b.labels.num_classes = spec.num_classes;
  b.labels.values.resize(static_cast<ag::Index>(indices.size()));
  const auto n = static_cast<ag::Index>(indices.size());
  for (int u = 0; u < spec.num_modalities; ++u)
    b.inputs.emplace_back(n * spec.seq_len, spec.feat_dims[u]);
  for (ag::Index i = 0; i < n; ++i) {
    const MultimodalSample& s = data.samples.at(indices[static_cast<std::size_t>(i)]);
    if (static_cast<int>(s.modalities.size()) != spec.num_modalities)
      throw ValidationError("sample " + std::to_string(s.sample_id) +
                            " is missing modalities in storage");
    b.labels.values(i) = s.label;
    for (int u = 0; u < spec.num_modalities; ++u)
      b.inputs[u].middleRows(i * spec.seq_len, spec.seq_len) = s.modalities[u];
  }
  return b;
}

Batch make_batch(const Dataset& data) {
  std::vector<std::size_t> all(data.samples.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  return make_batch(data, all);
}

}  // namespace cyin
