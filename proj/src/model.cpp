#include "cyin/model.hpp"

#include <algorithm>

#include "cyin/errors.hpp"

namespace cyin {

DataShape DataShape::of(const DatasetSpec& spec) {
  return DataShape{spec.num_modalities, spec.seq_len, spec.feat_dims, spec.task, spec.num_classes};
}

std::vector<bool> token_rows(const std::vector<bool>& per_sample, int seq_len) {
  std::vector<bool> out;
  out.reserve(per_sample.size() * static_cast<std::size_t>(seq_len));
  for (bool b : per_sample) out.insert(out.end(), static_cast<std::size_t>(seq_len), b);
  return out;
}

CyinModel::CyinModel(const ExperimentConfig& config, const DataShape& shape)
    : config_(config), shape_(shape) {
  config_.fusion.dim = config_.ib.bottleneck_dim;
  config_.validate();
  const int u = shape.num_modalities;
  if (u < 2) throw ArityError("the model needs at least two modalities");
  if (static_cast<int>(shape.feat_dims.size()) != u)
    throw DimensionError("data shape lists " + std::to_string(shape.feat_dims.size()) +
                         " feature widths for " + std::to_string(u) + " modalities");
  if (shape.task == Task::Classification && shape.num_classes < 2)
    throw ValidationError("classification needs at least two classes");

  const int c_b = config_.ib.bottleneck_dim;
  const int c_u = config_.rep_dim;
  Rng enc_rng = Rng::substream(config_.seed, "init.encoders");
  Rng ib_rng = Rng::substream(config_.seed, "init.ib");
  Rng tr_rng = Rng::substream(config_.seed, "init.translators");
  Rng fu_rng = Rng::substream(config_.seed, "init.fusion");
  for (int m = 0; m < u; ++m) {
    encoders_.emplace_back(m, shape.feat_dims[m], c_u, config_.mixing, enc_rng);
    if (uses_informative_space())
      ib_.emplace_back(c_u, config_.ib, ib_rng);
    else
      projections_.emplace_back(c_u, c_b, ib_rng);
  }
  if (uses_informative_space()) {
    for (int i = 0; i < u * u; ++i) decoders_.emplace_back(c_b, config_.ib.hidden_dim, c_u, ib_rng);
    for (int m = 0; m < u; ++m)
      predictors_.emplace_back(c_b, config_.ib.hidden_dim, shape.output_dim(), ib_rng);
  }
  bank_ = TranslatorBank(u, c_b, config_.translation, tr_rng);
  fusion_ = FusionHead(u, shape.output_dim(), config_.fusion, fu_rng);
}

std::vector<UnimodalRepr> CyinModel::encode(const Batch& batch) const {
  if (batch.num_modalities() != num_modalities())
    throw ArityError("batch has " + std::to_string(batch.num_modalities()) +
                     " modalities, model expects " + std::to_string(num_modalities()));
  if (batch.seq_len != shape_.seq_len)
    throw DimensionError("batch sequence length " + std::to_string(batch.seq_len) +
                         " differs from the model's " + std::to_string(shape_.seq_len));
  std::vector<UnimodalRepr> out;
  for (int m = 0; m < num_modalities(); ++m)
    out.push_back(encoders_[m].encode(ag::constant(batch.inputs[m]), batch.seq_len));
  return out;
}

std::vector<BottleneckLatent> CyinModel::bottleneck(const std::vector<UnimodalRepr>& reprs,
                                                    Mode mode, Rng& rng) const {
  std::vector<BottleneckLatent> out;
  for (std::size_t m = 0; m < reprs.size(); ++m) {
    if (uses_informative_space()) {
      out.push_back(ib_[m].encode(reprs[m], mode, rng));
      continue;
    }
    BottleneckLatent b;
    b.mu = projections_[m](reprs[m].tokens);
    b.sample = b.mu;
    b.noise = Matrix::Zero(b.mu.rows(), b.mu.cols());
    b.modality_id = reprs[m].modality_id;
    b.seq_len = reprs[m].seq_len;
    out.push_back(b);
  }
  return out;
}

std::vector<ag::Var> CyinModel::substitute_translated(
    const std::vector<BottleneckLatent>& latents, const PresenceMask& mask) const {
  const int u = num_modalities();
  const int l = shape_.seq_len;
  std::vector<std::vector<bool>> present;
  for (int m = 0; m < u; ++m) present.push_back(token_rows(mask.column(m), l));

  std::vector<ag::Var> out;
  for (int m = 0; m < u; ++m) {
    const std::vector<bool>& here = present[m];
    if (std::all_of(here.begin(), here.end(), [](bool b) { return b; })) {
      out.push_back(latents[m].sample);
      continue;
    }
    const ag::Var zeros = ag::constant(Matrix::Zero(latents[m].sample.rows(), latents[m].sample.cols()));
    ag::Var combined;
    ag::Vector sources = ag::Vector::Zero(static_cast<ag::Index>(here.size()));
    for (int j = 0; j < u; ++j) {
      if (j == m) continue;
      // Rows where j is absent contribute nothing to the sum.
      ag::Var t = ag::where_rows(present[j], bank_.at(j, m).translate(latents[j].sample), zeros);
      combined = combined.defined() ? ag::add(combined, t) : t;
      for (std::size_t r = 0; r < here.size(); ++r) sources(static_cast<ag::Index>(r)) += present[j][r];
    }
    if (bank_.combine_mean()) {
      ag::Vector inv = sources.unaryExpr([](double c) { return c > 0 ? 1.0 / c : 0.0; });
      combined = ag::scale_rows(combined, inv);
    }
    out.push_back(ag::where_rows(here, latents[m].sample, combined));
  }
  return out;
}

std::vector<ag::Var> CyinModel::substitute_zero_input(const std::vector<BottleneckLatent>& latents,
                                                      const PresenceMask& mask, Mode mode,
                                                      Rng& rng) const {
  const int u = num_modalities();
  const int l = shape_.seq_len;
  std::vector<ag::Var> out;
  for (int m = 0; m < u; ++m) {
    const std::vector<bool> here = token_rows(mask.column(m), l);
    if (std::all_of(here.begin(), here.end(), [](bool b) { return b; })) {
      out.push_back(latents[m].sample);
      continue;
    }
    Matrix zero_in = Matrix::Zero(latents[m].sample.rows(), shape_.feat_dims[m]);
    std::vector<UnimodalRepr> r{encoders_[m].encode(ag::constant(zero_in), l)};
    ag::Var filler;
    if (uses_informative_space())
      filler = ib_[m].encode(r[0], mode, rng).sample;
    else
      filler = projections_[m](r[0].tokens);
    out.push_back(ag::where_rows(here, latents[m].sample, filler));
  }
  return out;
}

Matrix CyinModel::predict(const Batch& batch, const PresenceMask& mask) const {
  ag::NoGradGuard guard;
  Rng unused(0);
  const Batch masked = apply_mask(batch, mask);
  const auto latents = bottleneck(encode(masked), Mode::Eval, unused);
  const auto fused_in = config_.ablation == Ablation::NoTranslatedLatents
                            ? substitute_zero_input(latents, mask, Mode::Eval, unused)
                            : substitute_translated(latents, mask);
  return fusion_.forward(fused_in, batch.seq_len).value();
}

nn::ParamList CyinModel::parameters() const {
  nn::ParamList out;
  const int u = num_modalities();
  for (int m = 0; m < u; ++m) encoders_[m].collect(out, "encoder" + std::to_string(m));
  for (std::size_t m = 0; m < ib_.size(); ++m) ib_[m].collect(out, "ib" + std::to_string(m));
  for (std::size_t m = 0; m < projections_.size(); ++m)
    projections_[m].collect(out, "proj" + std::to_string(m));
  for (std::size_t i = 0; i < decoders_.size(); ++i)
    decoders_[i].collect(out, "ibdec" + std::to_string(i / u) + "to" + std::to_string(i % u));
  for (std::size_t m = 0; m < predictors_.size(); ++m)
    predictors_[m].collect(out, "label" + std::to_string(m));
  bank_.collect(out, "cra");
  fusion_.collect(out, "fusion");
  return out;
}

nn::ParamList CyinModel::translator_parameters() const {
  nn::ParamList out;
  bank_.collect(out, "cra");
  return out;
}

}  // namespace cyin
