#include "cyin/bottleneck.hpp"

#include <cmath>

#include "cyin/errors.hpp"

namespace cyin {

void IBConfig::validate() const {
  if (bottleneck_dim < 1) throw ConfigError("bottleneck_dim must be >= 1");
  if (hidden_dim < 1) throw ConfigError("ib hidden_dim must be >= 1");
  if (!(beta > 0.0)) throw ConfigError("beta must be > 0");
}

BottleneckLatent reparameterize(const ag::Var& mu, const ag::Var& sigma, Mode mode, Rng& rng,
                                int modality_id, int seq_len) {
  BottleneckLatent out;
  out.mu = mu;
  out.sigma = sigma;
  out.modality_id = modality_id;
  out.seq_len = seq_len;
  if (mode == Mode::Eval) {
    out.noise = ag::Matrix::Zero(mu.rows(), mu.cols());
    out.sample = mu;
    return out;
  }
  out.noise = rng.normal_matrix(mu.rows(), mu.cols());
  out.sample = ag::add(mu, ag::mul(sigma, ag::constant(out.noise)));
  return out;
}

IBEncoder::IBEncoder(int rep_dim, const IBConfig& cfg, Rng& rng)
    : hidden_(rep_dim, cfg.hidden_dim, rng),
      mu_head_(cfg.hidden_dim, cfg.bottleneck_dim, rng),
      sigma_head_(cfg.hidden_dim, cfg.bottleneck_dim, rng) {}

BottleneckLatent IBEncoder::encode(const UnimodalRepr& repr, Mode mode, Rng& rng) const {
  for (const auto* layer : {&hidden_, &mu_head_, &sigma_head_}) {
    if (!layer->weight.value().allFinite() || !layer->bias.value().allFinite())
      throw NumericalError("IB encoder for modality " + std::to_string(repr.modality_id) +
                           " has non-finite parameters");
  }
  ag::Var h = ag::relu(hidden_(repr.tokens));
  ag::Var mu = mu_head_(h);
  ag::Var sigma = ag::add_scalar(ag::softplus(sigma_head_(h)), kSigmaFloor);
  return reparameterize(mu, sigma, mode, rng, repr.modality_id, repr.seq_len);
}

void IBEncoder::collect(nn::ParamList& out, const std::string& prefix) const {
  hidden_.collect(out, prefix + ".hidden");
  mu_head_.collect(out, prefix + ".mu");
  sigma_head_.collect(out, prefix + ".sigma");
}

IBDecoder::IBDecoder(int bottleneck_dim, int hidden_dim, int rep_dim, Rng& rng)
    : mlp_({bottleneck_dim, hidden_dim, rep_dim}, nn::Activation::Relu, rng) {}

void IBDecoder::collect(nn::ParamList& out, const std::string& prefix) const {
  mlp_.collect(out, prefix);
}

LabelPredictor::LabelPredictor(int bottleneck_dim, int hidden_dim, int out_dim, Rng& rng)
    : mlp_({bottleneck_dim, hidden_dim, out_dim}, nn::Activation::Relu, rng) {}

void LabelPredictor::collect(nn::ParamList& out, const std::string& prefix) const {
  mlp_.collect(out, prefix);
}

ag::Var gaussian_kl(const ag::Var& mu, const ag::Var& sigma) {
  if (mu.rows() != sigma.rows() || mu.cols() != sigma.cols())
    throw DimensionError("gaussian_kl: mu and sigma shapes differ");
  if (!(sigma.value().array() > 0.0).all())
    throw DomainError("gaussian_kl: sigma must be strictly positive");
  ag::Var var = ag::square(sigma);
  // -1/2 (log s^2 + 1 - m^2 - s^2) summed over channels.
  ag::Var inner = ag::sub(ag::add_scalar(ag::log(var), 1.0), ag::add(ag::square(mu), var));
  ag::Var per_row = ag::scale(ag::row_sum(inner), -0.5);
  return ag::mean(per_row);
}

double gaussian_kl(const ag::Matrix& mu, const ag::Matrix& sigma) {
  ag::NoGradGuard guard;
  return gaussian_kl(ag::constant(mu), ag::constant(sigma)).scalar();
}

IBTerms token_ib_terms(const BottleneckLatent& source, const UnimodalRepr& target,
                       const IBDecoder& decoder) {
  if (source.seq_len != target.seq_len || source.sample.rows() != target.tokens.rows())
    throw DimensionError("token IB: source has " + std::to_string(source.sample.rows()) +
                         " token rows (L=" + std::to_string(source.seq_len) + "), target has " +
                         std::to_string(target.tokens.rows()) + " (L=" +
                         std::to_string(target.seq_len) + ")");
  ag::Var recon = decoder.decode(source.sample);
  ag::Var err = ag::row_sum(ag::square(ag::sub(target.tokens, recon)));
  return IBTerms{gaussian_kl(source.mu, source.sigma), ag::mean(err)};
}

ag::Var token_ib_loss(const BottleneckLatent& source, const UnimodalRepr& target,
                      const IBDecoder& decoder, double beta) {
  return token_ib_terms(source, target, decoder).total(beta);
}

CyclicTokenIB cyclic_token_ib(std::span<const BottleneckLatent> latents,
                              std::span<const UnimodalRepr> reprs,
                              std::span<const IBDecoder> decoders, double beta,
                              bool include_cross) {
  const std::size_t u = latents.size();
  if (u < 2 || reprs.size() != u)
    throw ArityError("cyclic token IB needs >= 2 modalities with one latent and one "
                     "representation each, got " +
                     std::to_string(latents.size()) + " latents and " +
                     std::to_string(reprs.size()) + " representations");
  if (decoders.size() != u * u)
    throw ArityError("cyclic token IB needs U*U decoders, got " + std::to_string(decoders.size()));

  auto term = [&](std::size_t s, std::size_t t) {
    return token_ib_loss(latents[s], reprs[t], decoders[s * u + t], beta);
  };

  ag::Var self_sum;
  for (std::size_t s = 0; s < u; ++s) {
    ag::Var l = term(s, s);
    self_sum = self_sum.defined() ? ag::add(self_sum, l) : l;
  }
  CyclicTokenIB out;
  out.self_terms = ag::scale(self_sum, 1.0 / static_cast<double>(u));
  out.loss = out.self_terms;
  if (!include_cross) return out;

  ag::Var cross_sum;
  std::size_t pairs = 0;
  for (std::size_t s = 0; s < u; ++s) {
    for (std::size_t t = s + 1; t < u; ++t) {
      ag::Var l = ag::scale(ag::add(term(s, t), term(t, s)), 0.5);
      cross_sum = cross_sum.defined() ? ag::add(cross_sum, l) : l;
      ++pairs;
    }
  }
  out.cross_terms = ag::scale(cross_sum, 1.0 / static_cast<double>(pairs));
  out.loss = ag::add(out.self_terms, out.cross_terms);
  return out;
}

ag::Var cyclic_token_ib_loss(std::span<const BottleneckLatent> latents,
                             std::span<const UnimodalRepr> reprs,
                             std::span<const IBDecoder> decoders, double beta) {
  return cyclic_token_ib(latents, reprs, decoders, beta, true).loss;
}

PooledLatent pool_label_latent(const BottleneckLatent& latent) {
  if (latent.seq_len < 1 || latent.mu.rows() % latent.seq_len != 0)
    throw DimensionError("pool_label_latent: token rows not a multiple of L");
  PooledLatent out;
  out.mu = ag::segment_mean(latent.mu, latent.seq_len);
  out.sigma = ag::sqrt(ag::segment_mean(ag::square(latent.sigma), latent.seq_len));
  return out;
}

ag::Var label_ib_loss(std::span<const PooledLatent> pooled, const Labels& labels,
                      std::span<const LabelPredictor> predictors, double beta, Mode mode,
                      Rng& rng) {
  if (pooled.empty() || predictors.size() != pooled.size())
    throw ArityError("label IB needs one predictor per pooled latent");
  ag::Var one_hot;
  ag::Var targets;
  if (labels.task == Task::Classification) {
    one_hot = ag::constant(labels.one_hot());
  } else {
    targets = ag::constant(labels.values);
  }

  ag::Var total;
  for (std::size_t s = 0; s < pooled.size(); ++s) {
    const PooledLatent& p = pooled[s];
    if (p.mu.rows() != labels.size())
      throw DimensionError("label IB: pooled latent has " + std::to_string(p.mu.rows()) +
                           " samples, labels have " + std::to_string(labels.size()));
    BottleneckLatent z = reparameterize(p.mu, p.sigma, mode, rng);
    ag::Var out = predictors[s].forward(z.sample);
    ag::Var likelihood;
    if (labels.task == Task::Regression) {
      if (out.cols() != 1)
        throw TaskMismatchError("regression label IB needs a scalar predictor, got " +
                                std::to_string(out.cols()) + " outputs");
      likelihood = ag::mean(ag::abs(ag::sub(targets, out)));
    } else {
      if (out.cols() != labels.num_classes)
        throw TaskMismatchError("classification label IB needs " +
                                std::to_string(labels.num_classes) + " logits, got " +
                                std::to_string(out.cols()));
      ag::Var ce = ag::scale(ag::row_sum(ag::mul(one_hot, ag::log_softmax_rows(out))), -1.0);
      likelihood = ag::mean(ce);
    }
    ag::Var l = IBTerms{gaussian_kl(p.mu, p.sigma), likelihood}.total(beta);
    total = total.defined() ? ag::add(total, l) : l;
  }
  return ag::scale(total, 1.0 / static_cast<double>(pooled.size()));
}

}  // namespace cyin
