#include "cyin/translation.hpp"

#include "cyin/errors.hpp"

namespace cyin {

int TranslationConfig::blocks_for(int source, int target) const {
  auto it = pair_blocks.find({source, target});
  return it == pair_blocks.end() ? num_blocks : it->second;
}

void TranslationConfig::validate(int num_modalities) const {
  if (num_blocks < 1) throw ConfigError("translator num_blocks must be >= 1");
  for (int w : widths)
    if (w < 1) throw ConfigError("translator widths must be positive");
  for (const auto& [pair, n] : pair_blocks) {
    const auto [s, t] = pair;
    if (s < 0 || t < 0 || s >= num_modalities || t >= num_modalities || s == t)
      throw ConfigError("translator block override for invalid pair " + std::to_string(s) +
                        "->" + std::to_string(t));
    if (n < 1) throw ConfigError("translator block override must be >= 1");
  }
}

RABlock::RABlock(int dim, const std::vector<int>& widths, Rng& rng) {
  std::vector<ag::Index> dims{dim};
  for (int w : widths) dims.push_back(w);
  for (auto it = widths.rbegin() + 1; it < widths.rend(); ++it) dims.push_back(*it);
  dims.push_back(dim);
  mlp_ = nn::Mlp(dims, nn::Activation::Relu, rng);
}

CRATranslator::CRATranslator(int source_id, int target_id, int dim, int num_blocks,
                             const std::vector<int>& widths, Rng& rng)
    : source_(source_id), target_(target_id), dim_(dim) {
  if (num_blocks < 1) throw ConfigError("a translator needs at least one block");
  for (int i = 0; i < num_blocks; ++i) blocks_.emplace_back(dim, widths, rng);
}

ag::Var CRATranslator::translate(const ag::Var& latent_tokens) const {
  if (latent_tokens.cols() != dim_)
    throw DimensionError("translator " + std::to_string(source_) + "->" +
                         std::to_string(target_) + " expects " + std::to_string(dim_) +
                         " channels, got " + std::to_string(latent_tokens.cols()));
  ag::Var running;
  ag::Var out;
  for (const RABlock& block : blocks_) {
    out = block(running.defined() ? ag::add(latent_tokens, running) : latent_tokens);
    running = running.defined() ? ag::add(running, out) : out;
  }
  return out;
}

void CRATranslator::collect(nn::ParamList& out, const std::string& prefix) const {
  for (std::size_t i = 0; i < blocks_.size(); ++i)
    blocks_[i].mlp().collect(out, prefix + ".ra" + std::to_string(i));
}

ag::Var cra_translate(const CRATranslator& translator, const ag::Var& latent_tokens) {
  return translator.translate(latent_tokens);
}

TranslatorBank::TranslatorBank(int num_modalities, int dim, const TranslationConfig& cfg,
                               Rng& rng)
    : u_(num_modalities), mean_(cfg.combine_mean) {
  cfg.validate(num_modalities);
  for (int s = 0; s < u_; ++s)
    for (int t = 0; t < u_; ++t)
      if (s != t) translators_.emplace_back(s, t, dim, cfg.blocks_for(s, t), cfg.widths, rng);
}

std::size_t TranslatorBank::slot(int source, int target) const {
  if (source < 0 || target < 0 || source >= u_ || target >= u_ || source == target)
    throw ConfigError("no translator for pair " + std::to_string(source) + "->" +
                      std::to_string(target));
  return static_cast<std::size_t>(source * (u_ - 1) + (target < source ? target : target - 1));
}

const CRATranslator& TranslatorBank::at(int source, int target) const {
  return translators_[slot(source, target)];
}

CRATranslator& TranslatorBank::at(int source, int target) {
  return translators_[slot(source, target)];
}

void TranslatorBank::collect(nn::ParamList& out, const std::string& prefix) const {
  for (const auto& t : translators_)
    t.collect(out, prefix + "." + std::to_string(t.source_id()) + "to" +
                       std::to_string(t.target_id()));
}

namespace {

ag::Var mse(const ag::Var& a, const ag::Var& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw DimensionError("translation MSE: shapes " + std::to_string(a.rows()) + "x" +
                         std::to_string(a.cols()) + " and " + std::to_string(b.rows()) + "x" +
                         std::to_string(b.cols()) + " differ");
  return ag::mean(ag::square(ag::sub(a, b)));
}

}  // namespace

ag::Var forward_rec_loss(const ag::Var& translated, const BottleneckLatent& target) {
  return mse(target.sample, translated);
}

ag::Var reverse_cyc_loss(const CRATranslator& forward, const CRATranslator& reverse,
                         const BottleneckLatent& source) {
  if (forward.target_id() != reverse.source_id() || forward.source_id() != reverse.target_id())
    throw ConfigError("reverse translator " + std::to_string(reverse.source_id()) + "->" +
                      std::to_string(reverse.target_id()) + " does not invert " +
                      std::to_string(forward.source_id()) + "->" +
                      std::to_string(forward.target_id()));
  return mse(source.sample, reverse.translate(forward.translate(source.sample)));
}

ag::Var combine_translations(const TranslatorBank& bank,
                             std::span<const BottleneckLatent> remained, int missing_id) {
  return combine_translations(bank, remained, missing_id, bank.combine_mean());
}

ag::Var combine_translations(const TranslatorBank& bank,
                             std::span<const BottleneckLatent> remained, int missing_id,
                             bool mean) {
  if (remained.empty()) throw ArityError("cannot translate into modality " +
                                         std::to_string(missing_id) + " from an empty set");
  ag::Var total;
  for (const BottleneckLatent& b : remained) {
    if (b.modality_id == missing_id)
      throw ProtocolError("modality " + std::to_string(missing_id) +
                          " is both remained and missing");
    ag::Var t = bank.at(b.modality_id, missing_id).translate(b.sample);
    total = total.defined() ? ag::add(total, t) : t;
  }
  return mean ? ag::scale(total, 1.0 / static_cast<double>(remained.size())) : total;
}

TranslationLoss translation_loss(std::span<const BottleneckLatent> latents,
                                 const TranslatorBank& bank) {
  const int u = bank.num_modalities();
  if (static_cast<int>(latents.size()) != u)
    throw ArityError("translation loss needs all " + std::to_string(u) + " latents, got " +
                     std::to_string(latents.size()));
  for (int s = 0; s < u; ++s)
    if (latents[s].modality_id != s || !latents[s].sample.defined())
      throw ArityError("translation loss: latent for modality " + std::to_string(s) + " absent");
  ag::Var rec, cyc;
  int pairs = 0;
  for (int s = 0; s < u; ++s) {
    for (int t = 0; t < u; ++t) {
      if (s == t) continue;
      const CRATranslator& fwd = bank.at(s, t);
      ag::Var r = forward_rec_loss(fwd.translate(latents[s].sample), latents[t]);
      ag::Var c = reverse_cyc_loss(fwd, bank.at(t, s), latents[s]);
      rec = rec.defined() ? ag::add(rec, r) : r;
      cyc = cyc.defined() ? ag::add(cyc, c) : c;
      ++pairs;
    }
  }
  TranslationLoss out;
  out.rec = ag::scale(rec, 1.0 / pairs);
  out.cyc = ag::scale(cyc, 1.0 / pairs);
  out.total = ag::add(out.rec, out.cyc);
  return out;
}

}  // namespace cyin
