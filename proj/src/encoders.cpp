#include "cyin/encoders.hpp"

#include <cmath>
#include <vector>

#include "cyin/errors.hpp"

namespace cyin {

std::string to_string(MixingKind kind) {
  return kind == MixingKind::Attention ? "attention" : "recurrent";
}

MixingKind parse_mixing(const std::string& text) {
  if (text == "attention") return MixingKind::Attention;
  if (text == "recurrent") return MixingKind::Recurrent;
  throw ConfigError("unknown encoder mixing '" + text + "' (expected attention|recurrent)");
}

ModalityEncoder::ModalityEncoder(int modality_id, int in_dim, int rep_dim, MixingKind mixing,
                                 Rng& rng)
    : modality_id_(modality_id), mixing_(mixing), input_(in_dim, rep_dim, rng) {
  if (mixing == MixingKind::Attention) {
    query_ = nn::Linear(rep_dim, rep_dim, rng);
    key_ = nn::Linear(rep_dim, rep_dim, rng);
    value_ = nn::Linear(rep_dim, rep_dim, rng);
    output_ = nn::Linear(rep_dim, rep_dim, rng);
  } else {
    step_input_ = nn::Linear(rep_dim, rep_dim, rng);
    step_hidden_ = ag::leaf(nn::glorot(rep_dim, rep_dim, rng));
  }
}

UnimodalRepr ModalityEncoder::encode(const ag::Var& tokens, int seq_len) const {
  if (tokens.cols() != input_.in_dim()) {
    throw DimensionError("encoder for modality " + std::to_string(modality_id_) + " expects " +
                         std::to_string(input_.in_dim()) + " channels per token, got " +
                         std::to_string(tokens.cols()));
  }
  if (seq_len < 1 || tokens.rows() % seq_len != 0) {
    throw DimensionError("encoder for modality " + std::to_string(modality_id_) + ": " +
                         std::to_string(tokens.rows()) + " token rows are not a multiple of L=" +
                         std::to_string(seq_len));
  }
  ag::Var h = ag::tanh(input_(tokens));
  ag::Var out = mixing_ == MixingKind::Attention ? mix_attention(h, seq_len)
                                                 : mix_recurrent(h, seq_len);
  return UnimodalRepr{out, modality_id_, seq_len};
}

UnimodalRepr ModalityEncoder::encode(const ag::Matrix& tokens) const {
  return encode(ag::constant(tokens), static_cast<int>(tokens.rows()));
}

ag::Var ModalityEncoder::mix_attention(const ag::Var& h, int seq_len) const {
  const double scale = 1.0 / std::sqrt(static_cast<double>(h.cols()));
  ag::Var attended = ag::segment_attention(query_(h), key_(h), value_(h), seq_len, scale);
  return ag::add(h, output_(attended));
}

ag::Var ModalityEncoder::mix_recurrent(const ag::Var& h, int seq_len) const {
  const ag::Index n = h.rows() / seq_len;
  std::vector<ag::Var> steps;
  steps.reserve(static_cast<std::size_t>(seq_len));
  std::vector<ag::Index> rows(static_cast<std::size_t>(n));
  ag::Var state;
  for (int t = 0; t < seq_len; ++t) {
    for (ag::Index i = 0; i < n; ++i) rows[static_cast<std::size_t>(i)] = i * seq_len + t;
    ag::Var pre = step_input_(ag::gather_rows(h, rows));
    if (state.defined()) pre = ag::add(pre, ag::matmul(state, step_hidden_));
    state = ag::tanh(pre);
    steps.push_back(state);
  }
  // Time-major stack back to sample-major order.
  ag::Var stacked = ag::concat_rows(steps);
  std::vector<ag::Index> order(static_cast<std::size_t>(n * seq_len));
  for (ag::Index i = 0; i < n; ++i)
    for (int t = 0; t < seq_len; ++t) order[static_cast<std::size_t>(i * seq_len + t)] = t * n + i;
  return ag::gather_rows(stacked, order);
}

void ModalityEncoder::collect(nn::ParamList& out, const std::string& prefix) const {
  constexpr auto g = nn::ParamGroup::Encoder;
  input_.collect(out, prefix + ".input", g);
  if (mixing_ == MixingKind::Attention) {
    query_.collect(out, prefix + ".query", g);
    key_.collect(out, prefix + ".key", g);
    value_.collect(out, prefix + ".value", g);
    output_.collect(out, prefix + ".output", g);
  } else {
    step_input_.collect(out, prefix + ".step_input", g);
    out.push_back({prefix + ".step_hidden", step_hidden_, g});
  }
}

void ModalityEncoder::set_zero() {
  nn::ParamList params;
  collect(params, "");
  for (auto& p : params) p.var.mutable_value().setZero();
}

}  // namespace cyin
