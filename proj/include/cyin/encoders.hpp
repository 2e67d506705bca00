#pragma once

#include <string>

#include "cyin/autograd.hpp"
#include "cyin/nn.hpp"

namespace cyin {

enum class MixingKind { Attention, Recurrent };

std::string to_string(MixingKind kind);
MixingKind parse_mixing(const std::string& text);

/// Unimodal token representations of a batch, (N*L) x C_rep, sample-major.
struct UnimodalRepr {
  ag::Var tokens;
  int modality_id = 0;
  int seq_len = 1;

  ag::Index num_samples() const { return tokens.rows() / seq_len; }
};

/// Modality-specific encoder: per-token affine map with tanh, followed by one
/// token-mixing layer (residual self-attention or an Elman recurrence).
class ModalityEncoder {
 public:
  ModalityEncoder() = default;
  ModalityEncoder(int modality_id, int in_dim, int rep_dim, MixingKind mixing, Rng& rng);

  /// tokens: (N*L) x in_dim.
  UnimodalRepr encode(const ag::Var& tokens, int seq_len) const;
  /// Single sample, L x in_dim.
  UnimodalRepr encode(const ag::Matrix& tokens) const;

  int modality_id() const { return modality_id_; }
  int in_dim() const { return static_cast<int>(input_.in_dim()); }
  int rep_dim() const { return static_cast<int>(input_.out_dim()); }
  MixingKind mixing() const { return mixing_; }

  void collect(nn::ParamList& out, const std::string& prefix) const;
  void set_zero();

 private:
  ag::Var mix_attention(const ag::Var& h, int seq_len) const;
  ag::Var mix_recurrent(const ag::Var& h, int seq_len) const;

  int modality_id_ = 0;
  MixingKind mixing_ = MixingKind::Attention;
  nn::Linear input_;
  // attention
  nn::Linear query_, key_, value_, output_;
  // recurrent
  nn::Linear step_input_;
  ag::Var step_hidden_;
};

}  // namespace cyin
