#pragma once

// Presence masks for the fixed and random missing-modality protocols.

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include "cyin/batch.hpp"

namespace cyin {

/// N x U presence flags, true = modality available.
class PresenceMask {
 public:
  PresenceMask() = default;
  PresenceMask(std::size_t num_samples, int num_modalities, bool value = true);

  std::size_t num_samples() const { return n_; }
  int num_modalities() const { return u_; }
  bool present(std::size_t sample, int modality) const;
  void set(std::size_t sample, int modality, bool value);
  int row_count(std::size_t sample) const;
  std::size_t total_present() const;
  bool all_present() const { return total_present() == n_ * static_cast<std::size_t>(u_); }
  /// Per-sample flags for one modality.
  std::vector<bool> column(int modality) const;
  PresenceMask rows(std::size_t begin, std::size_t end) const;
  PresenceMask select(std::span<const std::size_t> indices) const;

  /// Throws ProtocolError if some sample has no modality.
  void validate() const;

 private:
  std::size_t n_ = 0;
  int u_ = 0;
  std::vector<std::uint8_t> flags_;
};

PresenceMask fixed_mask(std::size_t num_samples, const std::vector<int>& present_set,
                        int num_modalities);

/// Exact-count random mask: sum of kept slots is round(N*U*(1-mr)) with at
/// least one kept modality per sample. Throws ProtocolError when the target
/// is outside [0, (U-1)/U] after rounding.
PresenceMask random_mask(std::size_t num_samples, int num_modalities, double target_mr,
                         std::uint64_t seed);

/// Like random_mask, with the target clamped into the feasible range first.
PresenceMask random_mask_clamped(std::size_t num_samples, int num_modalities, double target_mr,
                                 std::uint64_t seed);

double max_missing_rate(int num_modalities);
double compute_mr(const PresenceMask& mask);

/// Zeroes the input rows of every missing (sample, modality) slot.
Batch apply_mask(const Batch& batch, const PresenceMask& mask);

/// CSV audit format: sample_id,m0,...,m{U-1} with 0/1 flags.
void write_mask_csv(std::ostream& out, const PresenceMask& mask,
                    std::span<const std::uint64_t> sample_ids);
void write_mask_csv(std::ostream& out, const PresenceMask& mask);

enum class ProtocolKind { Complete, Fixed, Random };

struct Protocol {
  ProtocolKind kind = ProtocolKind::Complete;
  std::vector<int> present;  // Fixed
  double missing_rate = 0.0; // Random

  /// complete | fixed:0,2 (or letters l,a,v for modalities 0,1,2) | random:0.3
  static Protocol parse(const std::string& text);
  std::string to_string() const;
  /// Checks modality indices and the missing rate against U.
  void validate(int num_modalities) const;
  PresenceMask make_mask(std::size_t num_samples, int num_modalities, std::uint64_t seed) const;
};

/// Expands "random:0.1..0.7:0.1" (inclusive) into protocols; a plain
/// protocol string yields itself.
std::vector<Protocol> expand_sweep(const std::string& text);

}  // namespace cyin
