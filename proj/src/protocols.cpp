#include "cyin/protocols.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "cyin/errors.hpp"
#include "cyin/rng.hpp"

namespace cyin {

PresenceMask::PresenceMask(std::size_t num_samples, int num_modalities, bool value)
    : n_(num_samples),
      u_(num_modalities),
      flags_(num_samples * static_cast<std::size_t>(num_modalities), value ? 1 : 0) {
  if (num_modalities < 1) throw ProtocolError("a mask needs at least one modality");
}

bool PresenceMask::present(std::size_t sample, int modality) const {
  return flags_.at(sample * static_cast<std::size_t>(u_) + static_cast<std::size_t>(modality)) != 0;
}

void PresenceMask::set(std::size_t sample, int modality, bool value) {
  if (modality < 0 || modality >= u_) throw ProtocolError("mask modality index out of range");
  flags_.at(sample * static_cast<std::size_t>(u_) + static_cast<std::size_t>(modality)) = value ? 1 : 0;
}

int PresenceMask::row_count(std::size_t sample) const {
  int c = 0;
  for (int m = 0; m < u_; ++m) c += present(sample, m) ? 1 : 0;
  return c;
}

std::size_t PresenceMask::total_present() const {
  return static_cast<std::size_t>(std::count(flags_.begin(), flags_.end(), std::uint8_t{1}));
}

std::vector<bool> PresenceMask::column(int modality) const {
  std::vector<bool> out(n_);
  for (std::size_t i = 0; i < n_; ++i) out[i] = present(i, modality);
  return out;
}

PresenceMask PresenceMask::rows(std::size_t begin, std::size_t end) const {
  if (begin > end || end > n_) throw ProtocolError("mask row range out of bounds");
  PresenceMask out(end - begin, u_);
  std::copy(flags_.begin() + static_cast<std::ptrdiff_t>(begin * u_),
            flags_.begin() + static_cast<std::ptrdiff_t>(end * u_), out.flags_.begin());
  return out;
}

PresenceMask PresenceMask::select(std::span<const std::size_t> indices) const {
  PresenceMask out(indices.size(), u_);
  for (std::size_t i = 0; i < indices.size(); ++i)
    for (int m = 0; m < u_; ++m) out.set(i, m, present(indices[i], m));
  return out;
}

void PresenceMask::validate() const {
  for (std::size_t i = 0; i < n_; ++i)
    if (row_count(i) == 0)
      throw ProtocolError("sample " + std::to_string(i) + " has no available modality");
}

PresenceMask fixed_mask(std::size_t num_samples, const std::vector<int>& present_set,
                        int num_modalities) {
  if (present_set.empty()) throw ProtocolError("fixed protocol needs a nonempty present set");
  PresenceMask mask(num_samples, num_modalities, false);
  for (int m : present_set) {
    if (m < 0 || m >= num_modalities)
      throw ProtocolError("fixed protocol modality " + std::to_string(m) + " outside 0.." +
                          std::to_string(num_modalities - 1));
    for (std::size_t i = 0; i < num_samples; ++i) mask.set(i, m, true);
  }
  return mask;
}

double max_missing_rate(int num_modalities) {
  return static_cast<double>(num_modalities - 1) / static_cast<double>(num_modalities);
}

PresenceMask random_mask(std::size_t num_samples, int num_modalities, double target_mr,
                         std::uint64_t seed) {
  const auto slots = static_cast<double>(num_samples) * num_modalities;
  if (!(target_mr >= 0.0) || target_mr > 1.0)
    throw ProtocolError("missing rate " + std::to_string(target_mr) + " outside [0, 1]");
  const auto kept = static_cast<std::size_t>(std::llround(slots * (1.0 - target_mr)));
  if (kept < num_samples) {
    char buf[160];
    std::snprintf(buf, sizeof buf,
                  "missing rate %.6g infeasible for U=%d: every sample keeps one modality, so "
                  "MR <= %.6g",
                  target_mr, num_modalities, max_missing_rate(num_modalities));
    throw ProtocolError(buf);
  }
  PresenceMask mask(num_samples, num_modalities, false);
  if (num_samples == 0) return mask;

  // Per-sample kept counts k_i >= 1 summing to `kept`: spread the extra
  // slots over the N*(U-1) optional positions uniformly at random.
  Rng rng = Rng::substream(seed, "mask", 0);
  const std::size_t optional = num_samples * static_cast<std::size_t>(num_modalities - 1);
  std::vector<std::uint8_t> extra(optional, 0);
  std::fill(extra.begin(), extra.begin() + static_cast<std::ptrdiff_t>(kept - num_samples), 1);
  rng.shuffle(extra);
  std::vector<int> order(static_cast<std::size_t>(num_modalities));
  for (std::size_t i = 0; i < num_samples; ++i) {
    int k = 1;
    for (int j = 0; j < num_modalities - 1; ++j) k += extra[i * (num_modalities - 1) + j];
    std::iota(order.begin(), order.end(), 0);
    rng.shuffle(order);
    for (int j = 0; j < k; ++j) mask.set(i, order[static_cast<std::size_t>(j)], true);
  }
  return mask;
}

PresenceMask random_mask_clamped(std::size_t num_samples, int num_modalities, double target_mr,
                                 std::uint64_t seed) {
  const double mr = std::clamp(target_mr, 0.0, max_missing_rate(num_modalities));
  return random_mask(num_samples, num_modalities, mr, seed);
}

double compute_mr(const PresenceMask& mask) {
  const double slots = static_cast<double>(mask.num_samples()) * mask.num_modalities();
  if (slots == 0.0) return 0.0;
  return 1.0 - static_cast<double>(mask.total_present()) / slots;
}

Batch apply_mask(const Batch& batch, const PresenceMask& mask) {
  if (static_cast<ag::Index>(mask.num_samples()) != batch.size() ||
      mask.num_modalities() != batch.num_modalities())
    throw DimensionError("mask is " + std::to_string(mask.num_samples()) + "x" +
                         std::to_string(mask.num_modalities()) + " but the batch has " +
                         std::to_string(batch.size()) + " samples and " +
                         std::to_string(batch.num_modalities()) + " modalities");
  Batch out = batch;
  for (int m = 0; m < batch.num_modalities(); ++m)
    for (std::size_t i = 0; i < mask.num_samples(); ++i)
      if (!mask.present(i, m))
        out.inputs[m].middleRows(static_cast<ag::Index>(i) * batch.seq_len, batch.seq_len).setZero();
  return out;
}

void write_mask_csv(std::ostream& out, const PresenceMask& mask,
                    std::span<const std::uint64_t> sample_ids) {
  if (sample_ids.size() != mask.num_samples())
    throw DimensionError("mask CSV needs one sample id per mask row");
  out << "sample_id";
  for (int m = 0; m < mask.num_modalities(); ++m) out << ",m" << m;
  out << '\n';
  for (std::size_t i = 0; i < mask.num_samples(); ++i) {
    out << sample_ids[i];
    for (int m = 0; m < mask.num_modalities(); ++m) out << ',' << (mask.present(i, m) ? 1 : 0);
    out << '\n';
  }
}

void write_mask_csv(std::ostream& out, const PresenceMask& mask) {
  std::vector<std::uint64_t> ids(mask.num_samples());
  std::iota(ids.begin(), ids.end(), std::uint64_t{0});
  write_mask_csv(out, mask, ids);
}

namespace {

int modality_token(const std::string& tok, const std::string& text) {
  if (tok == "l") return 0;
  if (tok == "a") return 1;
  if (tok == "v") return 2;
  try {
    std::size_t used = 0;
    const int v = std::stoi(tok, &used);
    if (used == tok.size()) return v;
  } catch (const std::exception&) {
  }
  throw ProtocolError("bad modality '" + tok + "' in protocol '" + text + "'");
}

double parse_rate(const std::string& tok, const std::string& text) {
  try {
    std::size_t used = 0;
    const double v = std::stod(tok, &used);
    if (used == tok.size()) return v;
  } catch (const std::exception&) {
  }
  throw ProtocolError("bad missing rate '" + tok + "' in protocol '" + text + "'");
}

std::string format_rate(double r) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", r);
  return buf;
}

}  // namespace

Protocol Protocol::parse(const std::string& text) {
  Protocol p;
  if (text == "complete") return p;
  const auto colon = text.find(':');
  if (colon == std::string::npos) throw ProtocolError("unknown protocol '" + text + "'");
  const std::string head = text.substr(0, colon), body = text.substr(colon + 1);
  if (head == "fixed") {
    p.kind = ProtocolKind::Fixed;
    std::stringstream ss(body);
    std::string tok;
    while (std::getline(ss, tok, ',')) p.present.push_back(modality_token(tok, text));
    if (p.present.empty()) throw ProtocolError("fixed protocol '" + text + "' lists no modality");
    std::sort(p.present.begin(), p.present.end());
    if (std::adjacent_find(p.present.begin(), p.present.end()) != p.present.end())
      throw ProtocolError("fixed protocol '" + text + "' repeats a modality");
    return p;
  }
  if (head == "random") {
    p.kind = ProtocolKind::Random;
    p.missing_rate = parse_rate(body, text);
    if (!(p.missing_rate >= 0.0 && p.missing_rate <= 1.0))
      throw ProtocolError("missing rate in '" + text + "' outside [0, 1]");
    return p;
  }
  throw ProtocolError("unknown protocol '" + text + "' (expected complete, fixed:..., random:...)");
}

std::string Protocol::to_string() const {
  switch (kind) {
    case ProtocolKind::Complete:
      return "complete";
    case ProtocolKind::Fixed: {
      std::string s = "fixed:";
      for (std::size_t i = 0; i < present.size(); ++i)
        s += (i ? "," : "") + std::to_string(present[i]);
      return s;
    }
    case ProtocolKind::Random:
      return "random:" + format_rate(missing_rate);
  }
  return "complete";
}

void Protocol::validate(int num_modalities) const {
  if (kind == ProtocolKind::Fixed)
    for (int m : present)
      if (m < 0 || m >= num_modalities)
        throw ProtocolError("protocol " + to_string() + " names modality " + std::to_string(m) +
                            " but the data has " + std::to_string(num_modalities));
}

PresenceMask Protocol::make_mask(std::size_t num_samples, int num_modalities,
                                 std::uint64_t seed) const {
  validate(num_modalities);
  switch (kind) {
    case ProtocolKind::Complete:
      return PresenceMask(num_samples, num_modalities, true);
    case ProtocolKind::Fixed:
      return fixed_mask(num_samples, present, num_modalities);
    case ProtocolKind::Random:
      return random_mask_clamped(num_samples, num_modalities, missing_rate, seed);
  }
  return PresenceMask(num_samples, num_modalities, true);
}

std::vector<Protocol> expand_sweep(const std::string& text) {
  const auto dots = text.find("..");
  if (dots == std::string::npos) return {Protocol::parse(text)};
  if (text.rfind("random:", 0) != 0)
    throw ProtocolError("only random protocols can be swept: '" + text + "'");
  const std::string range = text.substr(7);
  const auto d = range.find("..");
  const auto step_colon = range.find(':', d + 2);
  if (step_colon == std::string::npos)
    throw ProtocolError("sweep '" + text + "' needs the form random:lo..hi:step");
  const double lo = parse_rate(range.substr(0, d), text);
  const double hi = parse_rate(range.substr(d + 2, step_colon - d - 2), text);
  const double step = parse_rate(range.substr(step_colon + 1), text);
  if (!(step > 0.0) || hi < lo) throw ProtocolError("sweep '" + text + "' has an empty range");
  std::vector<Protocol> out;
  const auto count = static_cast<long>(std::floor((hi - lo) / step + 1e-9)) + 1;
  for (long i = 0; i < count; ++i) {
    // Round to the step's decimal grid so 0.1*3 prints as 0.3.
    const double v = std::round((lo + static_cast<double>(i) * step) * 1e9) / 1e9;
    out.push_back(Protocol::parse("random:" + format_rate(v)));
  }
  return out;
}

}  // namespace cyin
