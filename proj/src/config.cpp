#include "cyin/config.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "cyin/errors.hpp"
#include "cyin/protocols.hpp"
#include "cyin/rng.hpp"

namespace cyin {

namespace {

const std::vector<std::pair<Ablation, std::string>>& ablation_names() {
  static const std::vector<std::pair<Ablation, std::string>> names{
      {Ablation::Full, "full"},
      {Ablation::NoTib, "no_tib"},
      {Ablation::NoLib, "no_lib"},
      {Ablation::NoCyclicInteraction, "no_cyclic_interaction"},
      {Ablation::NoCyclicTranslation, "no_cyclic_translation"},
      {Ablation::NoInformativeSpace, "no_informative_space"},
      {Ablation::NoTranslatedLatents, "no_translated_latents"},
  };
  return names;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, sep)) {
    tok = trim(tok);
    if (!tok.empty()) out.push_back(tok);
  }
  return out;
}

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string join(const std::vector<std::string>& parts, const std::string& sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) out += (i ? sep : "") + parts[i];
  return out;
}

class Reader {
 public:
  Reader(std::string where, std::string value) : where_(std::move(where)), value_(std::move(value)) {}

  double real() const {
    try {
      std::size_t used = 0;
      const double v = std::stod(value_, &used);
      if (used == value_.size()) return v;
    } catch (const std::exception&) {
    }
    fail("a number");
  }
  long integer() const {
    try {
      std::size_t used = 0;
      const long v = std::stol(value_, &used);
      if (used == value_.size()) return v;
    } catch (const std::exception&) {
    }
    fail("an integer");
  }
  int count() const { return static_cast<int>(integer()); }
  std::uint64_t u64() const {
    try {
      std::size_t used = 0;
      if (!value_.empty() && value_[0] != '-') {
        const auto v = std::stoull(value_, &used);
        if (used == value_.size()) return v;
      }
    } catch (const std::exception&) {
    }
    fail("a non-negative integer");
  }
  bool boolean() const {
    if (value_ == "true") return true;
    if (value_ == "false") return false;
    fail("true or false");
  }
  std::vector<int> ints() const {
    std::vector<int> out;
    for (const auto& t : split(value_, ',')) out.push_back(Reader(where_, t).count());
    return out;
  }
  std::vector<double> reals() const {
    std::vector<double> out;
    for (const auto& t : split(value_, ',')) out.push_back(Reader(where_, t).real());
    return out;
  }
  const std::string& text() const { return value_; }

  template <typename F>
  auto wrap(F&& f) const {
    try {
      return f(value_);
    } catch (const ConfigError&) {
      throw;
    } catch (const Error& e) {
      throw ConfigError(where_ + ": " + e.what());
    }
  }

 private:
  [[noreturn]] void fail(const char* expected) const {
    throw ConfigError(where_ + ": expected " + expected + ", got '" + value_ + "'");
  }
  std::string where_;
  std::string value_;
};

}  // namespace

std::string to_string(Ablation a) {
  for (const auto& [k, v] : ablation_names())
    if (k == a) return v;
  return "full";
}

Ablation parse_ablation(const std::string& text) {
  for (const auto& [k, v] : ablation_names())
    if (v == text) return k;
  std::string allowed;
  for (const auto& [k, v] : ablation_names()) allowed += (allowed.empty() ? "" : "|") + v;
  throw ConfigError("unknown ablation '" + text + "' (expected " + allowed + ")");
}

const std::vector<Ablation>& all_ablations() {
  static const std::vector<Ablation> order = [] {
    std::vector<Ablation> v;
    for (const auto& [k, name] : ablation_names()) v.push_back(k);
    return v;
  }();
  return order;
}

int ExperimentConfig::stage1_epochs() const {
  return static_cast<int>(std::llround(stage_split * epochs));
}

void ExperimentConfig::validate() const {
  if (rep_dim < 1) throw ConfigError("model.rep_dim must be >= 1");
  ib.validate();
  FusionConfig f = fusion;
  f.dim = ib.bottleneck_dim;
  f.validate();
  if (translation.num_blocks < 1) throw ConfigError("model.ra_blocks must be >= 1");
  for (int w : translation.widths)
    if (w < 1) throw ConfigError("model.ra_widths entries must be >= 1");
  if (!(gamma >= 0.0)) throw ConfigError("loss.gamma must be >= 0");
  if (epochs < 1) throw ConfigError("train.epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("train.batch_size must be >= 1");
  if (!(lr_encoder > 0.0) || !(lr_other > 0.0))
    throw ConfigError("train learning rates must be > 0");
  if (!(weight_decay >= 0.0)) throw ConfigError("train.weight_decay must be >= 0");
  if (!(clip_norm > 0.0)) throw ConfigError("train.clip_norm must be > 0");
  if (optimizer != "adamw") throw ConfigError("train.optimizer '" + optimizer + "' unsupported (adamw)");
  if (!(stage_split >= 0.0 && stage_split <= 1.0))
    throw ConfigError("train.stage_split must lie in [0, 1]");
  if (curriculum.empty()) throw ConfigError("train.curriculum must list at least one missing rate");
  for (double mr : curriculum)
    if (!(mr >= 0.0 && mr <= 1.0)) throw ConfigError("train.curriculum rates must lie in [0, 1]");
  for (const auto& p : protocols) {
    try {
      expand_sweep(p);
    } catch (const ProtocolError& e) {
      throw ConfigError(std::string("eval.protocols: ") + e.what());
    }
  }
  if (!(test_fraction > 0.0 && test_fraction < 1.0))
    throw ConfigError("eval.test_fraction must lie in (0, 1)");
}

std::string ExperimentConfig::to_text() const {
  std::ostringstream o;
  auto ints = [](const std::vector<int>& v) {
    std::vector<std::string> s;
    for (int x : v) s.push_back(std::to_string(x));
    return join(s, ", ");
  };
  o << "[model]\n"
    << "rep_dim = " << rep_dim << "\n"
    << "mixing = " << to_string(mixing) << "\n"
    << "bottleneck_dim = " << ib.bottleneck_dim << "\n"
    << "ib_hidden = " << ib.hidden_dim << "\n"
    << "ra_blocks = " << translation.num_blocks << "\n"
    << "ra_widths = " << ints(translation.widths) << "\n";
  if (!translation.pair_blocks.empty()) {
    std::vector<std::string> s;
    for (const auto& [pair, n] : translation.pair_blocks)
      s.push_back(std::to_string(pair.first) + ">" + std::to_string(pair.second) + ":" +
                  std::to_string(n));
    o << "ra_pair_blocks = " << join(s, ", ") << "\n";
  }
  o << "combine = " << (translation.combine_mean ? "mean" : "sum") << "\n"
    << "cma_layers = " << fusion.num_layers << "\n"
    << "cma_heads = " << fusion.num_heads << "\n"
    << "ff_hidden = " << fusion.ff_hidden << "\n"
    << "head_hidden = " << fusion.head_hidden << "\n"
    << "norm = " << to_string(fusion.norm) << "\n"
    << "reduction = " << to_string(fusion.reduction) << "\n"
    << "symmetric = " << (fusion.symmetric ? "true" : "false") << "\n"
    << "\n[loss]\n"
    << "beta = " << num(ib.beta) << "\n"
    << "gamma = " << num(gamma) << "\n"
    << "ablation = " << to_string(ablation) << "\n"
    << "\n[train]\n"
    << "epochs = " << epochs << "\n"
    << "batch_size = " << batch_size << "\n"
    << "lr_encoder = " << num(lr_encoder) << "\n"
    << "lr_other = " << num(lr_other) << "\n"
    << "weight_decay = " << num(weight_decay) << "\n"
    << "clip_norm = " << num(clip_norm) << "\n"
    << "optimizer = " << optimizer << "\n"
    << "stage_split = " << num(stage_split) << "\n";
  std::vector<std::string> cur;
  for (double c : curriculum) cur.push_back(num(c));
  o << "curriculum = " << join(cur, ", ") << "\n"
    << "seed = " << seed << "\n"
    << "\n[eval]\n"
    << "protocols = " << join(protocols, "; ") << "\n"
    << "test_fraction = " << num(test_fraction) << "\n";
  return o.str();
}

ExperimentConfig ExperimentConfig::parse(const std::string& text) {
  ExperimentConfig c;
  std::istringstream in(text);
  std::string line, section;
  int lineno = 0;
  std::map<std::string, int> seen;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::string loc = "config line " + std::to_string(lineno);
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(loc + ": unterminated section header");
      section = trim(line.substr(1, line.size() - 2));
      if (section != "model" && section != "loss" && section != "train" && section != "eval")
        throw ConfigError(loc + ": unknown section [" + section + "]");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(loc + ": expected key = value");
    if (section.empty()) throw ConfigError(loc + ": key outside of a section");
    const std::string key = trim(line.substr(0, eq));
    const std::string full = section + "." + key;
    if (seen.count(full))
      throw ConfigError(loc + ": " + full + " repeats line " + std::to_string(seen[full]));
    seen[full] = lineno;
    const Reader r(loc + " (" + full + ")", trim(line.substr(eq + 1)));

    if (full == "model.rep_dim") c.rep_dim = r.count();
    else if (full == "model.mixing") c.mixing = r.wrap(parse_mixing);
    else if (full == "model.bottleneck_dim") c.ib.bottleneck_dim = r.count();
    else if (full == "model.ib_hidden") c.ib.hidden_dim = r.count();
    else if (full == "model.ra_blocks") c.translation.num_blocks = r.count();
    else if (full == "model.ra_widths") c.translation.widths = r.ints();
    else if (full == "model.ra_pair_blocks") {
      for (const auto& item : split(r.text(), ',')) {
        int s = 0, t = 0, n = 0;
        char tail = 0;
        if (std::sscanf(item.c_str(), "%d>%d:%d%c", &s, &t, &n, &tail) != 3)
          throw ConfigError(loc + ": ra_pair_blocks entries look like 0>1:4, got '" + item + "'");
        c.translation.pair_blocks[{s, t}] = n;
      }
    } else if (full == "model.combine") {
      if (r.text() != "sum" && r.text() != "mean")
        throw ConfigError(loc + ": combine must be sum or mean");
      c.translation.combine_mean = r.text() == "mean";
    } else if (full == "model.cma_layers") c.fusion.num_layers = r.count();
    else if (full == "model.cma_heads") c.fusion.num_heads = r.count();
    else if (full == "model.ff_hidden") c.fusion.ff_hidden = r.count();
    else if (full == "model.head_hidden") c.fusion.head_hidden = r.count();
    else if (full == "model.norm") c.fusion.norm = r.wrap(parse_norm);
    else if (full == "model.reduction") c.fusion.reduction = r.wrap(parse_reduction);
    else if (full == "model.symmetric") c.fusion.symmetric = r.boolean();
    else if (full == "loss.beta") c.ib.beta = r.real();
    else if (full == "loss.gamma") c.gamma = r.real();
    else if (full == "loss.ablation") c.ablation = r.wrap(parse_ablation);
    else if (full == "train.epochs") c.epochs = r.count();
    else if (full == "train.batch_size") c.batch_size = r.count();
    else if (full == "train.lr_encoder") c.lr_encoder = r.real();
    else if (full == "train.lr_other") c.lr_other = r.real();
    else if (full == "train.weight_decay") c.weight_decay = r.real();
    else if (full == "train.clip_norm") c.clip_norm = r.real();
    else if (full == "train.optimizer") c.optimizer = r.text();
    else if (full == "train.stage_split") c.stage_split = r.real();
    else if (full == "train.curriculum") c.curriculum = r.reals();
    else if (full == "train.seed") c.seed = r.u64();
    else if (full == "eval.protocols") c.protocols = split(r.text(), ';');
    else if (full == "eval.test_fraction") c.test_fraction = r.real();
    else throw ConfigError(loc + ": unknown key " + full);
  }
  c.fusion.dim = c.ib.bottleneck_dim;
  c.validate();
  return c;
}

ExperimentConfig ExperimentConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

std::uint64_t ExperimentConfig::hash() const { return fnv1a64(to_text()); }

}  // namespace cyin
