#include "cli.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "cyin/binary_io.hpp"
#include "cyin/config.hpp"
#include "cyin/data_synth.hpp"
#include "cyin/errors.hpp"
#include "cyin/metrics.hpp"
#include "cyin/protocols.hpp"
#include "cyin/rng.hpp"
#include "cyin/trainer.hpp"

namespace cyin::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string hex64(std::uint64_t v) {
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::uint64_t parse_seed(const std::string& text, const std::string& where) {
  try {
    std::size_t used = 0;
    if (!text.empty() && text[0] != '-') {
      const unsigned long long v = std::stoull(text, &used);
      if (used == text.size()) return v;
    }
  } catch (const std::exception&) {
  }
  throw ValidationError(where + " must be a non-negative integer, got '" + text + "'");
}

// flag > CYIN_SEED > fallback
std::uint64_t resolve_seed(const std::optional<std::string>& flag, std::uint64_t fallback) {
  if (flag) return parse_seed(*flag, "--seed");
  if (const char* env = std::getenv("CYIN_SEED"); env && *env) return parse_seed(env, "CYIN_SEED");
  return fallback;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw Error("short write to " + path.string());
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

std::vector<Protocol> expand_all(const std::vector<std::string>& specs) {
  std::vector<Protocol> out;
  for (const auto& s : specs)
    for (auto& p : expand_sweep(s)) out.push_back(std::move(p));
  return out;
}

json results_json(const std::vector<MetricReport>& reports) {
  json arr = json::array();
  for (const auto& r : reports) arr.push_back(r.to_json());
  return arr;
}

std::string results_csv(Task task, const std::vector<MetricReport>& reports) {
  std::string out = MetricReport::csv_header(task) + "\n";
  for (const auto& r : reports) out += r.csv_row() + "\n";
  return out;
}

std::vector<MetricReport> evaluate_all(const CyinModel& model, const Dataset& data,
                                       const std::vector<Protocol>& protocols,
                                       const std::vector<std::uint64_t>& seeds) {
  std::vector<MetricReport> out;
  for (const auto& p : protocols) {
    p.validate(model.num_modalities());
    for (std::uint64_t s : seeds) out.push_back(evaluate(model, data, p, s));
  }
  return out;
}

// ---------------------------------------------------------------- gen-data

struct GenOptions {
  int modalities = 3;
  std::size_t samples = 0;
  std::string task;
  int classes = 0;
  int seq_len = 4;
  std::vector<int> feat_dims;
  int latent_dim = 4;
  double noise = 0.1;
  int distractors = 0;
  std::optional<std::string> seed;
  std::string out = "synthetic.cyin";
};

int cmd_gen_data(const GenOptions& o, std::ostream& out) {
  DatasetSpec spec;
  spec.num_modalities = o.modalities;
  spec.num_samples = o.samples;
  spec.task = parse_task(o.task);
  spec.num_classes = spec.task == Task::Classification ? o.classes : 0;
  if (spec.task == Task::Classification && o.classes == 0)
    throw ValidationError("--classes is required for classification");
  spec.seq_len = o.seq_len;
  spec.feat_dims = o.feat_dims.empty() ? std::vector<int>(static_cast<std::size_t>(std::max(0, o.modalities)), 8)
                                       : o.feat_dims;
  spec.latent_dim = o.latent_dim;
  spec.noise_scale = o.noise;
  spec.distractor_dim = o.distractors;
  spec.seed = resolve_seed(o.seed, 0);
  spec.validate();

  const fs::path path(o.out);
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  write_dataset_with_metadata(generate(spec), path);
  const std::vector<char> bytes = io::read_file(path.string());
  const std::uint64_t sum = fnv1a64(std::string_view(bytes.data(), bytes.size()));
  out << path.string() << " fnv1a64:" << hex64(sum) << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------- train

struct TrainFlags {
  std::string config;
  std::string data;
  std::string out;
  std::optional<std::string> ablation;
  std::optional<std::string> seed;
  std::optional<int> epochs;
};

int cmd_train(const TrainFlags& f, std::ostream& out) {
  const std::string started = utc_now();
  ExperimentConfig cfg = ExperimentConfig::load(f.config);
  if (f.ablation) cfg.ablation = parse_ablation(*f.ablation);
  if (f.epochs) cfg.epochs = *f.epochs;
  cfg.seed = resolve_seed(f.seed, cfg.seed);
  cfg.validate();
  const std::vector<Protocol> protocols = expand_all(cfg.protocols);

  const Dataset data = read_dataset(f.data);
  const auto [train_set, test_set] = train_test_split(data, cfg.test_fraction);
  CyinModel model(cfg, DataShape::of(data.spec));
  for (const auto& p : protocols) p.validate(model.num_modalities());

  const fs::path dir(f.out);
  fs::create_directories(dir);
  std::ofstream log(dir / "train.jsonl", std::ios::trunc);
  if (!log) throw Error("cannot open " + (dir / "train.jsonl").string());
  TrainOptions opt;
  opt.log = &log;
  try {
    train(model, train_set, opt);
  } catch (const DivergenceError& e) {
    log.flush();
    write_text(dir / "abort.json",
               json{{"step", e.step()}, {"component", e.component()}, {"message", e.what()}}.dump(2) + "\n");
    throw;
  }
  log.close();
  save_checkpoint(model, data.spec, dir / "model.cyck");

  const std::vector<MetricReport> reports = evaluate_all(model, test_set, protocols, {cfg.seed});
  write_text(dir / "metrics.json", results_json(reports).dump(2) + "\n");
  write_text(dir / "metrics.csv", results_csv(data.spec.task, reports));

  json manifest{{"kind", "train"},
                {"config_path", f.config},
                {"config", cfg.to_text()},
                {"config_hash", hex64(cfg.hash())},
                {"data", f.data},
                {"output_dir", dir.string()},
                {"ablation", to_string(cfg.ablation)},
                {"seed", cfg.seed},
                {"task", to_string(data.spec.task)},
                {"results", results_json(reports)},
                {"started_at", started},
                {"finished_at", utc_now()}};
  write_text(dir / "manifest.json", manifest.dump(2) + "\n");
  for (const auto& r : reports) out << r.protocol << " " << r.to_json().dump() << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------- eval

struct EvalFlags {
  std::string checkpoint;
  std::string data;
  std::string out;
  std::vector<std::string> protocols;
  std::vector<std::string> sweeps;
  int seeds = 1;
  std::optional<std::string> seed;
  std::string split = "test";
};

std::pair<double, double> mean_std(const std::vector<double>& v) {
  if (v.empty()) return {std::nan(""), std::nan("")};
  double m = 0.0;
  for (double x : v) m += x;
  m /= static_cast<double>(v.size());
  if (v.size() < 2) return {m, 0.0};
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return {m, std::sqrt(ss / static_cast<double>(v.size() - 1))};
}

std::string fmt(double v) { return std::isfinite(v) ? format_metric(v) : "nan"; }

int cmd_eval(const EvalFlags& f, std::ostream& out) {
  const std::string started = utc_now();
  if (f.seeds < 1) throw ValidationError("--seeds must be >= 1");
  std::vector<std::string> specs = f.protocols;
  specs.insert(specs.end(), f.sweeps.begin(), f.sweeps.end());
  if (specs.empty()) specs = {"complete"};
  const std::vector<Protocol> protocols = expand_all(specs);

  LoadedModel loaded = load_checkpoint(f.checkpoint);
  const ExperimentConfig& cfg = loaded.config;
  Dataset data = read_dataset(f.data);
  if (f.split == "test")
    data = train_test_split(data, cfg.test_fraction).second;
  else if (f.split != "all")
    throw ValidationError("--split must be 'test' or 'all', got '" + f.split + "'");

  const std::uint64_t base = resolve_seed(f.seed, cfg.seed);
  std::vector<std::uint64_t> seeds;
  for (int i = 0; i < f.seeds; ++i) seeds.push_back(base + static_cast<std::uint64_t>(i));
  const std::vector<MetricReport> reports = evaluate_all(*loaded.model, data, protocols, seeds);

  const fs::path dir(f.out);
  fs::create_directories(dir);
  const Task task = data.spec.task;
  write_text(dir / "eval.json", results_json(reports).dump(2) + "\n");
  write_text(dir / "eval.csv", results_csv(task, reports));

  std::string summary = "protocol,n";
  for (const auto& m : metric_names(task)) summary += "," + m + "_mean," + m + "_std";
  summary += "\n";
  for (std::size_t p = 0; p < protocols.size(); ++p) {
    summary += csv_field(protocols[p].to_string()) + "," + std::to_string(seeds.size());
    for (const auto& m : metric_names(task)) {
      std::vector<double> vals;
      for (std::size_t s = 0; s < seeds.size(); ++s)
        if (auto v = reports[p * seeds.size() + s].get(m)) vals.push_back(*v);
      const auto [mu, sd] = mean_std(vals);
      summary += "," + fmt(mu) + "," + fmt(sd);
    }
    summary += "\n";
  }
  write_text(dir / "eval_summary.csv", summary);

  json manifest{{"kind", "eval"},
                {"checkpoint", f.checkpoint},
                {"config", cfg.to_text()},
                {"config_hash", hex64(cfg.hash())},
                {"data", f.data},
                {"split", f.split},
                {"output_dir", dir.string()},
                {"ablation", to_string(cfg.ablation)},
                {"seed", base},
                {"task", to_string(task)},
                {"results", results_json(reports)},
                {"started_at", started},
                {"finished_at", utc_now()}};
  write_text(dir / "manifest.json", manifest.dump(2) + "\n");
  out << MetricReport::csv_header(task) << "\n";
  for (const auto& r : reports) out << r.csv_row() << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------- report

struct ReportFlags {
  std::string input;
  std::string out;
  std::string metric;
  bool plot = false;
};

// complete, fixed (by text), random (by rate)
bool protocol_less(const Protocol& a, const Protocol& b) {
  if (a.kind != b.kind) return static_cast<int>(a.kind) < static_cast<int>(b.kind);
  if (a.kind == ProtocolKind::Random) return a.missing_rate < b.missing_rate;
  return a.to_string() < b.to_string();
}

int ablation_rank(const std::string& tag) {
  const auto& all = all_ablations();
  for (std::size_t i = 0; i < all.size(); ++i)
    if (to_string(all[i]) == tag) return static_cast<int>(i);
  throw ValidationError("unknown ablation tag '" + tag + "' in manifest");
}

struct Cell {
  std::map<std::string, std::vector<double>> values;
  std::size_t n = 0;
};

std::string svg_plot(const std::map<std::string, std::map<double, double>>& lines,
                     const std::string& metric) {
  double x0 = 1e300, x1 = -1e300, y0 = 1e300, y1 = -1e300;
  std::vector<double> xs;
  for (const auto& [tag, pts] : lines)
    for (const auto& [x, y] : pts) {
      x0 = std::min(x0, x);
      x1 = std::max(x1, x);
      y0 = std::min(y0, y);
      y1 = std::max(y1, y);
      if (std::find(xs.begin(), xs.end(), x) == xs.end()) xs.push_back(x);
    }
  std::sort(xs.begin(), xs.end());
  if (x1 == x0) x1 = x0 + 1e-9;
  const double pad = y1 > y0 ? 0.05 * (y1 - y0) : 0.5;
  y0 -= pad;
  y1 += pad;
  const double w = 640, h = 400, left = 70, right = 150, top = 20, bottom = 50;
  auto px = [&](double x) { return left + (x - x0) / (x1 - x0) * (w - left - right); };
  auto py = [&](double y) { return top + (y1 - y) / (y1 - y0) * (h - top - bottom); };
  char buf[256];
  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h
    << "\" data-x-min=\"" << format_metric(x0) << "\" data-x-max=\""
    << format_metric(xs.back()) << "\">\n";
  s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  std::snprintf(buf, sizeof buf,
                "<line x1=\"%.1f\" y1=\"%.1f\" x2=\"%.1f\" y2=\"%.1f\" stroke=\"black\"/>\n", left,
                h - bottom, w - right, h - bottom);
  s << buf;
  std::snprintf(buf, sizeof buf,
                "<line x1=\"%.1f\" y1=\"%.1f\" x2=\"%.1f\" y2=\"%.1f\" stroke=\"black\"/>\n", left,
                top, left, h - bottom);
  s << buf;
  for (double x : xs) {
    std::snprintf(buf, sizeof buf,
                  "<text class=\"xtick\" x=\"%.1f\" y=\"%.1f\" font-size=\"11\" "
                  "text-anchor=\"middle\">%.2f</text>\n",
                  px(x), h - bottom + 16, x);
    s << buf;
  }
  for (int i = 0; i <= 4; ++i) {
    const double y = y0 + (y1 - y0) * i / 4.0;
    std::snprintf(buf, sizeof buf,
                  "<text x=\"%.1f\" y=\"%.1f\" font-size=\"11\" text-anchor=\"end\">%.3f</text>\n",
                  left - 6, py(y) + 4, y);
    s << buf;
  }
  s << "<text x=\"" << (left + w - right) / 2 << "\" y=\"" << h - 10
    << "\" font-size=\"12\" text-anchor=\"middle\">missing rate</text>\n";
  s << "<text x=\"16\" y=\"" << (top + h - bottom) / 2 << "\" font-size=\"12\" transform=\"rotate(-90 16 "
    << (top + h - bottom) / 2 << ")\" text-anchor=\"middle\">" << metric << "</text>\n";
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                 "#9467bd", "#8c564b", "#17becf"};
  int k = 0;
  for (const auto& [tag, pts] : lines) {
    const char* c = colors[k % 7];
    s << "<polyline fill=\"none\" stroke=\"" << c << "\" stroke-width=\"2\" points=\"";
    for (const auto& [x, y] : pts) {
      std::snprintf(buf, sizeof buf, "%.1f,%.1f ", px(x), py(y));
      s << buf;
    }
    s << "\"/>\n";
    std::snprintf(buf, sizeof buf,
                  "<text x=\"%.1f\" y=\"%.1f\" font-size=\"11\" fill=\"%s\">%s</text>\n",
                  w - right + 8, top + 14.0 * (k + 1), c, tag.c_str());
    s << buf;
    ++k;
  }
  s << "</svg>\n";
  return s.str();
}

int cmd_report(const ReportFlags& f, std::ostream& out) {
  const fs::path in(f.input);
  if (!fs::is_directory(in)) throw ValidationError("--input " + f.input + " is not a directory");
  std::vector<fs::path> manifests;
  for (const auto& e : fs::recursive_directory_iterator(in))
    if (e.is_regular_file() && e.path().filename() == "manifest.json") manifests.push_back(e.path());
  std::sort(manifests.begin(), manifests.end());
  if (manifests.empty()) throw ValidationError("no manifest.json found under " + f.input);

  std::optional<Task> task;
  // (protocol, ablation rank) -> cell
  std::vector<std::pair<Protocol, int>> keys;
  std::map<std::pair<std::string, int>, Cell> cells;
  for (const auto& path : manifests) {
    const json m = read_json(path);
    if (!m.contains("results") || !m.contains("ablation") || !m.contains("task"))
      throw ParseError(path.string() + ": not a run manifest");
    const Task t = parse_task(m.at("task").get<std::string>());
    if (task && *task != t) throw ValidationError("manifests mix regression and classification runs");
    task = t;
    const int rank = ablation_rank(m.at("ablation").get<std::string>());
    for (const auto& r : m.at("results")) {
      const MetricReport rep = MetricReport::from_json(r);
      const Protocol p = Protocol::parse(rep.protocol);
      const auto key = std::make_pair(p.to_string(), rank);
      if (!cells.count(key)) keys.emplace_back(p, rank);
      Cell& c = cells[key];
      ++c.n;
      for (const auto& [name, v] : rep.values)
        if (v) c.values[name].push_back(*v);
    }
  }
  std::sort(keys.begin(), keys.end(), [](const auto& a, const auto& b) {
    if (protocol_less(a.first, b.first)) return true;
    if (protocol_less(b.first, a.first)) return false;
    return a.second < b.second;
  });

  const std::vector<std::string> names = metric_names(*task);
  std::string md = "| protocol | ablation | n |";
  std::string sep = "|---|---|---|";
  std::string csv = "protocol,ablation,n";
  for (const auto& n : names) {
    md += " " + n + " |";
    sep += "---|";
    csv += "," + n + "_mean," + n + "_std";
  }
  md += "\n" + sep + "\n";
  csv += "\n";
  std::string last_protocol;
  for (const auto& [p, rank] : keys) {
    const std::string ps = p.to_string();
    const Cell& c = cells.at({ps, rank});
    const std::string tag = to_string(all_ablations()[static_cast<std::size_t>(rank)]);
    md += "| " + (ps == last_protocol ? std::string() : ps) + " | " + tag + " | " +
          std::to_string(c.n) + " |";
    csv += csv_field(ps) + "," + tag + "," + std::to_string(c.n);
    last_protocol = ps;
    for (const auto& n : names) {
      const auto it = c.values.find(n);
      const auto [mu, sd] = it == c.values.end() ? mean_std({}) : mean_std(it->second);
      const bool spread = it != c.values.end() && it->second.size() > 1;
      md += " " + fmt(mu) + (spread ? " ± " + fmt(sd) : std::string()) + " |";
      csv += "," + fmt(mu) + "," + fmt(sd);
    }
    md += "\n";
    csv += "\n";
  }

  const fs::path dir(f.out);
  fs::create_directories(dir);
  write_text(dir / "report.md", md);
  write_text(dir / "report.csv", csv);
  out << md;

  if (f.plot) {
    const std::string metric =
        f.metric.empty() ? (*task == Task::Regression ? "mae" : "acc") : f.metric;
    if (std::find(names.begin(), names.end(), metric) == names.end())
      throw ValidationError("--metric " + metric + " is not reported for this task");
    std::map<std::string, std::map<double, double>> lines;
    for (const auto& [p, rank] : keys) {
      if (p.kind != ProtocolKind::Random) continue;
      const Cell& c = cells.at({p.to_string(), rank});
      const auto it = c.values.find(metric);
      if (it == c.values.end() || it->second.empty()) continue;
      lines[to_string(all_ablations()[static_cast<std::size_t>(rank)])][p.missing_rate] =
          mean_std(it->second).first;
    }
    if (lines.empty()) throw ValidationError("--plot needs random protocol results");
    write_text(dir / "report.svg", svg_plot(lines, metric));
  }
  return kExitOk;
}

int usage_failure(std::ostream& err, const std::string& msg) {
  err << "error: " << msg << "\n";
  return kExitUsage;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Synthetic multimodal training and evaluation under missing modalities", "cyin"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all");

  GenOptions gen;
  auto* g = app.add_subcommand("gen-data", "Generate a synthetic dataset and its metadata sidecar");
  g->add_option("--modalities", gen.modalities, "Number of modalities U")->required();
  g->add_option("--samples", gen.samples, "Number of samples")->required();
  g->add_option("--task", gen.task, "regression or classification")->required();
  g->add_option("--classes", gen.classes, "Number of classes (classification)");
  g->add_option("--seq-len", gen.seq_len, "Tokens per modality");
  g->add_option("--feat-dims", gen.feat_dims, "Per-modality feature widths")->delimiter(',');
  g->add_option("--latent-dim", gen.latent_dim, "Shared latent dimension");
  g->add_option("--noise", gen.noise, "Observation noise scale");
  g->add_option("--distractors", gen.distractors, "Per-modality distractor dimension");
  g->add_option("--seed", gen.seed, "Seed (overrides CYIN_SEED)");
  g->add_option("--out", gen.out, "Output dataset path");

  TrainFlags tr;
  auto* t = app.add_subcommand("train", "Train a model; writes checkpoint, log and manifest");
  t->add_option("--config", tr.config, "Config file")->required()->check(CLI::ExistingFile);
  t->add_option("--data", tr.data, "Dataset file")->required()->check(CLI::ExistingFile);
  t->add_option("--out", tr.out, "Output directory")->required();
  t->add_option("--ablation", tr.ablation, "Ablation tag");
  t->add_option("--seed", tr.seed, "Seed (overrides CYIN_SEED and the config)");
  t->add_option("--epochs", tr.epochs, "Override the configured epoch count");

  EvalFlags ev;
  auto* e = app.add_subcommand("eval", "Evaluate a checkpoint under missing-modality protocols");
  e->add_option("--checkpoint", ev.checkpoint, "Checkpoint file")->required()->check(CLI::ExistingFile);
  e->add_option("--data", ev.data, "Dataset file")->required()->check(CLI::ExistingFile);
  e->add_option("--out", ev.out, "Output directory")->required();
  e->add_option("--protocol", ev.protocols, "complete | fixed:0,2 | random:0.3 (repeatable)");
  e->add_option("--sweep", ev.sweeps, "random:lo..hi:step (repeatable)");
  e->add_option("--seeds", ev.seeds, "Number of mask seeds to aggregate");
  e->add_option("--seed", ev.seed, "First mask seed (overrides CYIN_SEED and the config)");
  e->add_option("--split", ev.split, "test (default) or all");

  ReportFlags rp;
  auto* r = app.add_subcommand("report", "Assemble Markdown/CSV tables (and an SVG plot) from manifests");
  r->add_option("--input", rp.input, "Directory searched for manifest.json")->required();
  r->add_option("--out", rp.out, "Output directory")->required();
  r->add_option("--metric", rp.metric, "Metric plotted against the missing rate");
  r->add_flag("--plot", rp.plot, "Emit report.svg");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& ex) {
    return usage_failure(err, std::string(ex.what()) + "\nrun with --help for usage");
  }

  try {
    if (*g) return cmd_gen_data(gen, out);
    if (*t) return cmd_train(tr, out);
    if (*e) return cmd_eval(ev, out);
    if (*r) return cmd_report(rp, out);
  } catch (const DivergenceError& ex) {
    err << "abort: " << ex.what() << "\n";
    return kExitRuntime;
  } catch (const NumericalError& ex) {
    err << "error: " << ex.what() << "\n";
    return kExitRuntime;
  } catch (const ValidationError& ex) {
    return usage_failure(err, ex.what());
  } catch (const ConfigError& ex) {
    return usage_failure(err, ex.what());
  } catch (const ProtocolError& ex) {
    return usage_failure(err, ex.what());
  } catch (const ParseError& ex) {
    return usage_failure(err, ex.what());
  } catch (const TaskMismatchError& ex) {
    return usage_failure(err, ex.what());
  } catch (const IncompatibleCheckpointError& ex) {
    return usage_failure(err, ex.what());
  } catch (const DimensionError& ex) {
    return usage_failure(err, ex.what());
  } catch (const ArityError& ex) {
    return usage_failure(err, ex.what());
  } catch (const std::exception& ex) {
    err << "error: " << ex.what() << "\n";
    return kExitRuntime;
  }
  return usage_failure(err, "no subcommand");
}

}  // namespace cyin::cli
