#include "cyin/metrics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>

#include "cyin/errors.hpp"

namespace cyin {

namespace {

void check_pair(std::size_t a, std::size_t b, const char* what) {
  if (a == 0) throw ValidationError(std::string(what) + ": empty input");
  if (a != b)
    throw DimensionError(std::string(what) + ": " + std::to_string(a) + " predictions for " +
                         std::to_string(b) + " labels");
}

int bin7(double v) { return static_cast<int>(round_half_away(std::clamp(v, -3.0, 3.0))); }

}  // namespace

double round_half_away(double x) { return std::round(x); }

double acc7(std::span<const double> preds, std::span<const double> labels) {
  check_pair(preds.size(), labels.size(), "acc7");
  std::array<int, 7> total{}, hit{};
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const int y = bin7(labels[i]);
    total[y + 3]++;
    if (bin7(preds[i]) == y) hit[y + 3]++;
  }
  double sum = 0.0;
  int bins = 0;
  for (int k = 0; k < 7; ++k) {
    if (total[k] == 0) continue;
    sum += static_cast<double>(hit[k]) / total[k];
    ++bins;
  }
  return sum / bins;
}

double acc7_sample_mean(std::span<const double> preds, std::span<const double> labels) {
  check_pair(preds.size(), labels.size(), "acc7");
  std::size_t hit = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) hit += bin7(preds[i]) == bin7(labels[i]);
  return static_cast<double>(hit) / static_cast<double>(preds.size());
}

double binary_f1(std::span<const double> preds, std::span<const double> labels) {
  check_pair(preds.size(), labels.size(), "binary_f1");
  std::vector<int> p(preds.size()), y(labels.size());
  for (std::size_t i = 0; i < preds.size(); ++i) {
    p[i] = preds[i] >= 0.0 ? 1 : 0;
    y[i] = labels[i] >= 0.0 ? 1 : 0;
  }
  return weighted_f1(p, y, 2);
}

double mae(std::span<const double> preds, std::span<const double> labels) {
  check_pair(preds.size(), labels.size(), "mae");
  double s = 0.0;
  for (std::size_t i = 0; i < preds.size(); ++i) s += std::abs(preds[i] - labels[i]);
  return s / static_cast<double>(preds.size());
}

double pearson_corr(std::span<const double> preds, std::span<const double> labels) {
  check_pair(preds.size(), labels.size(), "corr");
  const double n = static_cast<double>(preds.size());
  double mp = 0.0, my = 0.0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    mp += preds[i];
    my += labels[i];
  }
  mp /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const double a = preds[i] - mp, b = labels[i] - my;
    sxy += a * b;
    sxx += a * a;
    syy += b * b;
  }
  if (sxx == 0.0 || syy == 0.0)
    throw DomainError("correlation undefined: zero variance in " +
                      std::string(sxx == 0.0 ? "predictions" : "labels"));
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

double accuracy(std::span<const int> preds, std::span<const int> labels) {
  check_pair(preds.size(), labels.size(), "accuracy");
  std::size_t hit = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) hit += preds[i] == labels[i];
  return static_cast<double>(hit) / static_cast<double>(preds.size());
}

double weighted_f1(std::span<const int> preds, std::span<const int> labels, int num_classes) {
  check_pair(preds.size(), labels.size(), "weighted_f1");
  std::vector<long> tp(num_classes), pred_count(num_classes), support(num_classes);
  for (std::size_t i = 0; i < preds.size(); ++i) {
    for (int c : {preds[i], labels[i]})
      if (c < 0 || c >= num_classes)
        throw ValidationError("class " + std::to_string(c) + " outside [0, " +
                              std::to_string(num_classes) + ")");
    pred_count[preds[i]]++;
    support[labels[i]]++;
    if (preds[i] == labels[i]) tp[labels[i]]++;
  }
  double f1 = 0.0;
  for (int c = 0; c < num_classes; ++c) {
    if (tp[c] == 0) continue;  // zero precision or recall: F1 = 0
    const double precision = static_cast<double>(tp[c]) / pred_count[c];
    const double recall = static_cast<double>(tp[c]) / support[c];
    const double w = static_cast<double>(support[c]) / static_cast<double>(preds.size());
    f1 += w * 2.0 * precision * recall / (precision + recall);
  }
  return f1;
}

std::vector<std::string> metric_names(Task task) {
  if (task == Task::Regression) return {"acc7", "acc7_sample", "f1", "mae", "corr"};
  return {"acc", "wf1"};
}

std::optional<double> MetricReport::get(const std::string& name) const {
  for (const auto& [k, v] : values)
    if (k == name) return v;
  return std::nullopt;
}

double MetricReport::at(const std::string& name) const {
  for (const auto& [k, v] : values) {
    if (k != name) continue;
    if (!v) throw DomainError("metric " + name + " is undefined for protocol " + protocol);
    return *v;
  }
  throw ValidationError("report has no metric " + name);
}

std::string format_metric(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

nlohmann::json MetricReport::to_json() const {
  nlohmann::json metrics = nlohmann::json::object();
  for (const auto& [k, v] : values) {
    // Fixed precision keeps reports byte-comparable across runs.
    metrics[k] = v ? nlohmann::json(std::stod(format_metric(*v))) : nlohmann::json(nullptr);
  }
  return {{"task", to_string(task)}, {"protocol", protocol}, {"seed", seed}, {"metrics", metrics}};
}

MetricReport MetricReport::from_json(const nlohmann::json& j) {
  MetricReport r;
  try {
    r.task = parse_task(j.at("task").get<std::string>());
    r.protocol = j.at("protocol").get<std::string>();
    r.seed = j.at("seed").get<std::uint64_t>();
    const auto& m = j.at("metrics");
    for (const auto& name : metric_names(r.task)) {
      const auto& v = m.at(name);
      r.values.emplace_back(name, v.is_null() ? std::nullopt : std::optional<double>(v.get<double>()));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("bad metric report: ") + e.what());
  }
  return r;
}

std::string MetricReport::csv_header(Task task) {
  std::string h = "protocol,seed";
  for (const auto& n : metric_names(task)) h += "," + n;
  return h;
}

std::string csv_field(const std::string& text) {
  if (text.find_first_of(",\"\n") == std::string::npos) return text;
  std::string out = "\"";
  for (char c : text) out += c == '"' ? std::string("\"\"") : std::string(1, c);
  return out + "\"";
}

std::string MetricReport::csv_row() const {
  std::string row = csv_field(protocol) + "," + std::to_string(seed);
  for (const auto& [k, v] : values) row += "," + (v ? format_metric(*v) : std::string("nan"));
  return row;
}

MetricReport compute_metrics(Task task, std::span<const double> preds,
                             std::span<const double> labels, int num_classes) {
  MetricReport r;
  r.task = task;
  if (task == Task::Regression) {
    std::optional<double> corr;
    try {
      corr = pearson_corr(preds, labels);
    } catch (const DomainError&) {
    }
    r.values = {{"acc7", acc7(preds, labels)},
                {"acc7_sample", acc7_sample_mean(preds, labels)},
                {"f1", binary_f1(preds, labels)},
                {"mae", mae(preds, labels)},
                {"corr", corr}};
    return r;
  }
  std::vector<int> p(preds.size()), y(labels.size());
  for (std::size_t i = 0; i < preds.size(); ++i) p[i] = static_cast<int>(preds[i]);
  for (std::size_t i = 0; i < labels.size(); ++i) y[i] = static_cast<int>(labels[i]);
  r.values = {{"acc", accuracy(p, y)}, {"wf1", weighted_f1(p, y, num_classes)}};
  return r;
}

}  // namespace cyin
