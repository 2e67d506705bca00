#pragma once

// Regression (Acc7, binary F1, MAE, Pearson correlation) and classification
// (accuracy, weighted F1) metrics, plus the serialized report.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "cyin/data_synth.hpp"

namespace cyin {

/// Round half away from zero.
double round_half_away(double x);

/// Class-balanced seven-bin accuracy; bins without true samples are skipped.
double acc7(std::span<const double> preds, std::span<const double> labels);
/// Fraction of samples whose rounded clamped prediction matches the label bin.
double acc7_sample_mean(std::span<const double> preds, std::span<const double> labels);
/// Support-weighted F1 over the negative (< 0) and non-negative classes.
double binary_f1(std::span<const double> preds, std::span<const double> labels);
double mae(std::span<const double> preds, std::span<const double> labels);
/// Throws DomainError when either side has zero variance.
double pearson_corr(std::span<const double> preds, std::span<const double> labels);

double accuracy(std::span<const int> preds, std::span<const int> labels);
double weighted_f1(std::span<const int> preds, std::span<const int> labels, int num_classes);

/// Metric columns of a report, in serialization order.
std::vector<std::string> metric_names(Task task);

struct MetricReport {
  Task task = Task::Regression;
  std::string protocol = "complete";
  std::uint64_t seed = 0;
  /// In metric_names(task) order; nullopt marks an undefined value.
  std::vector<std::pair<std::string, std::optional<double>>> values;

  std::optional<double> get(const std::string& name) const;
  double at(const std::string& name) const;  // throws if missing or undefined

  nlohmann::json to_json() const;
  static MetricReport from_json(const nlohmann::json& j);
  static std::string csv_header(Task task);
  std::string csv_row() const;
};

/// Regression: preds are scores. Classification: preds are argmax classes.
MetricReport compute_metrics(Task task, std::span<const double> preds,
                             std::span<const double> labels, int num_classes = 0);

/// Quotes a CSV field when it holds a comma, quote or newline.
std::string csv_field(const std::string& text);

/// Fixed-precision number formatting shared by every report writer.
std::string format_metric(double v);

}  // namespace cyin
