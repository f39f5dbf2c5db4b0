#pragma once

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "hml/common.hpp"
#include "hml/taxonomy.hpp"

namespace hml {

/// Top-1 recall per label class; classes with no support are absent.
std::map<ClassId, double> per_class_recall(std::span<const ClassId> predictions, std::span<const ClassId> labels);

std::map<ClassId, long> label_support(std::span<const ClassId> labels);

struct RecallSummary {
  double mean_recall = 0.0;     // unweighted over classes
  double overall_recall = 0.0;  // support-weighted
  double mean_at = 0.0;         // (mean + overall) / 2
};

RecallSummary aggregate(const std::map<ClassId, double>& per_class, const std::map<ClassId, long>& support);

/// Overall recall where predicting a fine class whose coarse parent is the
/// label also counts as correct.
double hierarchical_recall(std::span<const ClassId> predictions, std::span<const ClassId> labels,
                           const PredicateTree& tree, const std::vector<std::string>& class_names);

struct MetricsReport {
  std::map<ClassId, double> per_class_recall;
  std::map<ClassId, long> support;
  double mean_recall = 0.0;
  double overall_recall = 0.0;
  double mean_at = 0.0;
  double hierarchical_recall = 0.0;

  /// Unweighted mean recall over the listed classes that have support; NaN if none do.
  double mean_recall_over(std::span<const ClassId> classes) const;
};

MetricsReport evaluate(std::span<const ClassId> predictions, std::span<const ClassId> labels,
                       const PredicateTree& tree, const std::vector<std::string>& class_names);

/// Per-class rows (class, support, recall) followed by a summary block.
void write_metrics_csv(const MetricsReport& report, const std::vector<std::string>& class_names,
                       const std::filesystem::path& path);

}  // namespace hml
