#include "hml/evaluation.hpp"

#include <cmath>
#include <fstream>
#include <limits>

namespace hml {

std::map<ClassId, double> per_class_recall(std::span<const ClassId> predictions, std::span<const ClassId> labels) {
  require(predictions.size() == labels.size(), ErrorKind::Shape, "per_class_recall: length mismatch");
  require(!labels.empty(), ErrorKind::Validation, "per_class_recall: no instances");
  std::map<ClassId, long> hits;
  std::map<ClassId, long> total;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    ++total[labels[i]];
    if (predictions[i] == labels[i]) ++hits[labels[i]];
  }
  std::map<ClassId, double> out;
  for (const auto& [c, n] : total) out[c] = static_cast<double>(hits[c]) / static_cast<double>(n);
  return out;
}

std::map<ClassId, long> label_support(std::span<const ClassId> labels) {
  std::map<ClassId, long> out;
  for (ClassId c : labels) ++out[c];
  return out;
}

RecallSummary aggregate(const std::map<ClassId, double>& per_class, const std::map<ClassId, long>& support) {
  require(!per_class.empty(), ErrorKind::Validation, "aggregate: no classes");
  require(per_class.size() == support.size(), ErrorKind::Validation, "aggregate: recall and support keys differ");
  RecallSummary s;
  double weighted = 0.0;
  double total = 0.0;
  for (const auto& [c, r] : per_class) {
    auto it = support.find(c);
    require(it != support.end(), ErrorKind::Validation, "aggregate: recall and support keys differ");
    s.mean_recall += r;
    weighted += r * static_cast<double>(it->second);
    total += static_cast<double>(it->second);
  }
  s.mean_recall /= static_cast<double>(per_class.size());
  require(total > 0.0, ErrorKind::Validation, "aggregate: zero total support");
  s.overall_recall = weighted / total;
  s.mean_at = 0.5 * (s.mean_recall + s.overall_recall);
  return s;
}

double hierarchical_recall(std::span<const ClassId> predictions, std::span<const ClassId> labels,
                           const PredicateTree& tree, const std::vector<std::string>& class_names) {
  require(predictions.size() == labels.size() && !labels.empty(), ErrorKind::Shape,
          "hierarchical_recall: need equal, nonempty inputs");
  auto name_of = [&](ClassId c) -> const std::string& {
    require(c >= 0 && static_cast<std::size_t>(c) < class_names.size(), ErrorKind::Validation,
            "hierarchical_recall: unknown class id " + std::to_string(c));
    const auto& name = class_names[static_cast<std::size_t>(c)];
    require(tree.contains(name), ErrorKind::Validation, "hierarchical_recall: class '" + name + "' not in tree");
    return name;
  };
  long hits = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto& label = name_of(labels[i]);
    const auto& pred = name_of(predictions[i]);
    if (pred == label) {
      ++hits;
      continue;
    }
    auto parent = tree.coarse_parent(pred);
    if (parent && *parent == label) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(labels.size());
}

double MetricsReport::mean_recall_over(std::span<const ClassId> classes) const {
  double sum = 0.0;
  int n = 0;
  for (ClassId c : classes) {
    auto it = per_class_recall.find(c);
    if (it == per_class_recall.end()) continue;
    sum += it->second;
    ++n;
  }
  return n == 0 ? std::numeric_limits<double>::quiet_NaN() : sum / n;
}

MetricsReport evaluate(std::span<const ClassId> predictions, std::span<const ClassId> labels,
                       const PredicateTree& tree, const std::vector<std::string>& class_names) {
  MetricsReport r;
  r.per_class_recall = per_class_recall(predictions, labels);
  r.support = label_support(labels);
  RecallSummary s = aggregate(r.per_class_recall, r.support);
  // Same quantity as the support-weighted mean, but from integer hit counts so
  // it compares exactly against hierarchical_recall.
  long hits = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) hits += predictions[i] == labels[i];
  r.mean_recall = s.mean_recall;
  r.overall_recall = static_cast<double>(hits) / static_cast<double>(labels.size());
  r.mean_at = 0.5 * (r.mean_recall + r.overall_recall);
  r.hierarchical_recall = hierarchical_recall(predictions, labels, tree, class_names);
  return r;
}

void write_metrics_csv(const MetricsReport& report, const std::vector<std::string>& class_names,
                       const std::filesystem::path& path) {
  std::ofstream out(path);
  require(static_cast<bool>(out), ErrorKind::Validation, "cannot write metrics " + path.string());
  out << "class,support,recall\n";
  for (const auto& [c, r] : report.per_class_recall) {
    out << class_names.at(static_cast<std::size_t>(c)) << ',' << report.support.at(c) << ',' << format_double(r)
        << '\n';
  }
  out << "summary,mean_recall,overall_recall,mean_at,hierarchical_recall\n";
  out << "summary," << format_double(report.mean_recall) << ',' << format_double(report.overall_recall) << ','
      << format_double(report.mean_at) << ',' << format_double(report.hierarchical_recall) << '\n';
}

}  // namespace hml
