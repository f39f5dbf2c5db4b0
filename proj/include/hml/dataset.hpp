#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "hml/common.hpp"
#include "hml/embeddings.hpp"
#include "hml/taxonomy.hpp"

namespace hml {

enum class Split : std::uint8_t { Train, Val, Test };

std::string_view to_string(Split split);
Split parse_split(std::string_view text);

/// Two-level synthetic stand-in for a mixed-granularity, long-tailed label set.
/// Coarse classes are ids [0, num_coarse); fine class j (Zipf rank j + 1) has
/// id num_coarse + j and coarse parent j % num_coarse.
struct GeneratorSpec {
  int num_coarse = 4;
  int fine_per_coarse = 3;
  int dim = 16;
  double spread = 0.35;
  double zipf_s = 1.5;
  double p_coarse = 0.3;
  int num_instances = 25000;
  double train_fraction = 0.8;
  double val_fraction = 0.1;
  double test_fraction = 0.1;
  // Synthetic label-name embeddings: children sit near their parent's vector.
  int embedding_dim = 32;
  double embedding_noise = 0.25;

  int num_fine() const { return num_coarse * fine_per_coarse; }
  int num_classes() const { return num_coarse + num_fine(); }
  void validate() const;
};

struct LabeledDataset {
  int dim = 0;
  std::vector<std::string> class_names;
  std::vector<ClassId> parent;  // generator hierarchy, -1 for roots
  std::vector<Vector> features;
  std::vector<ClassId> fine_labels;
  std::vector<ClassId> observed_labels;
  std::vector<Split> split;
  std::vector<long> counts;  // observed-label counts over the whole dataset

  std::size_t size() const noexcept { return features.size(); }
  int num_classes() const noexcept { return static_cast<int>(class_names.size()); }
  ClassId class_id(const std::string& name) const;
  std::vector<std::size_t> indices(Split which) const;

  /// Throws if lengths disagree, counts are stale, or an observed label is
  /// neither the fine label nor one of its ancestors.
  void validate() const;
};

/// Normalized Zipf weights rank^(-s) / sum for ranks 1..n.
Vector zipf_weights(int n, double s);

LabeledDataset generate_synthetic(const GeneratorSpec& spec, std::uint64_t seed);

/// Exact per-class observed-label counts over the given instances.
std::map<ClassId, long> class_counts(const LabeledDataset& dataset, std::span<const std::size_t> subset);

/// Vocabulary with subsumption counts over one split: a class's count is the
/// number of instances it correctly describes (its own observed labels plus
/// those of all descendants). Sorted for clustering.
std::vector<PredicateCount> label_vocabulary(const LabeledDataset& dataset, Split which);

/// Deterministic label-name embeddings reflecting the generator hierarchy.
EmbeddingTable label_embeddings(const GeneratorSpec& spec, const LabeledDataset& dataset, std::uint64_t seed);

/// Persistence: features file (one row of `dim` floats per instance) and a
/// labels file (instance id, fine label, observed label, split tag) whose
/// leading comment lines carry the class table.
void write_dataset(const LabeledDataset& dataset, const std::filesystem::path& features_path,
                   const std::filesystem::path& labels_path);
LabeledDataset read_dataset(const std::filesystem::path& features_path, const std::filesystem::path& labels_path);

}  // namespace hml
