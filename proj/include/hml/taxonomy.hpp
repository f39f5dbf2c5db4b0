#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "hml/common.hpp"
#include "hml/embeddings.hpp"

namespace hml {

struct PredicateCount {
  std::string predicate;
  long count = 0;
};

/// Sorts by count descending with lexicographic tie-break, the order the
/// clustering pass consumes.
void sort_by_frequency(std::vector<PredicateCount>& vocab);

struct PredicateGroup {
  std::vector<std::string> members;  // frequency order
  Vector representation;             // running mean of member embeddings
};

/// Greedy frequent-to-rare clustering. Each predicate joins the group whose
/// representation has the highest cosine similarity if that similarity is at
/// least `threshold`; otherwise it opens a new group.
std::vector<PredicateGroup> cluster_predicates(const std::vector<PredicateCount>& vocab_by_freq,
                                               const EmbeddingTable& table, double threshold);

/// Manual re-classification: moves `predicate` into the group containing
/// `anchor`. When `recompute` is set, both touched group representations are
/// rebuilt as member means; otherwise they are left as clustering produced them.
struct RegroupMove {
  std::string predicate;
  std::string anchor;
};

void apply_regroup(std::vector<PredicateGroup>& groups, const std::vector<RegroupMove>& moves,
                   const std::map<std::string, long>& counts, const EmbeddingTable& table,
                   bool recompute);

struct LayerOptions {
  int num_layers = 2;
  double rare_singleton_ratio = 0.01;
  std::map<std::string, int> overrides;  // predicate -> forced layer
};

class PredicateTree {
 public:
  PredicateTree() = default;
  PredicateTree(std::vector<PredicateGroup> groups, std::map<std::string, long> counts,
                std::map<std::string, int> layer_of, int num_layers, double threshold);

  const std::vector<PredicateGroup>& groups() const noexcept { return groups_; }
  int num_layers() const noexcept { return num_layers_; }
  double threshold() const noexcept { return threshold_; }
  bool contains(const std::string& predicate) const { return layer_of_.count(predicate) != 0; }

  int layer(const std::string& predicate) const;
  long count(const std::string& predicate) const;
  int group_of(const std::string& predicate) const;

  /// First (most frequent) member of the predicate's group, if that member sits
  /// on a strictly shallower layer; this is the coarse parent used for
  /// hierarchical credit.
  std::optional<std::string> coarse_parent(const std::string& predicate) const;

  /// Predicates on the given layer, in group order.
  std::vector<std::string> predicates_on(int layer) const;
  const std::map<std::string, int>& layers() const noexcept { return layer_of_; }

 private:
  std::vector<PredicateGroup> groups_;
  std::map<std::string, long> counts_;
  std::map<std::string, int> layer_of_;
  std::map<std::string, int> group_index_;
  int num_layers_ = 1;
  double threshold_ = 0.7;
};

/// Rank rule: the k-th most frequent member of each group goes to layer
/// min(k, L). Singleton groups far rarer than the layer-1 median go to layer L.
/// Overrides apply last.
PredicateTree build_layers(std::vector<PredicateGroup> groups, const std::map<std::string, long>& counts,
                           const LayerOptions& options, double threshold = 0.7);

/// Tab-separated export: group, predicate, count, layer (one row per predicate,
/// groups in order, members in frequency order).
void write_tree(const PredicateTree& tree, const std::filesystem::path& path);
PredicateTree read_tree(const std::filesystem::path& path);

std::vector<PredicateCount> read_vocab_counts(const std::filesystem::path& path);

}  // namespace hml
