#pragma once

#include <map>
#include <span>
#include <vector>

#include "hml/dataset.hpp"
#include "hml/taxonomy.hpp"

namespace hml {

struct StageDataset {
  int layer = 1;
  std::vector<std::size_t> indices;    // into the parent dataset
  std::vector<ClassId> classes;        // every class the tree places on this layer
  std::map<ClassId, long> counts;      // observed-label counts inside the stage
};

/// Partitions `subset` by the tree layer of each instance's observed label.
/// Returns exactly tree.num_layers() stages; stage k holds layer k + 1.
std::vector<StageDataset> stage_split(const LabeledDataset& dataset, const PredicateTree& tree,
                                      std::span<const std::size_t> subset);

std::vector<StageDataset> stage_split(const LabeledDataset& dataset, const PredicateTree& tree);

/// Layer of every class id, via its name in the tree.
std::vector<int> class_layers(const LabeledDataset& dataset, const PredicateTree& tree);

}  // namespace hml
