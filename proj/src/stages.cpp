#include "hml/stages.hpp"

#include <numeric>

namespace hml {

std::vector<int> class_layers(const LabeledDataset& dataset, const PredicateTree& tree) {
  std::vector<int> layers;
  for (const auto& name : dataset.class_names) {
    require(tree.contains(name), ErrorKind::Validation, "class '" + name + "' is missing from the predicate tree");
    layers.push_back(tree.layer(name));
  }
  return layers;
}

std::vector<StageDataset> stage_split(const LabeledDataset& dataset, const PredicateTree& tree,
                                      std::span<const std::size_t> subset) {
  const int L = tree.num_layers();
  std::vector<StageDataset> stages(static_cast<std::size_t>(L));
  for (int k = 0; k < L; ++k) stages[static_cast<std::size_t>(k)].layer = k + 1;

  std::vector<int> layer_of(static_cast<std::size_t>(dataset.num_classes()), 0);
  for (int c = 0; c < dataset.num_classes(); ++c) {
    const auto& name = dataset.class_names[static_cast<std::size_t>(c)];
    if (!tree.contains(name)) continue;
    int layer = tree.layer(name);
    layer_of[static_cast<std::size_t>(c)] = layer;
    stages[static_cast<std::size_t>(layer - 1)].classes.push_back(c);
  }

  for (std::size_t i : subset) {
    require(i < dataset.size(), ErrorKind::Validation, "stage_split: index out of range");
    ClassId label = dataset.observed_labels[i];
    int layer = layer_of[static_cast<std::size_t>(label)];
    if (layer == 0) {
      fail(ErrorKind::Validation,
           "label '" + dataset.class_names[static_cast<std::size_t>(label)] + "' does not appear in the predicate tree");
    }
    auto& stage = stages[static_cast<std::size_t>(layer - 1)];
    stage.indices.push_back(i);
    ++stage.counts[label];
  }
  return stages;
}

std::vector<StageDataset> stage_split(const LabeledDataset& dataset, const PredicateTree& tree) {
  std::vector<std::size_t> all(dataset.size());
  std::iota(all.begin(), all.end(), 0);
  return stage_split(dataset, tree, all);
}

}  // namespace hml
