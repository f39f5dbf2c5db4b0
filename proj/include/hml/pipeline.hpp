#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "hml/dataset.hpp"
#include "hml/taxonomy.hpp"
#include "hml/trainer.hpp"

namespace hml {

struct TaxonomyConfig {
  double tss = 0.70;
  int num_layers = 2;
  double rare_singleton_ratio = 0.01;
  std::map<std::string, int> overrides;
  std::vector<RegroupMove> regroup;
  bool recompute_after_override = false;
  std::optional<std::filesystem::path> embeddings;  // GloVe-style file; synthetic label embeddings otherwise
  std::optional<std::filesystem::path> vocab;       // predicate<TAB>count; only used by `cluster`
};

struct DataConfig {
  std::optional<std::filesystem::path> features;
  std::optional<std::filesystem::path> labels;
};

struct AblationConfig {
  std::vector<double> lambdas;
  std::vector<int> layers;
  std::vector<std::uint64_t> seeds;  // empty: the root seed only
  int jobs = 1;
};

struct RunConfig {
  std::uint64_t seed = 1;
  GeneratorSpec generator;
  TaxonomyConfig taxonomy;
  TrainConfig train;
  DataConfig data;
  AblationConfig ablation;

  void validate() const;
};

/// Parses the JSON config. Unknown keys are rejected; relative paths resolve
/// against `base_dir`.
RunConfig parse_config(const std::string& json_text, const std::filesystem::path& base_dir = {});
RunConfig load_config(const std::filesystem::path& path);
std::string config_to_json(const RunConfig& cfg);

LabeledDataset prepare_dataset(const RunConfig& cfg);

/// Clusters the dataset's class names (by training-split subsumption counts)
/// and assigns layers.
PredicateTree prepare_tree(const RunConfig& cfg, const LabeledDataset& dataset);

/// Clusters an external vocabulary file against an embedding file.
PredicateTree tree_from_files(const TaxonomyConfig& taxonomy);

struct RunOutputs {
  HmlResult result;
  std::filesystem::path dir;
};

/// Executes the whole HML pipeline and writes the run directory:
/// config.json (verbatim, when given), resolved_config.json, tree.tsv,
/// stage<k>.ckpt, stage<k>.tracker, stage<k>_train_log.csv, metrics.csv,
/// layers.csv. Every written checkpoint and snapshot is re-read and compared.
RunOutputs run_training(const RunConfig& cfg, const std::filesystem::path& out_dir,
                        const std::optional<std::string>& verbatim_config = std::nullopt);

/// Reloads completed stages from `run_dir` (integrity-checked) and finishes
/// the remaining ones with the directory's resolved config.
RunOutputs resume_training(const std::filesystem::path& run_dir);

void write_layer_recalls(const HmlResult& result, const std::filesystem::path& path);

}  // namespace hml
