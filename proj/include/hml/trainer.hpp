#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "hml/dataset.hpp"
#include "hml/evaluation.hpp"
#include "hml/losses.hpp"
#include "hml/network.hpp"
#include "hml/stages.hpp"
#include "hml/taxonomy.hpp"
#include "hml/trackers.hpp"

namespace hml {

struct TrainConfig {
  std::vector<std::size_t> hidden{32};
  int batch_size = 12;
  double learning_rate = 0.001;
  double momentum = 0.9;
  double lr_decay = 10.0;           // divide the learning rate by this on a plateau
  int plateau_patience = 5;         // evaluations without improvement
  double plateau_min_delta = 1e-4;  // required validation mean-recall gain
  int eval_every = 200;
  std::vector<long> max_iterations{8000, 16000};  // per stage, last entry repeats
  double iteration_scale = 0.25;
  double lambda = 0.5;
  double gamma = 0.999;
  double epsilon = 1e-8;
  bool use_cr = true;
  bool use_mr = true;
  CrSupport cr_support = CrSupport::Restricted;
  bool omega_floor = true;
  bool normalize_cb = true;

  void validate() const;
  /// Scaled iteration budget for 1-based stage k (never below 1).
  long iterations_for(int stage) const;
};

struct LogRow {
  int stage = 1;
  long iteration = 0;
  double l_new = 0.0;
  double l_cr = 0.0;
  double l_mr = 0.0;
  double total = 0.0;
  double lr = 0.0;
  double total_after = 0.0;  // same batch, after the step
  double taylor_sum = 0.0;   // sum of per-parameter first-order decreases
};

struct StageArtifacts {
  int stage_index = 1;
  ParamVector params;
  Vector fisher;
  Vector omega;      // normalized importance
  Vector omega_raw;
  long iterations = 0;
  std::vector<ClassId> seen_classes;  // classes of this and all earlier stages
  std::vector<LogRow> train_log;
};

/// Observer hook invoked after every optimizer step, with the tracker state
/// already updated. Used by diagnostics and tests.
struct StepObserver {
  virtual ~StepObserver() = default;
  virtual void on_step(const LogRow& row, const TrackerState& tracker) = 0;
};

struct StageInputs {
  const LabeledDataset& data;
  const StageDataset& stage;
  std::span<const std::size_t> val_indices;  // validation pool (filtered to seen classes)
};

/// One HML stage. The model is always freshly initialized from `seed`; the
/// previous stage's artifacts only enter through the CR and MR terms.
StageArtifacts train_stage(int k, const StageInputs& inputs, const StageArtifacts* prev, const TrainConfig& cfg,
                           std::uint64_t seed, StepObserver* observer = nullptr);

struct HmlResult {
  std::vector<StageArtifacts> stages;
  MetricsReport report;          // last-stage model on the full test split
  std::vector<int> class_layer;  // tree layer per class id
  std::vector<ClassId> test_predictions;
  std::vector<ClassId> test_labels;

  /// Mean per-class test recall over classes on the given tree layer.
  double layer_mean_recall(int layer) const;
};

/// Splits the training data by tree layer and trains stages 1..L in order,
/// chaining artifacts; evaluates the final model on the test split.
HmlResult run_hml(const TrainConfig& cfg, const LabeledDataset& dataset, const PredicateTree& tree,
                  std::uint64_t root_seed, StepObserver* observer = nullptr);

/// Continues a chain from already-completed stages (e.g. reloaded from disk).
HmlResult resume_hml(const TrainConfig& cfg, const LabeledDataset& dataset, const PredicateTree& tree,
                     std::uint64_t root_seed, std::vector<StageArtifacts> completed, StepObserver* observer = nullptr);

std::vector<ClassId> predict_all(const ParamVector& params, const LabeledDataset& dataset,
                                 std::span<const std::size_t> indices);

/// Columns: stage, iteration, l_new, l_cr, l_mr, total, lr.
void write_train_log(const StageArtifacts& stage, const std::filesystem::path& path);

}  // namespace hml
