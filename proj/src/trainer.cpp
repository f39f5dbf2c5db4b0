#include "hml/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

namespace hml {

void TrainConfig::validate() const {
  require(batch_size >= 1, ErrorKind::Config, "batch_size must be at least 1");
  require(learning_rate > 0.0, ErrorKind::Config, "learning_rate must be positive");
  require(momentum >= 0.0 && momentum < 1.0, ErrorKind::Config, "momentum must lie in [0, 1)");
  require(lr_decay >= 1.0, ErrorKind::Config, "lr_decay must be at least 1");
  require(plateau_patience >= 1 && eval_every >= 1, ErrorKind::Config, "plateau settings must be positive");
  require(!max_iterations.empty(), ErrorKind::Config, "max_iterations must list at least one budget");
  for (long it : max_iterations) require(it >= 1, ErrorKind::Config, "iteration budgets must be positive");
  require(iteration_scale > 0.0, ErrorKind::Config, "iteration_scale must be positive");
  require(lambda >= 0.0, ErrorKind::Config, "lambda must be nonnegative");
  require(gamma >= 0.0 && gamma < 1.0, ErrorKind::Config, "gamma must lie in [0, 1)");
  require(epsilon > 0.0, ErrorKind::Config, "epsilon must be positive");
  for (auto h : hidden) require(h > 0, ErrorKind::Config, "hidden layer sizes must be positive");
}

long TrainConfig::iterations_for(int stage) const {
  const auto idx = std::min(static_cast<std::size_t>(std::max(stage, 1) - 1), max_iterations.size() - 1);
  return std::max(1L, std::lround(static_cast<double>(max_iterations[idx]) * iteration_scale));
}

namespace {

Architecture make_arch(const TrainConfig& cfg, const LabeledDataset& data) {
  Architecture arch;
  arch.sizes.push_back(static_cast<std::size_t>(data.dim));
  for (auto h : cfg.hidden) arch.sizes.push_back(h);
  arch.sizes.push_back(static_cast<std::size_t>(data.num_classes()));
  return arch;
}

double validation_mean_recall(const ParamVector& params, const LabeledDataset& data,
                              std::span<const std::size_t> val) {
  if (val.empty()) return 0.0;
  std::vector<ClassId> preds = predict_all(params, data, val);
  std::vector<ClassId> labels;
  for (std::size_t i : val) labels.push_back(data.observed_labels[i]);
  auto recall = per_class_recall(preds, labels);
  double sum = 0.0;
  for (const auto& [c, r] : recall) sum += r;
  return sum / static_cast<double>(recall.size());
}

/// Loss terms for one batch at fixed parameters.
struct BatchTerms {
  LossBundle cb;
  std::optional<LossBundle> cr;
  std::optional<LossBundle> mr;
  LossBundle total;
  std::vector<ForwardRecord> records;
};

}  // namespace

StageArtifacts train_stage(int k, const StageInputs& inputs, const StageArtifacts* prev, const TrainConfig& cfg,
                           std::uint64_t seed, StepObserver* observer) {
  cfg.validate();
  require(k >= 1, ErrorKind::Validation, "stage index must be at least 1");
  require((prev == nullptr) == (k == 1), ErrorKind::Validation,
          "previous-stage artifacts must be given exactly when k > 1");
  const LabeledDataset& data = inputs.data;
  const StageDataset& stage = inputs.stage;
  require(!stage.indices.empty(), ErrorKind::Validation, "stage " + std::to_string(k) + " has no training instances");

  const Architecture arch = make_arch(cfg, data);
  if (prev) {
    require(prev->params.arch == arch, ErrorKind::Shape, "previous stage used a different architecture");
    require(prev->stage_index == k - 1, ErrorKind::Validation, "artifact chain out of order");
  }

  std::set<ClassId> seen;
  if (prev) seen.insert(prev->seen_classes.begin(), prev->seen_classes.end());
  std::vector<ClassId> old_classes(seen.begin(), seen.end());
  seen.insert(stage.classes.begin(), stage.classes.end());
  for (const auto& [c, n] : stage.counts) seen.insert(c);

  std::vector<std::size_t> val;
  for (std::size_t i : inputs.val_indices)
    if (seen.count(data.observed_labels[i])) val.push_back(i);

  Vector weights = cb_weights(stage.counts, cfg.gamma, arch.num_classes());
  if (cfg.normalize_cb) normalize_weights(weights);

  const bool with_cr = prev && cfg.use_cr && !old_classes.empty();
  const bool with_mr = prev && cfg.use_mr;

  ParamVector params = init_params(arch, seed);
  const std::size_t P = params.size();
  TrackerState tracker = TrackerState::zeros(P, cfg.epsilon);
  Vector velocity(P, 0.0);

  std::mt19937_64 rng(derive_seed(seed, "batches"));
  std::vector<std::size_t> order(stage.indices);
  std::size_t cursor = order.size();

  const long budget = cfg.iterations_for(k);
  const auto B = static_cast<std::size_t>(cfg.batch_size);
  double lr = cfg.learning_rate;
  double best_val = -1.0;
  int stale = 0;

  StageArtifacts out;
  out.stage_index = k;
  out.seen_classes.assign(seen.begin(), seen.end());
  out.train_log.reserve(static_cast<std::size_t>(budget));

  std::vector<std::size_t> batch(B);
  std::vector<ClassId> targets(B);
  std::vector<Vector> old_logits;
  long iteration = 0;

  auto numeric_failure = [&](const std::string& what) {
    double pmax = 0.0;
    for (double v : params.values) pmax = std::max(pmax, std::abs(v));
    std::ostringstream dump;
    dump << "stage " << k << " iteration " << iteration << ": " << what << " (lr=" << lr << " max|theta|=" << pmax
         << " batch=";
    for (std::size_t n = 0; n < B; ++n) dump << (n ? "," : "") << batch[n];
    dump << ")";
    fail(ErrorKind::Numeric, dump.str());
  };

  auto evaluate_batch = [&](const ParamVector& theta) {
    BatchTerms t;
    std::vector<Vector> logits;
    t.records.reserve(B);
    for (std::size_t n = 0; n < B; ++n) {
      t.records.push_back(forward(theta, data.features[batch[n]]));
      for (double z : t.records.back().logits())
        if (!std::isfinite(z)) numeric_failure("non-finite logit");
      logits.push_back(t.records.back().logits());
    }
    t.cb = cb_loss_batch(logits, targets, weights);
    if (with_cr) t.cr = cr_loss(logits, old_logits, old_classes, cfg.cr_support);
    if (with_mr) t.mr = mr_loss(theta.values, prev->params.values, prev->fisher, prev->omega);
    t.total = total_loss(t.cb, t.cr, t.mr, cfg.lambda);
    return t;
  };

  for (long t = 1; t <= budget; ++t) {
    iteration = t;
    for (std::size_t n = 0; n < B; ++n) {
      if (cursor == order.size()) {
        std::shuffle(order.begin(), order.end(), rng);
        cursor = 0;
      }
      batch[n] = order[cursor++];
      targets[n] = data.observed_labels[batch[n]];
    }
    if (with_cr) {
      old_logits.clear();
      for (std::size_t n = 0; n < B; ++n) old_logits.push_back(predict_logits(prev->params, data.features[batch[n]]));
    }

    BatchTerms before = evaluate_batch(params);

    Vector grad(P, 0.0);
    for (std::size_t n = 0; n < B; ++n) backward_into(params, before.records[n], before.total.dlogits[n], grad);
    if (!before.total.dparams.empty()) {
      for (std::size_t i = 0; i < P; ++i) grad[i] += before.total.dparams[i];
    }

    // Empirical Fisher from per-example log-likelihood gradients of the observed label.
    std::vector<Vector> loglik_grads;
    loglik_grads.reserve(B);
    for (std::size_t n = 0; n < B; ++n) {
      Vector d = softmax(before.records[n].logits());
      d[static_cast<std::size_t>(targets[n])] -= 1.0;
      Vector g(P, 0.0);
      backward_into(params, before.records[n], d, g);
      loglik_grads.push_back(std::move(g));
    }
    fisher_update(tracker, fisher_batch(loglik_grads));

    Vector step(P);
    for (std::size_t i = 0; i < P; ++i) {
      velocity[i] = cfg.momentum * velocity[i] + grad[i];
      step[i] = -lr * velocity[i];
      params.values[i] += step[i];
    }

    const double loss_after = evaluate_batch(params).total.value;
    Vector delta_l = taylor_delta(grad, step);
    omega_accumulate(tracker, delta_l, step, tracker.fisher, before.total.value, loss_after, cfg.omega_floor);

    LogRow row;
    row.stage = k;
    row.iteration = t;
    row.l_new = before.cb.value;
    row.l_cr = before.cr ? before.cr->value : 0.0;
    row.l_mr = before.mr ? before.mr->value : 0.0;
    row.total = before.total.value;
    row.lr = lr;
    row.total_after = loss_after;
    row.taylor_sum = std::accumulate(delta_l.begin(), delta_l.end(), 0.0);
    if (!std::isfinite(row.total) || !std::isfinite(loss_after)) {
      std::ostringstream terms;
      terms << "non-finite loss l_new=" << row.l_new << " l_cr=" << row.l_cr << " l_mr=" << row.l_mr
            << " total=" << row.total << " after_step=" << loss_after;
      numeric_failure(terms.str());
    }
    out.train_log.push_back(row);
    if (observer) observer->on_step(row, tracker);

    if (!val.empty() && t % cfg.eval_every == 0) {
      const double score = validation_mean_recall(params, data, val);
      if (score >= best_val + cfg.plateau_min_delta) {
        best_val = score;
        stale = 0;
      } else if (++stale >= cfg.plateau_patience) {
        lr /= cfg.lr_decay;
        stale = 0;
      }
    }
  }

  out.params = std::move(params);
  out.fisher = tracker.fisher;
  out.omega_raw = tracker.omega_raw;
  out.omega = omega_normalize(tracker.omega_raw, P);
  out.iterations = tracker.iteration;
  return out;
}

std::vector<ClassId> predict_all(const ParamVector& params, const LabeledDataset& dataset,
                                 std::span<const std::size_t> indices) {
  std::vector<ClassId> out;
  out.reserve(indices.size());
  for (std::size_t i : indices) out.push_back(predict_class(params, dataset.features[i]));
  return out;
}

double HmlResult::layer_mean_recall(int layer) const {
  std::vector<ClassId> classes;
  for (std::size_t c = 0; c < class_layer.size(); ++c)
    if (class_layer[c] == layer) classes.push_back(static_cast<ClassId>(c));
  return report.mean_recall_over(classes);
}

HmlResult resume_hml(const TrainConfig& cfg, const LabeledDataset& dataset, const PredicateTree& tree,
                     std::uint64_t root_seed, std::vector<StageArtifacts> completed, StepObserver* observer) {
  cfg.validate();
  const int L = tree.num_layers();
  require(static_cast<int>(completed.size()) <= L, ErrorKind::Validation, "more completed stages than tree layers");
  const auto train = dataset.indices(Split::Train);
  const auto val = dataset.indices(Split::Val);
  const auto test = dataset.indices(Split::Test);
  std::vector<StageDataset> stages = stage_split(dataset, tree, train);
  for (const auto& s : stages) {
    require(!s.indices.empty(), ErrorKind::Validation,
            "stage " + std::to_string(s.layer) + " has no training instances; reduce the layer count");
  }

  HmlResult result;
  result.stages = std::move(completed);
  for (int k = static_cast<int>(result.stages.size()) + 1; k <= L; ++k) {
    const StageArtifacts* prev = k > 1 ? &result.stages.back() : nullptr;
    StageInputs inputs{dataset, stages[static_cast<std::size_t>(k - 1)], val};
    result.stages.push_back(train_stage(k, inputs, prev, cfg, derive_seed(root_seed, "stage", static_cast<std::uint64_t>(k)), observer));
  }

  result.class_layer = class_layers(dataset, tree);
  require(!test.empty(), ErrorKind::Validation, "dataset has no test split");
  result.test_predictions = predict_all(result.stages.back().params, dataset, test);
  for (std::size_t i : test) result.test_labels.push_back(dataset.observed_labels[i]);
  result.report = evaluate(result.test_predictions, result.test_labels, tree, dataset.class_names);
  return result;
}

HmlResult run_hml(const TrainConfig& cfg, const LabeledDataset& dataset, const PredicateTree& tree,
                  std::uint64_t root_seed, StepObserver* observer) {
  return resume_hml(cfg, dataset, tree, root_seed, {}, observer);
}

void write_train_log(const StageArtifacts& stage, const std::filesystem::path& path) {
  std::ofstream out(path);
  require(static_cast<bool>(out), ErrorKind::Validation, "cannot write " + path.string());
  out << "stage,iteration,l_new,l_cr,l_mr,total,lr\n";
  for (const auto& r : stage.train_log) {
    out << r.stage << ',' << r.iteration << ',' << format_double(r.l_new) << ',' << format_double(r.l_cr) << ','
        << format_double(r.l_mr) << ',' << format_double(r.total) << ',' << format_double(r.lr) << '\n';
  }
}

}  // namespace hml
