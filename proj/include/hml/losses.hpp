#pragma once

#include <map>
#include <optional>
#include <span>
#include <vector>

#include "hml/common.hpp"
#include "hml/network.hpp"

namespace hml {

/// A loss value with its gradient. Logit-level losses fill `dlogits` (one row
/// per instance); parameter-level losses fill `dparams`.
struct LossBundle {
  double value = 0.0;
  std::vector<Vector> dlogits;
  Vector dparams;
};

/// Class-balance weights (1 - gamma) / (1 - gamma^n_i), indexed by class id.
/// Classes with no count get weight 0.
Vector cb_weights(const std::map<ClassId, long>& counts, double gamma, std::size_t num_classes);

/// Rescales the nonzero weights so they average to 1 (keeps the loss scale
/// comparable to plain cross-entropy regardless of gamma).
void normalize_weights(Vector& weights);

LossBundle cb_loss(std::span<const double> logits, ClassId target, std::span<const double> weights);

/// Batch mean of cb_loss.
LossBundle cb_loss_batch(const std::vector<Vector>& logits, std::span<const ClassId> targets,
                         std::span<const double> weights);

enum class CrSupport {
  Restricted,  // softmax over the old-class logits only
  Full,        // softmax over all logits, compared on the old classes
};

/// Mean over instances of the squared L2 distance between the new and old
/// models' softmax outputs on the old classes. Gradient flows only into the
/// new logits.
LossBundle cr_loss(const std::vector<Vector>& new_logits, const std::vector<Vector>& old_logits,
                   std::span<const ClassId> old_class_ids, CrSupport support = CrSupport::Restricted);

/// sum_i (F_i + Omega_i) (theta_i - theta_prev_i)^2 / P.
LossBundle mr_loss(std::span<const double> params, std::span<const double> prev_params,
                   std::span<const double> fisher_prev, std::span<const double> omega_prev);

/// l_new + l_CR + lambda * l_MR. `cr` and `mr` are absent in the first stage.
LossBundle total_loss(const LossBundle& new_term, const std::optional<LossBundle>& cr,
                      const std::optional<LossBundle>& mr, double lambda);

}  // namespace hml
