#include "hml/losses.hpp"

#include <cmath>

namespace hml {

Vector cb_weights(const std::map<ClassId, long>& counts, double gamma, std::size_t num_classes) {
  require(gamma >= 0.0 && gamma < 1.0, ErrorKind::Config, "class-balance gamma must lie in [0, 1)");
  Vector w(num_classes, 0.0);
  for (const auto& [c, n] : counts) {
    require(c >= 0 && static_cast<std::size_t>(c) < num_classes, ErrorKind::Shape, "cb_weights: class out of range");
    require(n >= 1, ErrorKind::Validation, "cb_weights: class counts must be at least 1");
    w[static_cast<std::size_t>(c)] = (1.0 - gamma) / (1.0 - std::pow(gamma, static_cast<double>(n)));
  }
  return w;
}

void normalize_weights(Vector& weights) {
  double total = 0.0;
  std::size_t present = 0;
  for (double w : weights) {
    if (w > 0.0) {
      total += w;
      ++present;
    }
  }
  if (present == 0) return;
  const double scale = static_cast<double>(present) / total;
  for (double& w : weights) w *= scale;
}

LossBundle cb_loss(std::span<const double> logits, ClassId target, std::span<const double> weights) {
  require(logits.size() == weights.size(), ErrorKind::Shape, "cb_loss: weights and logits differ in length");
  require(target >= 0 && static_cast<std::size_t>(target) < logits.size(), ErrorKind::Shape,
          "cb_loss: target out of range");
  const double w = weights[static_cast<std::size_t>(target)];
  require(w > 0.0, ErrorKind::Validation,
          "cb_loss: target class " + std::to_string(target) + " has zero weight (not part of this stage)");
  Vector logp = log_softmax(logits);
  LossBundle out;
  out.value = -w * logp[static_cast<std::size_t>(target)];
  Vector d(logits.size());
  for (std::size_t i = 0; i < d.size(); ++i) d[i] = w * std::exp(logp[i]);
  d[static_cast<std::size_t>(target)] -= w;
  out.dlogits.push_back(std::move(d));
  return out;
}

LossBundle cb_loss_batch(const std::vector<Vector>& logits, std::span<const ClassId> targets,
                         std::span<const double> weights) {
  require(logits.size() == targets.size() && !logits.empty(), ErrorKind::Shape,
          "cb_loss_batch: need one target per logit row");
  const double inv = 1.0 / static_cast<double>(logits.size());
  LossBundle out;
  for (std::size_t n = 0; n < logits.size(); ++n) {
    LossBundle one = cb_loss(logits[n], targets[n], weights);
    out.value += inv * one.value;
    for (double& d : one.dlogits.front()) d *= inv;
    out.dlogits.push_back(std::move(one.dlogits.front()));
  }
  return out;
}

namespace {

Vector gather(std::span<const double> v, std::span<const ClassId> ids) {
  Vector out;
  out.reserve(ids.size());
  for (ClassId c : ids) out.push_back(v[static_cast<std::size_t>(c)]);
  return out;
}

}  // namespace

LossBundle cr_loss(const std::vector<Vector>& new_logits, const std::vector<Vector>& old_logits,
                   std::span<const ClassId> old_class_ids, CrSupport support) {
  require(!old_class_ids.empty(), ErrorKind::Validation, "cr_loss: no old classes (undefined in the first stage)");
  require(new_logits.size() == old_logits.size() && !new_logits.empty(), ErrorKind::Shape,
          "cr_loss: batches must be nonempty and of equal length");
  const double inv = 1.0 / static_cast<double>(new_logits.size());

  LossBundle out;
  for (std::size_t n = 0; n < new_logits.size(); ++n) {
    const Vector& z_new = new_logits[n];
    const Vector& z_old = old_logits[n];
    require(z_new.size() == z_old.size(), ErrorKind::Shape, "cr_loss: logit rows differ in length");
    for (ClassId c : old_class_ids) {
      require(c >= 0 && static_cast<std::size_t>(c) < z_new.size(), ErrorKind::Shape, "cr_loss: class out of range");
    }
    Vector d(z_new.size(), 0.0);
    if (support == CrSupport::Restricted) {
      Vector p = softmax(gather(z_new, old_class_ids));
      Vector q = softmax(gather(z_old, old_class_ids));
      Vector g(p.size());
      double gp = 0.0;
      for (std::size_t j = 0; j < p.size(); ++j) {
        const double diff = p[j] - q[j];
        out.value += inv * diff * diff;
        g[j] = 2.0 * diff;
        gp += g[j] * p[j];
      }
      for (std::size_t j = 0; j < p.size(); ++j) {
        d[static_cast<std::size_t>(old_class_ids[j])] += inv * p[j] * (g[j] - gp);
      }
    } else {
      Vector p = softmax(z_new);
      Vector q = softmax(z_old);
      Vector g(p.size(), 0.0);
      for (ClassId c : old_class_ids) {
        const auto j = static_cast<std::size_t>(c);
        const double diff = p[j] - q[j];
        out.value += inv * diff * diff;
        g[j] = 2.0 * diff;
      }
      double gp = 0.0;
      for (std::size_t k = 0; k < p.size(); ++k) gp += g[k] * p[k];
      for (std::size_t k = 0; k < p.size(); ++k) d[k] = inv * p[k] * (g[k] - gp);
    }
    out.dlogits.push_back(std::move(d));
  }
  return out;
}

LossBundle mr_loss(std::span<const double> params, std::span<const double> prev_params,
                   std::span<const double> fisher_prev, std::span<const double> omega_prev) {
  const std::size_t P = params.size();
  require(P > 0 && prev_params.size() == P && fisher_prev.size() == P && omega_prev.size() == P, ErrorKind::Shape,
          "mr_loss: all four vectors must have the same nonzero length");
  LossBundle out;
  out.dparams.assign(P, 0.0);
  const double inv = 1.0 / static_cast<double>(P);
  for (std::size_t i = 0; i < P; ++i) {
    if (!(fisher_prev[i] >= 0.0) || !(omega_prev[i] >= 0.0)) {
      fail(ErrorKind::StateCorruption, "mr_loss: negative or NaN Fisher/importance entry at " + std::to_string(i));
    }
    const double weight = fisher_prev[i] + omega_prev[i];
    const double delta = params[i] - prev_params[i];
    out.value += weight * delta * delta * inv;
    out.dparams[i] = 2.0 * weight * delta * inv;
  }
  return out;
}

LossBundle total_loss(const LossBundle& new_term, const std::optional<LossBundle>& cr,
                      const std::optional<LossBundle>& mr, double lambda) {
  LossBundle out = new_term;
  if (cr) {
    require(cr->dlogits.size() == out.dlogits.size(), ErrorKind::Shape, "total_loss: CR batch size differs");
    out.value += cr->value;
    for (std::size_t n = 0; n < out.dlogits.size(); ++n) {
      require(cr->dlogits[n].size() == out.dlogits[n].size(), ErrorKind::Shape, "total_loss: CR logit width differs");
      for (std::size_t k = 0; k < out.dlogits[n].size(); ++k) out.dlogits[n][k] += cr->dlogits[n][k];
    }
  }
  if (mr) {
    out.value += lambda * mr->value;
    if (out.dparams.empty()) out.dparams.assign(mr->dparams.size(), 0.0);
    require(out.dparams.size() == mr->dparams.size(), ErrorKind::Shape, "total_loss: MR gradient length differs");
    for (std::size_t i = 0; i < out.dparams.size(); ++i) out.dparams[i] += lambda * mr->dparams[i];
  }
  return out;
}

}  // namespace hml
