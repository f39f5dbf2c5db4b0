#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include "hml/common.hpp"

namespace hml {

/// Online diagonal Fisher estimate and raw importance accumulator for one stage.
struct TrackerState {
  Vector fisher;     // running mean of per-iteration Fisher estimates
  Vector omega_raw;  // accumulated importance, never decreases
  long iteration = 0;
  double epsilon = 1e-8;

  static TrackerState zeros(std::size_t num_params, double epsilon = 1e-8);
};

/// Mean of squared per-example log-likelihood gradients (the diagonal of the
/// empirical Fisher over the batch).
Vector fisher_batch(const std::vector<Vector>& grads_loglik);

/// Running-mean update: F_t = (B_t + (t - 1) F_{t-1}) / t.
void fisher_update(TrackerState& state, std::span<const double> fisher_batch_t);

/// Per-parameter first-order loss decrease: -grad_i * step_i.
Vector taylor_delta(std::span<const double> grad, std::span<const double> step);

/// Importance increment for one optimizer step. A step that raised the loss
/// contributes nothing; with `floor_negative` each coordinate's contribution
/// is clamped at zero so omega_raw is monotone.
void omega_accumulate(TrackerState& state, std::span<const double> delta_l, std::span<const double> step,
                      std::span<const double> fisher_t, double loss_before, double loss_after,
                      bool floor_negative = true);

/// sigmoid(log10(P * raw_i / sum(raw))); zero entries map to 0.
Vector omega_normalize(std::span<const double> omega_raw, std::size_t num_params);

double sigmoid(double x);

/// 0.5 * sum_i F_i delta_i^2.
double kl_quadratic(std::span<const double> fisher, std::span<const double> delta);

/// Snapshot with separate fisher / omega_raw / omega sections in hex floats.
struct TrackerSnapshot {
  long iteration = 0;
  double epsilon = 1e-8;
  Vector fisher;
  Vector omega_raw;
  Vector omega;
};

void write_tracker_snapshot(const TrackerSnapshot& snapshot, const std::filesystem::path& path);
TrackerSnapshot read_tracker_snapshot(const std::filesystem::path& path);

}  // namespace hml
