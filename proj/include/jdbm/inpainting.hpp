/*
 * SPDX-License-Identifier: Apache-2.0
 */
#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "jdbm/clamp.hpp"
#include "jdbm/mean_field.hpp"
#include "jdbm/model.hpp"
#include "jdbm/ncg.hpp"
#include "jdbm/parallel.hpp"
#include "jdbm/random.hpp"

namespace jdbm {

/// Joint-training inpainting criterion.
///
/// For one example and one mask, the conditioned-on observed variables are
/// clamped to their data values, K mean-field sweeps are run from mf_init, and
/// the score is the log-probability the resulting factorized Q assigns to the
/// masked (inpainted) variables:
///
///   sum_{j masked} [ v_j log q_j + (1 - v_j) log(1 - q_j) ]  (+ log yhat_y)
///
/// The K sweeps form a fixed recurrent computation that is differentiated in
/// reverse mode.

/// Probabilities are floored at this value inside logs; the gradient is zero
/// where the floor is active.
inline constexpr double kProbFloor = 1e-12;

struct MaskConfig {
  /// Probability that an observed variable is conditioned on (clamped).
  double p = 0.5;
  /// Whether the label block takes part in the lottery.
  bool mask_label = true;
  int max_retries = 100;

  void validate() const;
};

/// Each visible pixel (and the label block) is conditioned on independently
/// with probability p; the rest is masked. Empty masks are redrawn up to
/// max_retries times, after which one uniformly chosen variable is forced in.
MaskSet sample_mask(const ModelSpec& spec, const MaskConfig& cfg, Rng& rng);

/// One mask per example; example i uses the stream derive_seed(seed, i).
std::vector<MaskSet> sample_masks(const ModelSpec& spec, std::size_t n, const MaskConfig& cfg, std::uint64_t seed);

/// Inputs of each of the K sweeps (trace.inputs[0] is the mf_init state) and
/// the state after the last sweep.
struct UnrollTrace {
  std::vector<MeanFieldState> inputs;
  MeanFieldState output;
};

UnrollTrace unroll(const DbmParams& params, const ClampSpec& clamp, int sweeps);

/// Score of a final mean-field state on the masked variables of `ex`.
double inpaint_score(const Example& ex, const MaskSet& mask, const MeanFieldState& q);

double inpaint_loss(const DbmParams& params, const Example& ex, const MaskSet& mask, int sweeps);

struct LossGrad {
  double loss = 0.0;
  ParamGradient grad;
};

/// inpaint_loss and its exact gradient through the unrolled sweeps.
LossGrad inpaint_grad(const DbmParams& params, const Example& ex, const MaskSet& mask, int sweeps);

struct BatchObjective {
  double value = 0.0;  // mean of -inpaint_loss
  ParamGradient grad;  // gradient of value
};

/// Minimization objective over a batch with one given mask per example.
BatchObjective minibatch_objective(const DbmParams& params, std::span<const Example> batch,
                                   std::span<const MaskSet> masks, int sweeps, Exec exec = Exec::parallel);

/// Same, drawing the masks with sample_masks(seed).
BatchObjective minibatch_objective(const DbmParams& params, std::span<const Example> batch, const MaskConfig& mask,
                                   int sweeps, std::uint64_t seed, Exec exec = Exec::parallel);

// --- training ----------------------------------------------------------------

struct JdbmTrainConfig {
  MaskConfig mask;
  int sweeps = 10;
  MinibatchCgConfig optimizer;
  Exec exec = Exec::parallel;
};

/// Mean-field generalized pseudolikelihood training of all layers at once with
/// minibatch nonlinear CG. Masks are drawn per batch and frozen while CG works
/// on that batch. Returns the final parameters.
DbmParams train_jdbm(const DbmParams& init, std::span<const Example> data, const JdbmTrainConfig& cfg,
                     const std::function<bool(const BatchRound&, const DbmParams&)>& on_batch = {},
                     const std::function<bool(int, const DbmParams&)>& on_epoch = {}, int first_epoch = 0);

/// Mean inpaint score over a data set with fixed per-example masks (used for
/// monitoring and the early-stopping protocol). Larger is better.
double mean_inpaint_score(const DbmParams& params, std::span<const Example> data, std::span<const MaskSet> masks,
                          int sweeps, Exec exec = Exec::parallel);

}  // namespace jdbm
