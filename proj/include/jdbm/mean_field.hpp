/*
 * SPDX-License-Identifier: Apache-2.0
 */
#pragma once

#include <span>
#include <vector>

#include "jdbm/clamp.hpp"
#include "jdbm/model.hpp"
#include "jdbm/parallel.hpp"

namespace jdbm {

/// Factorized variational parameters. Clamped coordinates hold their clamped
/// value exactly; y-hat is a distribution unless the label is zero-clamped.
struct MeanFieldState {
  Vec v;
  Vec h1;
  Vec h2;
  Vec y;
  ClampSpec clamp;
};

struct MeanFieldConfig {
  int max_sweeps = 30;
  double tol = 1e-6;
};

struct MeanFieldResult {
  MeanFieldState state;
  int sweeps = 0;
  bool converged = false;
  double last_change = 0.0;
};

/// Free binary coordinates at 0.5, free y-hat uniform, clamped ones exact.
MeanFieldState mf_init(const ClampSpec& clamp, const ModelSpec& spec);

enum class Block { hidden1, hidden2, label, visible };

/// Exact coordinate-ascent update of one block's free coordinates.
void mf_update(const DbmParams& params, MeanFieldState& state, Block block);

/// One sweep in the fixed order h1, h2, y, v. No damping.
MeanFieldState mf_sweep(const DbmParams& params, const MeanFieldState& state);
void mf_sweep_inplace(const DbmParams& params, MeanFieldState& state);

/// Sweeps until the largest change of any variational parameter in a sweep is
/// below tol, or max_sweeps. Non-convergence is reported, not thrown.
MeanFieldResult mf_infer(const DbmParams& params, const ClampSpec& clamp, const MeanFieldConfig& cfg = {});

/// Independent queries, one result per clamp.
std::vector<MeanFieldResult> mf_infer_batch(const DbmParams& params, std::span<const ClampSpec> clamps,
                                            const MeanFieldConfig& cfg = {}, Exec exec = Exec::parallel);

/// Largest change one more sweep would make.
double mf_residual(const DbmParams& params, const MeanFieldState& state);

/// E_Q[-E] + H(Q): the variational lower bound on log sum_free exp(-E), so
/// that elbo - log Z <= log P(clamped values). Uses 0 log 0 = 0.
double elbo(const DbmParams& params, const MeanFieldState& state);

/// Mean-field sufficient statistics (see accumulate_statistics).
void accumulate_statistics(DbmParams& acc, const MeanFieldState& state, double weight = 1.0);

}  // namespace jdbm
