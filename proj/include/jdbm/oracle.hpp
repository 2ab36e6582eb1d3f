/*
 * SPDX-License-Identifier: Apache-2.0
 */
#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>

#include "jdbm/clamp.hpp"
#include "jdbm/model.hpp"
#include "jdbm/parallel.hpp"

namespace jdbm {

/// Brute-force exact inference for small models.
///
/// The enumeration runs over the free units of h1 only. Given h1 the visible
/// layer is factorized, and (h2, y) form a small mixture over classes, so both
/// are summed in closed form. The budget bounds the number of enumerated
/// configurations; exceeding it throws BudgetExceeded, never truncates.
struct OracleOptions {
  std::uint64_t budget = std::uint64_t{1} << 22;
  Exec exec = Exec::parallel;
};

class BudgetExceeded : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Per-variable marginals. For clamped units the entry is the clamped value.
struct Marginals {
  Vec v;
  Vec h1;
  Vec h2;
  Vec y;
};

/// log sum over the free variables of exp(-E) with the clamped ones fixed.
double exact_log_sum(const DbmParams& params, const ClampSpec& clamp, const OracleOptions& opt = {});

double exact_log_partition(const DbmParams& params, const OracleOptions& opt = {});

/// log P(clamped variables = clamped values).
double exact_log_marginal(const DbmParams& params, const ClampSpec& clamp, const OracleOptions& opt = {});

/// log P(v, y) with h marginalized. `label` is ignored when k = 0.
double exact_log_joint(const DbmParams& params, const Vec& v, int label, const OracleOptions& opt = {});

Marginals exact_posterior_marginals(const DbmParams& params, const ClampSpec& clamp,
                                    const OracleOptions& opt = {});

/// Expected sufficient statistics E[stats | clamp] (see accumulate_statistics).
DbmParams exact_expected_statistics(const DbmParams& params, const ClampSpec& clamp,
                                    const OracleOptions& opt = {});

/// Exact log P(masked observed variables | conditioned-on observed variables),
/// hidden units marginalized. Empty mask gives 0.
double exact_inpaint_logprob(const DbmParams& params, const Example& ex, const MaskSet& mask,
                             const OracleOptions& opt = {});

/// Gradient of the mean of log P(v, y) over the batch.
ParamGradient exact_loglik_gradient(const DbmParams& params, std::span<const Example> batch,
                                    const OracleOptions& opt = {});

/// Gradient of the mean of log P(clamped values) over a batch of clamps.
ParamGradient exact_clamped_loglik_gradient(const DbmParams& params, std::span<const ClampSpec> clamps,
                                            const OracleOptions& opt = {});

/// Independent second implementation: enumerates every unit (y outermost,
/// then h2, h1, v) and evaluates the energy with scalar loops. Exponentially
/// slower; meant for cross-checks on tiny models only.
namespace brute {

double energy(const DbmParams& params, const FullState& state);
double log_sum(const DbmParams& params, const ClampSpec& clamp, std::uint64_t budget = std::uint64_t{1} << 22);
double log_partition(const DbmParams& params, std::uint64_t budget = std::uint64_t{1} << 22);
Marginals marginals(const DbmParams& params, const ClampSpec& clamp,
                    std::uint64_t budget = std::uint64_t{1} << 22);

}  // namespace brute

}  // namespace jdbm
