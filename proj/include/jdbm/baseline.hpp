/*
 * SPDX-License-Identifier: Apache-2.0
 */
#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "jdbm/mean_field.hpp"
#include "jdbm/model.hpp"
#include "jdbm/parallel.hpp"
#include "jdbm/random.hpp"

namespace jdbm {

// --- layerwise RBMs ----------------------------------------------------------

/// Binary RBM with an optional softmax label unit on the visible side.
struct RbmParams {
  Mat W;    // n_visible x n_hidden
  Vec b_vis;
  Vec b_hid;
  Mat W_y;  // n_hidden x k, k = 0 when there is no label
  Vec b_y;

  static RbmParams zeros(int n_visible, int n_hidden, int n_classes = 0);
  int n_visible() const { return static_cast<int>(W.rows()); }
  int n_hidden() const { return static_cast<int>(W.cols()); }
  int n_classes() const { return static_cast<int>(W_y.cols()); }
  void validate() const;
  bool all_finite() const;

  RbmParams& operator+=(const RbmParams& o);
  RbmParams& operator*=(double s);
  void add_scaled(const RbmParams& o, double s);
  double dot(const RbmParams& o) const;
};

/// Asymmetric input scaling used while pretraining the layers that end up in
/// the middle of the DBM. The bottom RBM sees 2 W'v on its hidden side and the
/// top RBM sees 2 W h on its visible side, so that h1 in the assembled DBM,
/// which receives input from both v and h2, is not over-driven.
struct RbmScaling {
  double hidden_input = 1.0;
  double visible_input = 1.0;
};

Vec rbm_hidden_input(const RbmParams& p, const RbmScaling& s, const Vec& v, const Vec& y);
Vec rbm_visible_input(const RbmParams& p, const RbmScaling& s, const Vec& h);

struct RbmTrainConfig {
  int n_hidden = 500;
  int epochs = 10;
  int batch_size = 100;
  double learning_rate = 0.05;
  /// Learning rate in epoch e is learning_rate / (1 + lr_decay * e).
  double lr_decay = 0.0;
  double momentum = 0.5;
  double final_momentum = 0.9;
  int momentum_switch_epoch = 5;
  double weight_decay = 2e-4;  // L2 on W and W_y
  int cd_k = 1;
  /// Persistent chains instead of chains restarted at the data.
  bool persistent = false;
  int n_chains = 0;  // persistent chain count; 0 means batch_size
  RbmScaling scaling;
  double init_stddev = 0.01;
  std::uint64_t seed = 0;
};

/// Negative-phase chains of an RBM: one row of v (and one label) per chain.
struct RbmChains {
  Mat v;
  std::vector<int> y;
};

/// One stochastic log-likelihood gradient estimate (positive minus negative
/// statistics, no weight decay). CD-k restarts `chains` at the batch; PCD
/// advances them cd_k steps.
RbmParams rbm_gradient(const RbmParams& p, const Mat& v_batch, std::span<const int> labels, RbmChains& chains,
                       const RbmTrainConfig& cfg, Rng& rng);

/// Data rows are examples and must be binary.
RbmParams train_rbm(const Mat& data, const RbmTrainConfig& cfg);
/// Top RBM over (h1, y): labels index the k-way softmax unit.
RbmParams train_top_rbm(const Mat& h1, std::span<const int> labels, int n_classes, const RbmTrainConfig& cfg);

/// Samples of h1 from the bottom RBM's posterior (or the probabilities when
/// use_mean), one row per data row.
Mat sample_hidden_layer(const RbmParams& bottom, const RbmScaling& scaling, const Mat& data, std::uint64_t seed,
                        bool use_mean = false);

/// W1 = bottom.W, W2 = top.W, W3 = top.W_y; b_v = bottom.b_vis,
/// b_h1 = bottom.b_hid, b_h2 = top.b_hid, b_y = top.b_y. Weights are carried
/// over unscaled: the doubling happened during pretraining, so that with h2 = 0
///
///   DBM h1 input = (bottom input - b_hid) / 2 + b_hid
///
/// where "bottom input" is the doubled pretraining input 2 W'v + b_hid.
DbmParams assemble_dbm(const RbmParams& bottom, const RbmParams& top);

// --- Gibbs sampling and PCD --------------------------------------------------

Vec sample_bernoulli(const Vec& probs, Rng& rng);
int sample_categorical(const Vec& probs, Rng& rng);

/// One block Gibbs sweep in the order h1 | (v, h2), h2 | (h1, y), y | h2,
/// v | h1. Each block is an exact conditional draw.
void gibbs_sweep(const DbmParams& params, FullState& state, Rng& rng);

/// Persistent chains, each with its own random stream.
struct ChainState {
  std::vector<FullState> states;
  std::vector<Rng> rngs;

  /// Uniformly random binary states, label uniform.
  static ChainState init(const ModelSpec& spec, int n_chains, std::uint64_t seed);
  int size() const { return static_cast<int>(states.size()); }
  /// Chain c gets the stream derive_seed(seed, c).
  void reseed(std::uint64_t seed);
};

/// Advances every chain `sweeps` sweeps; chains are independent.
void advance_chains(const DbmParams& params, ChainState& chains, int sweeps, Exec exec = Exec::parallel);

struct PcdConfig {
  int gibbs_sweeps = 5;
  MeanFieldConfig positive{.max_sweeps = 30, .tol = 1e-4};
  Exec exec = Exec::parallel;
};

/// Positive phase: mean field with (v, y) clamped. Negative phase: the chains
/// after `gibbs_sweeps` more sweeps. Returns mean positive minus mean negative
/// sufficient statistics; the chains are advanced in place.
ParamGradient pcd_step(const DbmParams& params, std::span<const Example> batch, ChainState& chains,
                       const PcdConfig& cfg = {});

/// Mean-field positive statistics of a batch (the first half of pcd_step).
DbmParams positive_statistics(const DbmParams& params, std::span<const Example> batch,
                              const MeanFieldConfig& mf, Exec exec = Exec::parallel);

struct PcdTrainConfig {
  int epochs = 10;
  int batch_size = 100;
  int n_chains = 0;  // 0 means batch_size
  double learning_rate = 0.005;
  double lr_decay = 0.0;
  double momentum = 0.5;
  double final_momentum = 0.9;
  int momentum_switch_epoch = 5;
  double weight_decay = 2e-4;
  PcdConfig step;
  std::uint64_t seed = 0;
};

/// Everything needed to continue training at an epoch boundary.
struct PcdState {
  DbmParams params;
  DbmParams velocity;
  ChainState chains;
  int epoch = 0;  // next epoch to run

  static PcdState start(const DbmParams& init, const PcdTrainConfig& cfg);
};

/// SGD with momentum over epochs [state.epoch, cfg.epochs). Every random draw
/// comes from (seed, epoch, batch), so stopping after an epoch and resuming
/// from the saved state reproduces the uninterrupted run exactly.
void train_pcd(PcdState& state, std::span<const Example> data, const PcdTrainConfig& cfg,
               const std::function<bool(const PcdState&)>& on_epoch = {});

DbmParams train_pcd(const DbmParams& init, std::span<const Example> data, const PcdTrainConfig& cfg);

}  // namespace jdbm
