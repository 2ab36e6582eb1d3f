/*
 * SPDX-License-Identifier: Apache-2.0
 */
#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace jdbm {

/// f(x) with its gradient written into `grad`.
using ObjectiveFn = std::function<double(const Eigen::VectorXd& x, Eigen::VectorXd& grad)>;

struct CgConfig {
  int max_iters = 100;
  double c1 = 1e-4;  // sufficient decrease
  double c2 = 0.1;   // curvature (strong Wolfe)
  double grad_tol = 1e-8;
  /// Restart to steepest descent every n iterations; 0 means the dimension.
  int restart_every = 0;
  int max_line_evals = 40;
  /// Trial step for the very first line search; later ones scale the previous
  /// accepted step by the ratio of directional derivatives.
  double initial_step = 1.0;

  void validate() const;
};

enum class CgStatus { converged, max_iterations, line_search_failed, non_finite };
std::string to_string(CgStatus s);

struct CgIteration {
  double f = 0.0;          // after the step
  double grad_norm = 0.0;  // after the step
  double step = 0.0;
  int evaluations = 0;
  bool restarted = false;  // steepest-descent direction used
  bool armijo = false;     // sufficient-decrease condition held
  bool curvature = false;  // strong curvature condition held
};

struct CgResult {
  Eigen::VectorXd x;
  double f_initial = 0.0;
  double f = 0.0;
  double grad_norm = 0.0;
  CgStatus status = CgStatus::max_iterations;
  int iterations = 0;
  int evaluations = 0;
  std::vector<CgIteration> trace;
};

/// Polak-Ribiere-plus nonlinear conjugate gradient with a strong-Wolfe line
/// search (bracketing + zoom with safeguarded cubic interpolation).
///
/// Accepted steps always satisfy both Wolfe conditions. When the search fails
/// the method restarts once along the steepest-descent direction; a second
/// consecutive failure ends the run with status line_search_failed.
CgResult ncg_minimize(const ObjectiveFn& objective, Eigen::VectorXd x0, const CgConfig& cfg = {});

/// Strong-Wolfe line search along `dir` from x with value f0 and gradient g0.
struct LineSearchResult {
  bool ok = false;
  double step = 0.0;
  double f = 0.0;
  Eigen::VectorXd grad;
  int evaluations = 0;
  bool non_finite = false;
};
LineSearchResult strong_wolfe_search(const ObjectiveFn& objective, const Eigen::VectorXd& x, double f0,
                                     const Eigen::VectorXd& g0, const Eigen::VectorXd& dir, double initial_step,
                                     const CgConfig& cfg);

// --- minibatch driver -------------------------------------------------------

struct MinibatchCgConfig {
  CgConfig cg{.max_iters = 3};  // iterations per batch
  int batch_size = 1000;
  int epochs = 1;
  bool shuffle = true;
  std::uint64_t seed = 0;
};

struct BatchRound {
  int epoch = 0;
  int batch = 0;   // index within the epoch
  int round = 0;   // global counter
  double f_start = 0.0;
  double f_end = 0.0;
  CgStatus status = CgStatus::max_iterations;
  std::vector<CgIteration> trace;
};

/// Builds the deterministic objective for one batch. `batch_seed` drives all
/// randomness inside that objective (e.g. mask sampling) and is fixed for the
/// duration of the batch.
using BatchObjectiveFactory =
    std::function<ObjectiveFn(std::span<const std::size_t> indices, std::uint64_t batch_seed)>;

/// Called after each batch; return false to stop.
using BatchCallback = std::function<bool(const BatchRound&, const Eigen::VectorXd& x)>;
/// Called after each epoch; return false to stop.
using EpochCallback = std::function<bool(int epoch, const Eigen::VectorXd& x)>;

/// Batch order for one epoch; depends only on (seed, epoch).
std::vector<std::vector<std::size_t>> epoch_batches(std::size_t n_examples, const MinibatchCgConfig& cfg, int epoch);

/// Runs ncg_minimize for cfg.cg.max_iters iterations on each batch in turn,
/// warm-started from the current iterate with the direction reset between
/// batches. Epochs [first_epoch, cfg.epochs) are run, which lets a caller
/// resume at an epoch boundary.
Eigen::VectorXd minibatch_ncg(const BatchObjectiveFactory& factory, std::size_t n_examples, Eigen::VectorXd x0,
                              const MinibatchCgConfig& cfg, const BatchCallback& on_batch = {},
                              const EpochCallback& on_epoch = {}, int first_epoch = 0);

}  // namespace jdbm
