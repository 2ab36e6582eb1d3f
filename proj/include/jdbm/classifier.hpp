/*
 * SPDX-License-Identifier: Apache-2.0
 */
#pragma once

#include <functional>
#include <span>
#include <vector>

#include "jdbm/mean_field.hpp"
#include "jdbm/model.hpp"
#include "jdbm/ncg.hpp"
#include "jdbm/parallel.hpp"

namespace jdbm {

/// Discriminative head initialized from a trained DBM:
///
///   h1' = sigmoid(A' v + B' phi + b1)
///   h2' = sigmoid(C' h1' + b2)
///   yhat = softmax(D_out' h2' + b_out)
///
/// A, B, C, D_out start as W1, W2', W2, W3 and are trained independently (no
/// tying). b_out starts at b_y so that the untrained head is exactly one more
/// mean-field sweep of the DBM.
struct MlpParams {
  Mat A;      // D x N1
  Mat B;      // N2 x N1
  Mat C;      // N1 x N2
  Vec b1;     // N1
  Vec b2;     // N2
  Mat D_out;  // N2 x k
  Vec b_out;  // k

  static MlpParams zeros(int n_visible, int n_hidden1, int n_hidden2, int n_classes);
  int n_visible() const { return static_cast<int>(A.rows()); }
  int n_hidden1() const { return static_cast<int>(A.cols()); }
  int n_hidden2() const { return static_cast<int>(C.cols()); }
  int n_classes() const { return static_cast<int>(D_out.cols()); }
  void validate() const;
  Eigen::Index size() const;
  /// Field order A, B, C, b1, b2, D_out, b_out; column-major.
  Vec flatten() const;
  static MlpParams unflatten(const MlpParams& shape, const Vec& x);
};

MlpParams mlp_from_dbm(const DbmParams& params);

/// Mean-field inference with v clamped, yhat clamped to the all-zero vector
/// and both hidden layers free; returns the converged h2.
Vec extract_features(const DbmParams& params, const Vec& v, const MeanFieldConfig& mf = {});

/// One row of features per example.
Mat extract_features_batch(const DbmParams& params, std::span<const Example> data, const MeanFieldConfig& mf = {},
                           Exec exec = Exec::parallel);

/// Classifier inputs: rows of v and of cached features, plus labels.
struct FeatureSet {
  Mat v;
  Mat phi;
  std::vector<int> labels;

  std::size_t size() const { return labels.size(); }
  static FeatureSet build(std::span<const Example> data, Mat phi);
};

struct MlpActivations {
  Vec h1;
  Vec h2;
  Vec y;
};

MlpActivations mlp_activations(const MlpParams& mlp, const Vec& v, const Vec& phi);
Vec mlp_forward(const MlpParams& mlp, const Vec& v, const Vec& phi);

struct MlpLossGrad {
  double loss = 0.0;  // mean negative log-likelihood
  MlpParams grad;
};

/// Mean NLL over `rows` of the feature set (all rows when empty) and its exact
/// gradient.
MlpLossGrad mlp_loss_grad(const MlpParams& mlp, const FeatureSet& set, std::span<const std::size_t> rows = {},
                          Exec exec = Exec::parallel);

struct ClassifierConfig {
  MinibatchCgConfig optimizer{.cg = {.max_iters = 3}, .batch_size = 1000, .epochs = 100};
  Exec exec = Exec::parallel;
};

struct ClassifierResult {
  MlpParams mlp;
  std::vector<double> train_error;  // one entry per completed epoch
};

/// Minibatch nonlinear CG on the mean NLL. on_epoch(epoch, mlp, train_error)
/// may return false to stop.
ClassifierResult train_classifier(const MlpParams& init, const FeatureSet& train, const ClassifierConfig& cfg,
                                  const std::function<bool(int, const MlpParams&, double)>& on_epoch = {});

/// Index of the largest entry; ties go to the lowest index.
int argmax(const Vec& x);

std::vector<int> predict(const MlpParams& mlp, const FeatureSet& set, Exec exec = Exec::parallel);
double error_rate(std::span<const int> predicted, std::span<const int> labels);
double evaluate_error(const MlpParams& mlp, const FeatureSet& set, Exec exec = Exec::parallel);

/// Extracts features with `params` and evaluates the head on them.
double evaluate_error(const MlpParams& mlp, const DbmParams& params, std::span<const Example> data,
                      const MeanFieldConfig& mf = {}, Exec exec = Exec::parallel);

/// Pure generative classifier: mean field with v clamped and y free, then the
/// argmax of yhat.
std::vector<int> generative_predict(const DbmParams& params, std::span<const Example> data,
                                    const MeanFieldConfig& mf = {}, Exec exec = Exec::parallel);
double evaluate_generative_error(const DbmParams& params, std::span<const Example> data,
                                 const MeanFieldConfig& mf = {}, Exec exec = Exec::parallel);

}  // namespace jdbm
