/*
 * SPDX-License-Identifier: Apache-2.0
 */
#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace jdbm {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Layer sizes of a two-hidden-layer DBM with an optional one-of-k label.
struct ModelSpec {
  int n_visible = 0;
  int n_hidden1 = 0;
  int n_hidden2 = 0;
  int n_classes = 0;  // 0: no label unit

  bool has_label() const { return n_classes > 0; }
  /// Throws std::invalid_argument unless every layer size is >= 1 (labels >= 0).
  void validate() const;
  friend bool operator==(const ModelSpec&, const ModelSpec&) = default;
};

/// One observed training case. `label` is -1 for models without a label unit.
struct Example {
  Vec v;
  int label = -1;
};

/// All DBM parameters. The same layout doubles as a gradient or as a set of
/// expected sufficient statistics (slot W1 holds E[v h1^T], and so on).
///
/// Energy:
///   E = -v'W1 h1 - h1'W2 h2 - h2'W3 y - b_v'v - b_h1'h1 - b_h2'h2 - b_y'y
struct DbmParams {
  Mat W1;  // D  x N1
  Mat W2;  // N1 x N2
  Mat W3;  // N2 x k
  Vec b_v;
  Vec b_h1;
  Vec b_h2;
  Vec b_y;

  static constexpr std::array<std::string_view, 7> kFieldNames = {"W1", "W2", "W3", "b_v",
                                                                  "b_h1", "b_h2", "b_y"};

  static DbmParams zeros(const ModelSpec& spec);
  ModelSpec spec() const;
  /// Throws std::invalid_argument on inconsistent shapes or non-finite entries.
  void validate() const;
  bool all_finite() const;

  std::size_t size() const;
  /// Concatenation in kFieldNames order, each block column-major.
  Vec flatten() const;
  static DbmParams unflatten(const ModelSpec& spec, const Vec& flat);

  /// Calls f(name, data, rows, cols) for each block in kFieldNames order.
  template <class F>
  void visit(F&& f) {
    f(kFieldNames[0], W1.data(), W1.rows(), W1.cols());
    f(kFieldNames[1], W2.data(), W2.rows(), W2.cols());
    f(kFieldNames[2], W3.data(), W3.rows(), W3.cols());
    f(kFieldNames[3], b_v.data(), b_v.size(), Eigen::Index{1});
    f(kFieldNames[4], b_h1.data(), b_h1.size(), Eigen::Index{1});
    f(kFieldNames[5], b_h2.data(), b_h2.size(), Eigen::Index{1});
    f(kFieldNames[6], b_y.data(), b_y.size(), Eigen::Index{1});
  }
  template <class F>
  void visit(F&& f) const {
    f(kFieldNames[0], W1.data(), W1.rows(), W1.cols());
    f(kFieldNames[1], W2.data(), W2.rows(), W2.cols());
    f(kFieldNames[2], W3.data(), W3.rows(), W3.cols());
    f(kFieldNames[3], b_v.data(), b_v.size(), Eigen::Index{1});
    f(kFieldNames[4], b_h1.data(), b_h1.size(), Eigen::Index{1});
    f(kFieldNames[5], b_h2.data(), b_h2.size(), Eigen::Index{1});
    f(kFieldNames[6], b_y.data(), b_y.size(), Eigen::Index{1});
  }

  DbmParams& operator+=(const DbmParams& other);
  DbmParams& operator-=(const DbmParams& other);
  DbmParams& operator*=(double s);
  /// this += s * other
  DbmParams& add_scaled(const DbmParams& other, double s);
  double dot(const DbmParams& other) const;
  double squared_norm() const;
};

using ParamGradient = DbmParams;

DbmParams operator+(DbmParams a, const DbmParams& b);
DbmParams operator-(DbmParams a, const DbmParams& b);
DbmParams operator*(DbmParams a, double s);

/// Cosine similarity between two parameter-shaped vectors.
double cosine_similarity(const DbmParams& a, const DbmParams& b);

struct InitScheme {
  enum class Kind { zeros, gaussian };
  Kind kind = Kind::gaussian;
  double stddev = 0.01;

  void validate() const;
};

/// Weights i.i.d. from the scheme, biases zero. Deterministic in `seed`.
DbmParams init_params(const ModelSpec& spec, const InitScheme& scheme, std::uint64_t seed);

/// A full binary configuration. `y` is one-hot of length k (empty when k = 0).
struct FullState {
  Vec v;
  Vec h1;
  Vec h2;
  Vec y;

  static FullState zeros(const ModelSpec& spec);
  void validate(const ModelSpec& spec) const;
};

Vec one_hot(int index, int size);

double energy(const DbmParams& params, const FullState& state);

enum class Layer { visible, hidden1, hidden2, label };

/// Non-owning views of the layers adjacent to the one being queried. The
/// values may be binary states or mean-field probabilities.
struct Neighbors {
  const Vec* v = nullptr;
  const Vec* h1 = nullptr;
  const Vec* h2 = nullptr;
  const Vec* y = nullptr;
};

/// P(unit = 1 | neighbors) for binary layers, the softmax over classes for the
/// label. Throws std::invalid_argument if a required neighbor is missing.
Vec conditional_probs(const DbmParams& params, Layer layer, const Neighbors& nb);

// Direct forms of the four block conditionals.
Vec visible_probs(const DbmParams& params, const Vec& h1);
Vec hidden1_probs(const DbmParams& params, const Vec& v, const Vec& h2);
Vec hidden2_probs(const DbmParams& params, const Vec& h1, const Vec& y);
Vec label_probs(const DbmParams& params, const Vec& h2);

/// acc += weight * (sufficient statistics of the configuration), i.e. the
/// gradient of -E with respect to every parameter.
void accumulate_statistics(DbmParams& acc, const Vec& v, const Vec& h1, const Vec& h2,
                           const Vec& y, double weight = 1.0);

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }
/// log(1 + e^x) without overflow.
inline double softplus(double x) { return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }
Vec sigmoid(const Vec& x);
Vec softmax(const Vec& x);
double log_sum_exp(const Vec& x);

/// Streaming log-sum-exp with a running maximum.
struct LogSumExp {
  double max = -std::numeric_limits<double>::infinity();
  double sum = 0.0;  // sum of exp(x - max)

  void add(double x);
  LogSumExp& operator+=(const LogSumExp& other);
  double value() const;
};

}  // namespace jdbm
