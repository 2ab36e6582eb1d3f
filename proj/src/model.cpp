/*
 * SPDX-License-Identifier: Apache-2.0
 */
#include "jdbm/model.hpp"

#include <stdexcept>
#include <string>

#include "jdbm/random.hpp"

namespace jdbm {

void ModelSpec::validate() const {
  if (n_visible < 1 || n_hidden1 < 1 || n_hidden2 < 1)
    throw std::invalid_argument("ModelSpec: layer sizes must be >= 1");
  if (n_classes < 0) throw std::invalid_argument("ModelSpec: n_classes must be >= 0");
}

DbmParams DbmParams::zeros(const ModelSpec& spec) {
  spec.validate();
  DbmParams p;
  p.W1 = Mat::Zero(spec.n_visible, spec.n_hidden1);
  p.W2 = Mat::Zero(spec.n_hidden1, spec.n_hidden2);
  p.W3 = Mat::Zero(spec.n_hidden2, spec.n_classes);
  p.b_v = Vec::Zero(spec.n_visible);
  p.b_h1 = Vec::Zero(spec.n_hidden1);
  p.b_h2 = Vec::Zero(spec.n_hidden2);
  p.b_y = Vec::Zero(spec.n_classes);
  return p;
}

ModelSpec DbmParams::spec() const {
  return ModelSpec{static_cast<int>(W1.rows()), static_cast<int>(W1.cols()),
                   static_cast<int>(W2.cols()), static_cast<int>(W3.cols())};
}

void DbmParams::validate() const {
  const ModelSpec s = spec();
  s.validate();
  const bool ok = W2.rows() == s.n_hidden1 && W3.rows() == s.n_hidden2 && b_v.size() == s.n_visible &&
                  b_h1.size() == s.n_hidden1 && b_h2.size() == s.n_hidden2 && b_y.size() == s.n_classes;
  if (!ok) throw std::invalid_argument("DbmParams: inconsistent shapes");
  if (!all_finite()) throw std::invalid_argument("DbmParams: non-finite entry");
}

bool DbmParams::all_finite() const {
  return W1.allFinite() && W2.allFinite() && W3.allFinite() && b_v.allFinite() && b_h1.allFinite() &&
         b_h2.allFinite() && b_y.allFinite();
}

std::size_t DbmParams::size() const {
  std::size_t n = 0;
  visit([&](auto, const double*, Eigen::Index r, Eigen::Index c) { n += static_cast<std::size_t>(r * c); });
  return n;
}

Vec DbmParams::flatten() const {
  Vec out(static_cast<Eigen::Index>(size()));
  Eigen::Index off = 0;
  visit([&](auto, const double* data, Eigen::Index r, Eigen::Index c) {
    out.segment(off, r * c) = Eigen::Map<const Vec>(data, r * c);
    off += r * c;
  });
  return out;
}

DbmParams DbmParams::unflatten(const ModelSpec& spec, const Vec& flat) {
  DbmParams p = zeros(spec);
  if (static_cast<std::size_t>(flat.size()) != p.size())
    throw std::invalid_argument("DbmParams::unflatten: length " + std::to_string(flat.size()) +
                                " does not match spec (" + std::to_string(p.size()) + ")");
  Eigen::Index off = 0;
  p.visit([&](auto, double* data, Eigen::Index r, Eigen::Index c) {
    Eigen::Map<Vec>(data, r * c) = flat.segment(off, r * c);
    off += r * c;
  });
  return p;
}

DbmParams& DbmParams::operator+=(const DbmParams& o) { return add_scaled(o, 1.0); }
DbmParams& DbmParams::operator-=(const DbmParams& o) { return add_scaled(o, -1.0); }

DbmParams& DbmParams::operator*=(double s) {
  W1 *= s;
  W2 *= s;
  W3 *= s;
  b_v *= s;
  b_h1 *= s;
  b_h2 *= s;
  b_y *= s;
  return *this;
}

DbmParams& DbmParams::add_scaled(const DbmParams& o, double s) {
  W1 += s * o.W1;
  W2 += s * o.W2;
  W3 += s * o.W3;
  b_v += s * o.b_v;
  b_h1 += s * o.b_h1;
  b_h2 += s * o.b_h2;
  b_y += s * o.b_y;
  return *this;
}

double DbmParams::dot(const DbmParams& o) const {
  return W1.cwiseProduct(o.W1).sum() + W2.cwiseProduct(o.W2).sum() + W3.cwiseProduct(o.W3).sum() +
         b_v.dot(o.b_v) + b_h1.dot(o.b_h1) + b_h2.dot(o.b_h2) + b_y.dot(o.b_y);
}

double DbmParams::squared_norm() const { return dot(*this); }

DbmParams operator+(DbmParams a, const DbmParams& b) { return a += b; }
DbmParams operator-(DbmParams a, const DbmParams& b) { return a -= b; }
DbmParams operator*(DbmParams a, double s) { return a *= s; }

double cosine_similarity(const DbmParams& a, const DbmParams& b) {
  const double denom = std::sqrt(a.squared_norm() * b.squared_norm());
  return denom > 0 ? a.dot(b) / denom : 0.0;
}

void InitScheme::validate() const {
  if (kind == Kind::gaussian && !(stddev >= 0.0))
    throw std::invalid_argument("InitScheme: standard deviation must be non-negative");
}

DbmParams init_params(const ModelSpec& spec, const InitScheme& scheme, std::uint64_t seed) {
  scheme.validate();
  DbmParams p = DbmParams::zeros(spec);
  if (scheme.kind == InitScheme::Kind::zeros) return p;
  Rng rng(seed);
  auto fill = [&](Mat& m) {
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = scheme.stddev * gaussian(rng);
  };
  fill(p.W1);
  fill(p.W2);
  fill(p.W3);
  return p;
}

FullState FullState::zeros(const ModelSpec& spec) {
  return FullState{Vec::Zero(spec.n_visible), Vec::Zero(spec.n_hidden1), Vec::Zero(spec.n_hidden2),
                   spec.has_label() ? one_hot(0, spec.n_classes) : Vec()};
}

void FullState::validate(const ModelSpec& spec) const {
  if (v.size() != spec.n_visible || h1.size() != spec.n_hidden1 || h2.size() != spec.n_hidden2 ||
      y.size() != spec.n_classes)
    throw std::invalid_argument("FullState: shape mismatch");
  auto binary = [](const Vec& x) { return ((x.array() == 0.0) || (x.array() == 1.0)).all(); };
  if (!binary(v) || !binary(h1) || !binary(h2) || !binary(y))
    throw std::invalid_argument("FullState: entries must be 0 or 1");
  if (spec.has_label() && y.sum() != 1.0) throw std::invalid_argument("FullState: y must be one-hot");
}

Vec one_hot(int index, int size) {
  if (index < 0 || index >= size) throw std::invalid_argument("one_hot: index out of range");
  Vec y = Vec::Zero(size);
  y(index) = 1.0;
  return y;
}

double energy(const DbmParams& p, const FullState& s) {
  if (s.v.size() != p.W1.rows() || s.h1.size() != p.W1.cols() || s.h2.size() != p.W2.cols() ||
      s.y.size() != p.W3.cols())
    throw std::invalid_argument("energy: state shape does not match parameters");
  double e = -s.v.dot(p.W1 * s.h1) - s.h1.dot(p.W2 * s.h2) - p.b_v.dot(s.v) - p.b_h1.dot(s.h1) -
             p.b_h2.dot(s.h2);
  if (s.y.size() > 0) e -= s.h2.dot(p.W3 * s.y) + p.b_y.dot(s.y);
  return e;
}

Vec sigmoid(const Vec& x) { return x.unaryExpr([](double a) { return sigmoid(a); }); }

Vec softmax(const Vec& x) {
  if (x.size() == 0) return x;
  Vec e = (x.array() - x.maxCoeff()).exp();
  return e / e.sum();
}

double log_sum_exp(const Vec& x) {
  if (x.size() == 0) return -std::numeric_limits<double>::infinity();
  const double m = x.maxCoeff();
  return m + std::log((x.array() - m).exp().sum());
}

Vec visible_probs(const DbmParams& p, const Vec& h1) { return sigmoid(p.W1 * h1 + p.b_v); }

Vec hidden1_probs(const DbmParams& p, const Vec& v, const Vec& h2) {
  return sigmoid(p.W1.transpose() * v + p.W2 * h2 + p.b_h1);
}

Vec hidden2_probs(const DbmParams& p, const Vec& h1, const Vec& y) {
  Vec a = p.W2.transpose() * h1 + p.b_h2;
  if (y.size() > 0) a.noalias() += p.W3 * y;
  return sigmoid(a);
}

Vec label_probs(const DbmParams& p, const Vec& h2) { return softmax(p.W3.transpose() * h2 + p.b_y); }

Vec conditional_probs(const DbmParams& p, Layer layer, const Neighbors& nb) {
  auto need = [](const Vec* x, const char* what) -> const Vec& {
    if (x == nullptr) throw std::invalid_argument(std::string("conditional_probs: missing neighbor ") + what);
    return *x;
  };
  switch (layer) {
    case Layer::visible:
      return visible_probs(p, need(nb.h1, "h1"));
    case Layer::hidden1:
      return hidden1_probs(p, need(nb.v, "v"), need(nb.h2, "h2"));
    case Layer::hidden2:
      if (p.W3.cols() > 0) return hidden2_probs(p, need(nb.h1, "h1"), need(nb.y, "y"));
      return hidden2_probs(p, need(nb.h1, "h1"), Vec());
    case Layer::label:
      if (p.W3.cols() == 0) throw std::invalid_argument("conditional_probs: model has no label unit");
      return label_probs(p, need(nb.h2, "h2"));
  }
  throw std::invalid_argument("conditional_probs: unknown layer");
}

void accumulate_statistics(DbmParams& acc, const Vec& v, const Vec& h1, const Vec& h2, const Vec& y,
                           double w) {
  acc.W1.noalias() += w * v * h1.transpose();
  acc.W2.noalias() += w * h1 * h2.transpose();
  if (y.size() > 0) {
    acc.W3.noalias() += w * h2 * y.transpose();
    acc.b_y += w * y;
  }
  acc.b_v += w * v;
  acc.b_h1 += w * h1;
  acc.b_h2 += w * h2;
}

void LogSumExp::add(double x) {
  if (x == -std::numeric_limits<double>::infinity()) return;
  if (x <= max) {
    sum += std::exp(x - max);
  } else {
    sum = sum * std::exp(max - x) + 1.0;
    max = x;
  }
}

LogSumExp& LogSumExp::operator+=(const LogSumExp& o) {
  if (o.sum == 0.0) return *this;
  if (sum == 0.0) {
    *this = o;
  } else if (o.max <= max) {
    sum += o.sum * std::exp(o.max - max);
  } else {
    sum = sum * std::exp(max - o.max) + o.sum;
    max = o.max;
  }
  return *this;
}

double LogSumExp::value() const {
  return sum == 0.0 ? -std::numeric_limits<double>::infinity() : max + std::log(sum);
}

}  // namespace jdbm
