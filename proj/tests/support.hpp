/*
 * SPDX-License-Identifier: Apache-2.0
 */
#pragma once

#include <algorithm>
#include <cmath>
#include <functional>

#include "jdbm/clamp.hpp"
#include "jdbm/model.hpp"
#include "jdbm/random.hpp"

namespace jdbm::testing {

/// Gaussian weights and biases.
inline DbmParams random_model(const ModelSpec& spec, double stddev, std::uint64_t seed) {
  DbmParams p = DbmParams::zeros(spec);
  Rng rng(seed);
  p.visit([&](auto, double* data, Eigen::Index r, Eigen::Index c) {
    for (Eigen::Index i = 0; i < r * c; ++i) data[i] = stddev * gaussian(rng);
  });
  return p;
}

inline Vec random_binary(int n, Rng& rng, double p = 0.5) {
  Vec x(n);
  for (int i = 0; i < n; ++i) x(i) = bernoulli(rng, p) ? 1.0 : 0.0;
  return x;
}

inline Example random_example(const ModelSpec& spec, Rng& rng) {
  return Example{random_binary(spec.n_visible, rng),
                 spec.has_label() ? static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(spec.n_classes))) : -1};
}

/// Every unit (and the label) clamped independently with probability p.
inline ClampSpec random_clamp(const ModelSpec& spec, Rng& rng, double p) {
  ClampSpec c = ClampSpec::none(spec);
  for (LayerClamp* l : {&c.v, &c.h1, &c.h2})
    for (int i = 0; i < l->size(); ++i)
      if (bernoulli(rng, p)) l->set(i, bernoulli(rng, 0.5) ? 1.0 : 0.0);
  if (spec.has_label() && bernoulli(rng, p))
    c.clamp_label(static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(spec.n_classes))));
  return c;
}

/// Central differences of f at x, coordinate by coordinate.
inline Vec central_difference(const std::function<double(const Vec&)>& f, const Vec& x, double h) {
  Vec g(x.size());
  Vec xp = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double xi = x(i);
    xp(i) = xi + h;
    const double fp = f(xp);
    xp(i) = xi - h;
    const double fm = f(xp);
    xp(i) = xi;
    g(i) = (fp - fm) / (2.0 * h);
  }
  return g;
}

/// |a - b| / max(|a|, |b|, floor): relative error that stays meaningful for
/// coordinates whose true value is (numerically) zero.
inline double relative_error(double a, double b, double floor) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

inline double max_relative_error(const Vec& a, const Vec& b, double floor) {
  double m = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i) m = std::max(m, relative_error(a(i), b(i), floor));
  return m;
}

}  // namespace jdbm::testing
