/*
 * SPDX-License-Identifier: Apache-2.0
 */
#include <doctest.h>

#include "jdbm/model.hpp"
#include "jdbm/oracle.hpp"
#include "support.hpp"

using namespace jdbm;
using jdbm::testing::random_binary;
using jdbm::testing::random_model;

TEST_SUITE("model") {
  TEST_CASE("zeros scheme gives all-zero parameters") {
    const DbmParams p = init_params({5, 4, 3, 2}, {InitScheme::Kind::zeros, 0.0}, 7);
    CHECK(p.squared_norm() == 0.0);
    CHECK(p.spec() == ModelSpec{5, 4, 3, 2});
  }

  TEST_CASE("init is deterministic in the seed") {
    const ModelSpec spec{6, 5, 4, 3};
    const DbmParams a = init_params(spec, {}, 42), b = init_params(spec, {}, 42), c = init_params(spec, {}, 43);
    CHECK(a.flatten() == b.flatten());
    CHECK(a.flatten() != c.flatten());
    CHECK(a.b_v.isZero());
    CHECK(a.b_h2.isZero());
  }

  TEST_CASE("gaussian init sample mean is within three standard errors of zero") {
    const DbmParams p = init_params({784, 500, 1000, 10}, {InitScheme::Kind::gaussian, 0.01}, 3);
    const double n = 784.0 * 500.0;
    CHECK(std::abs(p.W1.mean()) < 3.0 * 0.01 / std::sqrt(n));
    CHECK(std::abs(std::sqrt(p.W1.squaredNorm() / n) - 0.01) < 1e-4);
  }

  TEST_CASE("negative standard deviation is rejected") {
    CHECK_THROWS_AS(init_params({2, 2, 2, 0}, {InitScheme::Kind::gaussian, -1.0}, 0), std::invalid_argument);
    CHECK_THROWS_AS(DbmParams::zeros({0, 2, 2, 0}), std::invalid_argument);
    CHECK_NOTHROW(DbmParams::zeros({1, 1, 1, 0}));
  }

  TEST_CASE("energy of simple configurations") {
    const ModelSpec spec{3, 2, 2, 2};
    FullState s = FullState::zeros(spec);
    s.v << 1, 0, 1;
    s.h1 << 1, 1;
    CHECK(energy(DbmParams::zeros(spec), s) == 0.0);

    DbmParams one = DbmParams::zeros({1, 1, 1, 0});
    one.W1(0, 0) = 2.0;
    FullState t = FullState::zeros({1, 1, 1, 0});
    t.v(0) = 1;
    t.h1(0) = 1;
    CHECK(energy(one, t) == -2.0);
  }

  TEST_CASE("energy matches the scalar-loop recomputation") {
    const ModelSpec spec{4, 3, 2, 3};
    Rng rng(11);
    for (int trial = 0; trial < 20; ++trial) {
      const DbmParams p = random_model(spec, 1.0, 100 + trial);
      FullState s{random_binary(4, rng), random_binary(3, rng), random_binary(2, rng), one_hot(trial % 3, 3)};
      CHECK(energy(p, s) == doctest::Approx(brute::energy(p, s)).epsilon(1e-13));
    }
  }

  TEST_CASE("energy is linear in each parameter block") {
    const ModelSpec spec{4, 3, 2, 2};
    Rng rng(5);
    const DbmParams p = random_model(spec, 1.0, 9);
    FullState s{random_binary(4, rng), random_binary(3, rng), random_binary(2, rng), one_hot(1, 2)};
    DbmParams only_w2 = DbmParams::zeros(spec);
    only_w2.W2 = p.W2;
    const double e1 = energy(only_w2, s);
    for (double alpha : {-2.0, 0.5, 3.0}) {
      DbmParams scaled = only_w2;
      scaled.W2 *= alpha;
      CHECK(energy(scaled, s) - energy(DbmParams::zeros(spec), s) == doctest::Approx(alpha * e1));
    }
  }

  TEST_CASE("conditionals at zero parameters") {
    const ModelSpec spec{3, 2, 2, 4};
    const DbmParams p = DbmParams::zeros(spec);
    const Vec v = Vec::Ones(3), h1 = Vec::Ones(2), h2 = Vec::Zero(2), y = one_hot(1, 4);
    CHECK(conditional_probs(p, Layer::hidden1, {.v = &v, .h2 = &h2}).isApprox(Vec::Constant(2, 0.5)));
    CHECK(conditional_probs(p, Layer::visible, {.h1 = &h1}).isApprox(Vec::Constant(3, 0.5)));
    CHECK(conditional_probs(p, Layer::hidden2, {.h1 = &h1, .y = &y}).isApprox(Vec::Constant(2, 0.5)));
    CHECK(conditional_probs(p, Layer::label, {.h2 = &h2}).isApprox(Vec::Constant(4, 0.25)));
  }

  TEST_CASE("h1 probability with input ln 3 is 0.75") {
    DbmParams p = DbmParams::zeros({2, 1, 1, 0});
    p.W2(0, 0) = std::log(3.0);
    const Vec v = Vec::Zero(2), h2 = Vec::Ones(1);
    CHECK(hidden1_probs(p, v, h2)(0) == doctest::Approx(0.75).epsilon(1e-15));
  }

  TEST_CASE("missing neighbor is an error") {
    const DbmParams p = DbmParams::zeros({2, 2, 2, 2});
    const Vec v = Vec::Zero(2);
    CHECK_THROWS_AS(conditional_probs(p, Layer::hidden1, {.v = &v}), std::invalid_argument);
    CHECK_THROWS_AS(conditional_probs(p, Layer::label, {}), std::invalid_argument);
  }

  TEST_CASE("block conditionals agree with enumeration of the layer") {
    const ModelSpec spec{3, 4, 3, 3};
    Rng rng(21);
    for (int trial = 0; trial < 10; ++trial) {
      const DbmParams p = random_model(spec, 1.0, 300 + trial);
      FullState s{random_binary(3, rng), random_binary(4, rng), random_binary(3, rng), one_hot(trial % 3, 3)};
      // Enumerate h1 with everything else fixed.
      LogSumExp lse;
      std::vector<double> logw;
      for (int bits = 0; bits < 16; ++bits) {
        FullState t = s;
        for (int j = 0; j < 4; ++j) t.h1(j) = (bits >> j) & 1;
        logw.push_back(-brute::energy(p, t));
        lse.add(logw.back());
      }
      Vec marg = Vec::Zero(4);
      for (int bits = 0; bits < 16; ++bits)
        for (int j = 0; j < 4; ++j)
          if ((bits >> j) & 1) marg(j) += std::exp(logw[static_cast<std::size_t>(bits)] - lse.value());
      CHECK((hidden1_probs(p, s.v, s.h2) - marg).cwiseAbs().maxCoeff() < 1e-12);

      // Label: enumerate classes.
      Vec ly(3);
      for (int c = 0; c < 3; ++c) {
        FullState t = s;
        t.y = one_hot(c, 3);
        ly(c) = -brute::energy(p, t);
      }
      const Vec py = softmax(ly);
      CHECK((label_probs(p, s.h2) - py).cwiseAbs().maxCoeff() < 1e-12);
      CHECK(std::abs(label_probs(p, s.h2).sum() - 1.0) < 1e-12);
    }
  }

  TEST_CASE("per-unit conditional equals the two-state energy ratio") {
    const ModelSpec spec{4, 3, 2, 2};
    Rng rng(8);
    const DbmParams p = random_model(spec, 1.5, 77);
    FullState s{random_binary(4, rng), random_binary(3, rng), random_binary(2, rng), one_hot(0, 2)};
    const Vec pv = visible_probs(p, s.h1);
    const Vec ph2 = hidden2_probs(p, s.h1, s.y);
    for (int i = 0; i < 4; ++i) {
      FullState on = s, off = s;
      on.v(i) = 1;
      off.v(i) = 0;
      const double ratio = 1.0 / (1.0 + std::exp(brute::energy(p, on) - brute::energy(p, off)));
      CHECK(std::abs(pv(i) - ratio) < 1e-12);
    }
    for (int i = 0; i < 2; ++i) {
      FullState on = s, off = s;
      on.h2(i) = 1;
      off.h2(i) = 0;
      const double ratio = 1.0 / (1.0 + std::exp(brute::energy(p, on) - brute::energy(p, off)));
      CHECK(std::abs(ph2(i) - ratio) < 1e-12);
    }
  }

  TEST_CASE("flatten and unflatten are inverse") {
    const ModelSpec spec{5, 4, 3, 2};
    const DbmParams p = random_model(spec, 1.0, 1);
    const DbmParams q = DbmParams::unflatten(spec, p.flatten());
    CHECK(q.flatten() == p.flatten());
    CHECK(p.size() == 5 * 4 + 4 * 3 + 3 * 2 + 5 + 4 + 3 + 2);
    CHECK_THROWS_AS(DbmParams::unflatten(spec, Vec::Zero(3)), std::invalid_argument);
  }

  TEST_CASE("log-sum-exp survives large magnitudes") {
    LogSumExp a;
    a.add(1000.0);
    a.add(1000.0);
    CHECK(a.value() == doctest::Approx(1000.0 + std::log(2.0)));
    LogSumExp b;
    b.add(-1000.0);
    b += a;
    CHECK(b.value() == doctest::Approx(1000.0 + std::log(2.0)));
    CHECK(softplus(800.0) == doctest::Approx(800.0));
    CHECK(softplus(-800.0) >= 0.0);
  }
}
