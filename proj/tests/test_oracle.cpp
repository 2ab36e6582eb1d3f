/*
 * SPDX-License-Identifier: Apache-2.0
 */
#include <doctest.h>

#include "jdbm/oracle.hpp"
#include "support.hpp"

using namespace jdbm;
using jdbm::testing::central_difference;
using jdbm::testing::random_clamp;
using jdbm::testing::random_example;
using jdbm::testing::random_model;

namespace {

std::vector<Example> all_observations(const ModelSpec& spec) {
  std::vector<Example> out;
  const int k = std::max(spec.n_classes, 1);
  for (int y = 0; y < k; ++y)
    for (int bits = 0; bits < (1 << spec.n_visible); ++bits) {
      Vec v(spec.n_visible);
      for (int j = 0; j < spec.n_visible; ++j) v(j) = (bits >> j) & 1;
      out.push_back({v, spec.has_label() ? y : -1});
    }
  return out;
}

}  // namespace

TEST_SUITE("oracle") {
  TEST_CASE("log partition of the zero model counts states") {
    for (const ModelSpec spec : {ModelSpec{3, 2, 4, 0}, ModelSpec{2, 3, 1, 3}, ModelSpec{5, 5, 5, 2}}) {
      const double n = spec.n_visible + spec.n_hidden1 + spec.n_hidden2;
      const double expected = n * std::log(2.0) + (spec.has_label() ? std::log(spec.n_classes) : 0.0);
      CHECK(exact_log_partition(DbmParams::zeros(spec)) == doctest::Approx(expected).epsilon(1e-14));
    }
  }

  TEST_CASE("four-state model by hand") {
    // D = N1 = 1; the mandatory h2 unit is disconnected and adds ln 2.
    DbmParams p = DbmParams::zeros({1, 1, 1, 0});
    CHECK(exact_log_partition(p) == doctest::Approx(std::log(4.0) + std::log(2.0)).epsilon(1e-14));
    p.W1(0, 0) = 0.9;
    CHECK(exact_log_partition(p) == doctest::Approx(1.6973760968504534 + std::log(2.0)).epsilon(1e-14));
  }

  TEST_CASE("log partition agrees with the brute-force enumerator") {
    for (int trial = 0; trial < 6; ++trial) {
      const ModelSpec spec{4, 3, 2, trial % 3 == 0 ? 0 : trial % 3 + 1};
      const DbmParams p = random_model(spec, 1.0, 500 + trial);
      CHECK(std::abs(exact_log_partition(p) - brute::log_partition(p)) < 1e-10);
    }
  }

  TEST_CASE("serial and parallel enumeration agree") {
    const DbmParams p = random_model({6, 10, 4, 3}, 0.7, 3);
    const double a = exact_log_partition(p, {.exec = Exec::serial});
    const double b = exact_log_partition(p, {.exec = Exec::parallel});
    CHECK(std::abs(a - b) < 1e-12);
    Rng rng(2);
    const ClampSpec c = random_clamp(p.spec(), rng, 0.3);
    const DbmParams sa = exact_expected_statistics(p, c, {.exec = Exec::serial});
    const DbmParams sb = exact_expected_statistics(p, c, {.exec = Exec::parallel});
    CHECK((sa.flatten() - sb.flatten()).cwiseAbs().maxCoeff() < 1e-12);
  }

  TEST_CASE("log joint of the zero model") {
    const ModelSpec spec{4, 2, 3, 3};
    const DbmParams p = DbmParams::zeros(spec);
    Rng rng(1);
    for (int i = 0; i < 5; ++i) {
      const Example ex = random_example(spec, rng);
      CHECK(exact_log_joint(p, ex.v, ex.label) == doctest::Approx(-4 * std::log(2.0) - std::log(3.0)));
    }
  }

  TEST_CASE("joint probabilities sum to one") {
    for (const ModelSpec spec : {ModelSpec{3, 3, 2, 0}, ModelSpec{3, 2, 3, 3}}) {
      const DbmParams p = random_model(spec, 1.0, 17);
      LogSumExp total;
      for (const auto& ex : all_observations(spec)) total.add(exact_log_joint(p, ex.v, ex.label));
      CHECK(std::abs(std::exp(total.value()) - 1.0) < 1e-10);
    }
  }

  TEST_CASE("log joint matches full enumeration then marginalization") {
    const ModelSpec spec{4, 3, 2, 2};
    const DbmParams p = random_model(spec, 1.0, 23);
    Rng rng(4);
    for (int i = 0; i < 5; ++i) {
      const Example ex = random_example(spec, rng);
      const double direct = brute::log_sum(p, ClampSpec::observed(spec, ex)) - brute::log_partition(p);
      CHECK(std::abs(exact_log_joint(p, ex.v, ex.label) - direct) < 1e-10);
    }
  }

  TEST_CASE("posterior marginals") {
    const ModelSpec spec{4, 3, 3, 2};
    Rng rng(6);
    SUBCASE("zero model") {
      const Marginals m = exact_posterior_marginals(DbmParams::zeros(spec), ClampSpec::none(spec));
      CHECK(m.h1.isApprox(Vec::Constant(3, 0.5)));
      CHECK(m.v.isApprox(Vec::Constant(4, 0.5)));
      CHECK(m.y.isApprox(Vec::Constant(2, 0.5)));
    }
    SUBCASE("disconnected unit follows its bias") {
      DbmParams p = random_model(spec, 1.0, 8);
      p.W2.row(1).setZero();
      p.W1.col(1).setZero();
      p.b_h1(1) = 0.8;
      for (int i = 0; i < 4; ++i) {
        ClampSpec c = random_clamp(spec, rng, 0.5);
        c.h1.release(1);
        CHECK(exact_posterior_marginals(p, c).h1(1) == doctest::Approx(sigmoid(0.8)).epsilon(1e-12));
      }
    }
    SUBCASE("random clamps match brute force") {
      const DbmParams p = random_model(spec, 1.0, 9);
      for (int i = 0; i < 8; ++i) {
        ClampSpec c = ClampSpec::none(spec);
        for (int j = 0; j < 2; ++j) c.v.set(j, bernoulli(rng, 0.5));
        if (i % 2) c.clamp_label(i % 2);
        const Marginals a = exact_posterior_marginals(p, c);
        const Marginals b = brute::marginals(p, c);
        CHECK((a.v - b.v).cwiseAbs().maxCoeff() < 1e-10);
        CHECK((a.h1 - b.h1).cwiseAbs().maxCoeff() < 1e-10);
        CHECK((a.h2 - b.h2).cwiseAbs().maxCoeff() < 1e-10);
        CHECK((a.y - b.y).cwiseAbs().maxCoeff() < 1e-10);
      }
    }
  }

  TEST_CASE("exact inpainting log-probability") {
    const ModelSpec spec{5, 3, 2, 3};
    Rng rng(12);
    const Example ex = random_example(spec, rng);
    SUBCASE("empty mask") { CHECK(exact_inpaint_logprob(random_model(spec, 1.0, 1), ex, MaskSet{}) == 0.0); }
    SUBCASE("zero model") {
      const MaskSet m{{0, 2, 4}, false};
      CHECK(exact_inpaint_logprob(DbmParams::zeros(spec), ex, m) == doctest::Approx(-3 * std::log(2.0)));
    }
    SUBCASE("double enumeration") {
      const DbmParams p = random_model(spec, 1.0, 31);
      for (const MaskSet& m : {MaskSet{{1, 3}, false}, MaskSet{{0}, true}, MaskSet{{}, true}}) {
        const double direct = brute::log_sum(p, ClampSpec::observed(spec, ex)) -
                              brute::log_sum(p, inpaint_clamp(spec, ex, m));
        CHECK(std::abs(exact_inpaint_logprob(p, ex, m) - direct) < 1e-10);
      }
    }
    SUBCASE("masking everything gives the joint") {
      const DbmParams p = random_model(spec, 1.0, 32);
      const MaskSet all{{0, 1, 2, 3, 4}, true};
      CHECK(std::abs(exact_inpaint_logprob(p, ex, all) - exact_log_joint(p, ex.v, ex.label)) < 1e-10);
    }
  }

  TEST_CASE("log-likelihood gradient") {
    SUBCASE("stationary at the zero model on the uniform batch") {
      const ModelSpec spec{3, 2, 2, 2};
      const auto batch = all_observations(spec);
      const ParamGradient g = exact_loglik_gradient(DbmParams::zeros(spec), batch);
      CHECK(g.flatten().cwiseAbs().maxCoeff() < 1e-10);
    }
    SUBCASE("matches finite differences of the mean log joint") {
      const ModelSpec spec{3, 3, 2, 2};
      const DbmParams p = random_model(spec, 0.8, 44);
      Rng rng(3);
      std::vector<Example> batch;
      for (int i = 0; i < 4; ++i) batch.push_back(random_example(spec, rng));
      auto f = [&](const Vec& x) {
        const DbmParams q = DbmParams::unflatten(spec, x);
        double s = 0.0;
        for (const auto& ex : batch) s += exact_log_joint(q, ex.v, ex.label);
        return s / static_cast<double>(batch.size());
      };
      const Vec fd = central_difference(f, p.flatten(), 1e-5);
      const Vec g = exact_loglik_gradient(p, batch).flatten();
      CHECK(jdbm::testing::max_relative_error(g, fd, 1e-3) < 1e-6);
    }
    SUBCASE("single weight closed form") {
      DbmParams p = DbmParams::zeros({1, 1, 1, 0});
      p.W1(0, 0) = 0.4;
      const std::vector<Example> batch{{Vec::Ones(1), -1}};
      CHECK(exact_loglik_gradient(p, batch).W1(0, 0) == doctest::Approx(0.2665676870367771).epsilon(1e-12));
    }
  }

  TEST_CASE("budget and clamp errors") {
    const DbmParams big = DbmParams::zeros({2, 30, 2, 0});
    CHECK_THROWS_AS(exact_log_partition(big), BudgetExceeded);
    CHECK_THROWS_AS(exact_log_partition(random_model({3, 5, 2, 0}, 1.0, 1), {.budget = 16}), BudgetExceeded);
    CHECK_THROWS_AS(brute::log_partition(DbmParams::zeros({20, 2, 2, 0}), 1 << 10), BudgetExceeded);
    ClampSpec zero = ClampSpec::none({2, 2, 2, 2});
    zero.label_mode = LabelMode::zero;
    CHECK_THROWS_AS(exact_log_sum(DbmParams::zeros({2, 2, 2, 2}), zero), std::invalid_argument);
  }
}
