/*
 * SPDX-License-Identifier: Apache-2.0
 */
#include <doctest.h>

#include <set>

#include "jdbm/ncg.hpp"
#include "jdbm/random.hpp"

using namespace jdbm;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

ObjectiveFn rosenbrock() {
  return [](const VectorXd& x, VectorXd& g) {
    const double a = 1.0 - x(0), b = x(1) - x(0) * x(0);
    g.resize(2);
    g(0) = -2.0 * a - 400.0 * x(0) * b;
    g(1) = 200.0 * b;
    return a * a + 100.0 * b * b;
  };
}

struct Quadratic {
  MatrixXd A;
  VectorXd b;
  double operator()(const VectorXd& x, VectorXd& g) const {
    g = A * x - b;
    return 0.5 * x.dot(A * x) - b.dot(x);
  }
};

Quadratic random_spd(int n, std::uint64_t seed) {
  Rng rng(seed);
  MatrixXd M(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) M(i, j) = gaussian(rng);
  Quadratic q{M * M.transpose() + n * MatrixXd::Identity(n, n), VectorXd(n)};
  for (int i = 0; i < n; ++i) q.b(i) = gaussian(rng);
  return q;
}

void check_wolfe_trace(const CgResult& r) {
  double prev = r.f_initial;
  for (const CgIteration& it : r.trace) {
    CHECK(it.armijo);
    CHECK(it.curvature);
    CHECK(it.f <= prev);
    prev = it.f;
  }
}

}  // namespace

TEST_SUITE("ncg") {
  TEST_CASE("squared norm converges within dim + 1 iterations") {
    VectorXd x0(5);
    x0 << 1, -2, 3, 0.5, 7;
    const CgResult r = ncg_minimize(
        [](const VectorXd& x, VectorXd& g) {
          g = 2.0 * x;
          return x.squaredNorm();
        },
        x0, {.grad_tol = 1e-10});
    CHECK(r.status == CgStatus::converged);
    CHECK(r.x.norm() < 1e-8);
    CHECK(r.iterations <= 6);
  }

  TEST_CASE("SPD quadratic matches the direct solve") {
    for (std::uint64_t seed : {1, 2, 3}) {
      const Quadratic q = random_spd(20, seed);
      const VectorXd xstar = q.A.ldlt().solve(q.b);
      const CgResult r = ncg_minimize(q, VectorXd::Zero(20), {.max_iters = 40, .grad_tol = 1e-10});
      CHECK((r.x - xstar).norm() <= 1e-6);
      CHECK(r.iterations <= 40);
      check_wolfe_trace(r);
    }
  }

  TEST_CASE("Rosenbrock from (-1.2, 1)") {
    VectorXd x0(2);
    x0 << -1.2, 1.0;
    const CgResult r = ncg_minimize(rosenbrock(), x0, {.max_iters = 200, .grad_tol = 1e-10});
    CHECK(r.f < 1e-8);
    CHECK(r.iterations <= 200);
    check_wolfe_trace(r);
  }

  TEST_CASE("line search returns a strong Wolfe point") {
    VectorXd x(2), g;
    x << -1.2, 1.0;
    const auto f = rosenbrock();
    const double f0 = f(x, g);
    const VectorXd d = -g;
    const CgConfig cfg;
    const LineSearchResult ls = strong_wolfe_search(f, x, f0, g, d, 1.0, cfg);
    REQUIRE(ls.ok);
    CHECK(ls.f <= f0 + cfg.c1 * ls.step * g.dot(d));
    CHECK(std::abs(ls.grad.dot(d)) <= cfg.c2 * std::abs(g.dot(d)));
  }

  TEST_CASE("config validation") {
    CHECK_THROWS_AS((CgConfig{.c1 = 0.5, .c2 = 0.1}).validate(), std::invalid_argument);
    CHECK_THROWS_AS((CgConfig{.c2 = 1.0}).validate(), std::invalid_argument);
    CHECK_NOTHROW(CgConfig{}.validate());
  }

  TEST_CASE("non-finite objective stops with status") {
    VectorXd x0 = VectorXd::Ones(3);
    const CgResult r = ncg_minimize(
        [](const VectorXd& x, VectorXd& g) {
          g = VectorXd::Constant(x.size(), std::nan(""));
          return std::nan("");
        },
        x0);
    CHECK(r.status == CgStatus::non_finite);
  }

  TEST_CASE("unbounded objective ends with a status, not a hang") {
    // f = -x is unbounded below; no step satisfies the curvature condition.
    const CgResult r = ncg_minimize(
        [](const VectorXd& x, VectorXd& g) {
          g = VectorXd::Constant(1, -1.0);
          return -x(0);
        },
        VectorXd::Zero(1), {.max_iters = 5});
    CHECK(r.status != CgStatus::converged);
    check_wolfe_trace(r);
  }

  TEST_CASE("deterministic trajectory") {
    const Quadratic q = random_spd(8, 4);
    const CgResult a = ncg_minimize(q, VectorXd::Ones(8), {.max_iters = 5});
    const CgResult b = ncg_minimize(q, VectorXd::Ones(8), {.max_iters = 5});
    CHECK(a.x == b.x);
    CHECK(a.evaluations == b.evaluations);
  }

  TEST_CASE("epoch batches partition the data") {
    MinibatchCgConfig cfg{.batch_size = 7, .seed = 3};
    const auto b0 = epoch_batches(30, cfg, 0);
    const auto b1 = epoch_batches(30, cfg, 1);
    CHECK(b0.size() == 5);
    std::multiset<std::size_t> seen;
    for (const auto& b : b0) seen.insert(b.begin(), b.end());
    CHECK(seen.size() == 30);
    CHECK(std::set<std::size_t>(seen.begin(), seen.end()).size() == 30);
    CHECK(b0 != b1);
    CHECK(b0 == epoch_batches(30, cfg, 0));
    cfg.shuffle = false;
    CHECK(epoch_batches(30, cfg, 2)[0] == std::vector<std::size_t>{0, 1, 2, 3, 4, 5, 6});
  }

  TEST_CASE("single full batch equals plain minimization") {
    const Quadratic q = random_spd(10, 9);
    const MinibatchCgConfig cfg{.cg = {.max_iters = 6}, .batch_size = 100, .epochs = 1};
    const VectorXd x = minibatch_ncg([&](std::span<const std::size_t>, std::uint64_t) -> ObjectiveFn { return q; }, 50,
                                     VectorXd::Zero(10), cfg);
    CHECK(x == ncg_minimize(q, VectorXd::Zero(10), cfg.cg).x);
  }

  TEST_CASE("minibatch rounds decrease their own objective and can stop early") {
    // Least squares on data points; each batch is its own quadratic.
    Rng rng(5);
    std::vector<VectorXd> pts;
    for (int i = 0; i < 40; ++i) {
      VectorXd p(3);
      p << gaussian(rng), gaussian(rng), gaussian(rng);
      pts.push_back(p);
    }
    auto factory = [&](std::span<const std::size_t> idx, std::uint64_t) -> ObjectiveFn {
      std::vector<std::size_t> mine(idx.begin(), idx.end());
      return [&pts, mine](const VectorXd& x, VectorXd& g) {
        g = VectorXd::Zero(3);
        double f = 0.0;
        for (std::size_t i : mine) {
          f += 0.5 * (x - pts[i]).squaredNorm();
          g += x - pts[i];
        }
        return f / mine.size();
      };
    };
    int rounds = 0;
    const MinibatchCgConfig cfg{.batch_size = 10, .epochs = 3, .seed = 1};
    minibatch_ncg(factory, 40, VectorXd::Constant(3, 5.0), cfg, [&](const BatchRound& r, const VectorXd&) {
      CHECK(r.f_end <= r.f_start);
      CHECK(r.round == rounds);
      ++rounds;
      return rounds < 6;
    });
    CHECK(rounds == 6);
  }
}
