/*
 * SPDX-License-Identifier: Apache-2.0
 */
#include "jdbm/ncg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "jdbm/random.hpp"

namespace jdbm {

using Eigen::VectorXd;

void CgConfig::validate() const {
  if (!(0.0 < c1 && c1 < c2 && c2 < 1.0)) throw std::invalid_argument("CgConfig: need 0 < c1 < c2 < 1");
  if (max_iters < 0 || max_line_evals < 2 || !(initial_step > 0.0))
    throw std::invalid_argument("CgConfig: invalid iteration limits or initial step");
}

std::string to_string(CgStatus s) {
  switch (s) {
    case CgStatus::converged: return "converged";
    case CgStatus::max_iterations: return "max_iterations";
    case CgStatus::line_search_failed: return "line_search_failed";
    case CgStatus::non_finite: return "non_finite";
  }
  return "unknown";
}

namespace {

struct Probe {
  double a = 0.0;
  double f = 0.0;
  double d = 0.0;  // directional derivative
  bool finite = true;
};

// Minimizer of the cubic matching value and slope at both ends; NaN if the
// cubic has no interior minimum.
double cubic_min(const Probe& p, const Probe& q) {
  const double d1 = p.d + q.d - 3.0 * (p.f - q.f) / (p.a - q.a);
  const double disc = d1 * d1 - p.d * q.d;
  if (disc < 0.0) return std::nan("");
  const double d2 = std::copysign(std::sqrt(disc), q.a - p.a);
  const double denom = q.d - p.d + 2.0 * d2;
  if (denom == 0.0) return std::nan("");
  return q.a - (q.a - p.a) * (q.d + d2 - d1) / denom;
}

}  // namespace

LineSearchResult strong_wolfe_search(const ObjectiveFn& objective, const VectorXd& x, double f0, const VectorXd& g0,
                                     const VectorXd& dir, double initial_step, const CgConfig& cfg) {
  LineSearchResult out;
  const double d0 = g0.dot(dir);
  if (!(d0 < 0.0)) return out;
  VectorXd xt(x.size()), gt(x.size());

  auto eval = [&](double a) {
    xt = x + a * dir;
    Probe p;
    p.a = a;
    p.f = objective(xt, gt);
    ++out.evaluations;
    p.finite = std::isfinite(p.f) && gt.allFinite();
    p.d = p.finite ? gt.dot(dir) : std::nan("");
    return p;
  };
  auto armijo = [&](const Probe& p) { return p.finite && p.f <= f0 + cfg.c1 * p.a * d0; };
  auto curvature = [&](const Probe& p) { return std::abs(p.d) <= -cfg.c2 * d0; };
  auto accept = [&](const Probe& p) {
    out.ok = true;
    out.step = p.a;
    out.f = p.f;
    out.grad = gt;
    return out;
  };

  auto zoom = [&](Probe lo, Probe hi) -> LineSearchResult {
    while (out.evaluations < cfg.max_line_evals) {
      const double left = std::min(lo.a, hi.a), right = std::max(lo.a, hi.a);
      const double width = right - left;
      if (width <= 1e-16 * std::max(1.0, right)) break;
      double a = hi.finite ? cubic_min(lo, hi) : std::nan("");
      if (!std::isfinite(a) || a < left + 0.1 * width || a > right - 0.1 * width) a = 0.5 * (lo.a + hi.a);
      const Probe p = eval(a);
      if (!p.finite) out.non_finite = true;
      if (!armijo(p) || p.f >= lo.f) {
        hi = p;
      } else {
        if (curvature(p)) return accept(p);
        if (p.d * (hi.a - lo.a) >= 0.0) hi = lo;
        lo = p;
      }
    }
    out.ok = false;
    return out;
  };

  Probe prev{0.0, f0, d0, true};
  double a = initial_step;
  for (int i = 0; out.evaluations < cfg.max_line_evals; ++i) {
    const Probe p = eval(a);
    if (!p.finite) out.non_finite = true;
    if (!armijo(p) || (i > 0 && p.f >= prev.f)) return zoom(prev, p);
    if (curvature(p)) return accept(p);
    if (p.d >= 0.0) return zoom(p, prev);
    // Extrapolate: cubic step clipped to [2a, 10a].
    double next = cubic_min(prev, p);
    if (!std::isfinite(next) || next < 2.0 * a) next = 2.0 * a;
    next = std::min(next, 10.0 * a);
    prev = p;
    a = next;
  }
  out.ok = false;
  return out;
}

CgResult ncg_minimize(const ObjectiveFn& objective, VectorXd x0, const CgConfig& cfg) {
  cfg.validate();
  CgResult r;
  r.x = std::move(x0);
  VectorXd g(r.x.size());
  r.f = objective(r.x, g);
  r.f_initial = r.f;
  r.evaluations = 1;
  r.grad_norm = g.norm();
  if (!std::isfinite(r.f) || !g.allFinite()) {
    r.status = CgStatus::non_finite;
    return r;
  }
  const int restart_n = cfg.restart_every > 0 ? cfg.restart_every : static_cast<int>(std::max<Eigen::Index>(1, r.x.size()));

  VectorXd d = -g;
  bool steepest = true;
  int since_restart = 0;
  double prev_step = 0.0, prev_slope = 0.0;
  r.status = CgStatus::max_iterations;

  while (r.iterations < cfg.max_iters) {
    if (r.grad_norm < cfg.grad_tol) {
      r.status = CgStatus::converged;
      break;
    }
    double slope = g.dot(d);
    if (!(slope < 0.0)) {
      d = -g;
      steepest = true;
      slope = -g.squaredNorm();
    }
    double a0 = prev_step > 0.0 ? prev_step * prev_slope / slope
                                : cfg.initial_step * std::min(1.0, 1.0 / g.cwiseAbs().maxCoeff());
    if (!(a0 > 0.0) || !std::isfinite(a0)) a0 = cfg.initial_step;

    LineSearchResult ls = strong_wolfe_search(objective, r.x, r.f, g, d, a0, cfg);
    r.evaluations += ls.evaluations;
    if (!ls.ok && !steepest) {
      d = -g;
      steepest = true;
      slope = -g.squaredNorm();
      a0 = cfg.initial_step * std::min(1.0, 1.0 / g.cwiseAbs().maxCoeff());
      ls = strong_wolfe_search(objective, r.x, r.f, g, d, a0, cfg);
      r.evaluations += ls.evaluations;
    }
    if (!ls.ok) {
      r.status = ls.non_finite ? CgStatus::non_finite : CgStatus::line_search_failed;
      break;
    }

    CgIteration it;
    it.step = ls.step;
    it.evaluations = ls.evaluations;
    it.restarted = steepest;
    it.armijo = ls.f <= r.f + cfg.c1 * ls.step * slope;
    it.curvature = std::abs(ls.grad.dot(d)) <= -cfg.c2 * slope;
    if (!it.armijo || !it.curvature) throw std::logic_error("ncg_minimize: accepted step violates strong Wolfe");

    r.x += ls.step * d;
    const double beta_pr = ls.grad.dot(ls.grad - g) / g.squaredNorm();
    r.f = ls.f;
    g = ls.grad;
    r.grad_norm = g.norm();
    it.f = r.f;
    it.grad_norm = r.grad_norm;
    r.trace.push_back(it);
    ++r.iterations;

    prev_step = ls.step;
    prev_slope = slope;
    ++since_restart;
    double beta = std::max(0.0, beta_pr);
    if (since_restart >= restart_n || !std::isfinite(beta)) {
      beta = 0.0;
      since_restart = 0;
    }
    d = -g + beta * d;
    steepest = beta == 0.0;
  }
  if (r.status == CgStatus::max_iterations && r.grad_norm < cfg.grad_tol) r.status = CgStatus::converged;
  return r;
}

std::vector<std::vector<std::size_t>> epoch_batches(std::size_t n, const MinibatchCgConfig& cfg, int epoch) {
  if (cfg.batch_size < 1) throw std::invalid_argument("minibatch_ncg: batch_size must be >= 1");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  if (cfg.shuffle) {
    Rng rng(derive_seed(cfg.seed, 0x5eed, static_cast<std::uint64_t>(epoch)));
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[uniform_index(rng, i)]);
  }
  std::vector<std::vector<std::size_t>> batches;
  const auto bs = static_cast<std::size_t>(cfg.batch_size);
  for (std::size_t lo = 0; lo < n; lo += bs)
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(lo),
                         order.begin() + static_cast<std::ptrdiff_t>(std::min(n, lo + bs)));
  return batches;
}

VectorXd minibatch_ncg(const BatchObjectiveFactory& factory, std::size_t n_examples, VectorXd x,
                       const MinibatchCgConfig& cfg, const BatchCallback& on_batch, const EpochCallback& on_epoch,
                       int first_epoch) {
  if (n_examples == 0) throw std::invalid_argument("minibatch_ncg: no examples");
  int round = 0;
  for (int epoch = 0; epoch < first_epoch; ++epoch)
    round += static_cast<int>((n_examples + static_cast<std::size_t>(cfg.batch_size) - 1) /
                              static_cast<std::size_t>(cfg.batch_size));
  for (int epoch = first_epoch; epoch < cfg.epochs; ++epoch) {
    const auto batches = epoch_batches(n_examples, cfg, epoch);
    for (std::size_t b = 0; b < batches.size(); ++b) {
      const ObjectiveFn obj =
          factory(batches[b], derive_seed(cfg.seed, static_cast<std::uint64_t>(epoch), static_cast<std::uint64_t>(b)));
      CgResult r = ncg_minimize(obj, x, cfg.cg);
      if (r.status == CgStatus::non_finite)
        throw std::runtime_error("minibatch_ncg: non-finite objective in epoch " + std::to_string(epoch) +
                                 ", batch " + std::to_string(b));
      x = std::move(r.x);
      BatchRound br{epoch, static_cast<int>(b), round++, r.f_initial, r.f, r.status, std::move(r.trace)};
      if (on_batch && !on_batch(br, x)) return x;
    }
    if (on_epoch && !on_epoch(epoch, x)) return x;
  }
  return x;
}

}  // namespace jdbm
