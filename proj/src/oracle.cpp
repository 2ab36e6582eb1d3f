/*
 * SPDX-License-Identifier: Apache-2.0
 */
#include "jdbm/oracle.hpp"

#include <algorithm>
#include <string>

namespace jdbm {
namespace {

std::uint64_t checked_count(int bits, std::uint64_t multiplier, std::uint64_t budget, const char* what) {
  if (bits >= 63 || ((std::uint64_t{1} << bits) > budget / std::max<std::uint64_t>(multiplier, 1)))
    throw BudgetExceeded(std::string(what) + ": enumeration of 2^" + std::to_string(bits) + " x " +
                         std::to_string(multiplier) + " states exceeds the budget of " + std::to_string(budget));
  return (std::uint64_t{1} << bits) * std::max<std::uint64_t>(multiplier, 1);
}

std::vector<int> label_options(const ModelSpec& spec, const ClampSpec& c) {
  if (!spec.has_label()) return {-1};
  if (c.label_mode == LabelMode::clamped) return {c.label};
  std::vector<int> all(static_cast<std::size_t>(spec.n_classes));
  for (int y = 0; y < spec.n_classes; ++y) all[static_cast<std::size_t>(y)] = y;
  return all;
}

void check_clamp(const DbmParams& p, const ClampSpec& c) {
  p.validate();
  c.validate(p.spec());
  if (c.label_mode == LabelMode::zero)
    throw std::invalid_argument("oracle: the all-zero label clamp has no probabilistic meaning");
}

// Enumerates the free h1 units; everything else is summed analytically.
struct H1Enumerator {
  const DbmParams& p;
  const ClampSpec& c;
  std::vector<int> free_h1;
  std::vector<int> classes;
  std::uint64_t count;

  H1Enumerator(const DbmParams& params, const ClampSpec& clamp, std::uint64_t budget)
      : p(params), c(clamp), free_h1(clamp.h1.free_indices()), classes(label_options(params.spec(), clamp)) {
    count = checked_count(static_cast<int>(free_h1.size()), 1, budget, "oracle");
  }

  struct Scratch {
    Vec h1, av, base2, a2, t;
  };

  // Log of the unnormalized weight of h1 configuration `idx`, summed over the
  // free v, h2 and y. Leaves av, base2 and the per-class terms t in scratch.
  double log_weight(std::uint64_t idx, Scratch& s) const {
    s.h1 = c.h1.value;
    for (std::size_t b = 0; b < free_h1.size(); ++b)
      if ((idx >> b) & 1u) s.h1(free_h1[b]) = 1.0;
    s.av.noalias() = p.W1 * s.h1;
    s.av += p.b_v;
    double lw = p.b_h1.dot(s.h1);
    for (Eigen::Index j = 0; j < s.av.size(); ++j)
      lw += c.v.is_fixed(static_cast<int>(j)) ? s.av(j) * c.v.value(j) : softplus(s.av(j));
    s.base2.noalias() = p.W2.transpose() * s.h1;
    s.base2 += p.b_h2;
    s.t.resize(static_cast<Eigen::Index>(classes.size()));
    for (std::size_t k = 0; k < classes.size(); ++k) {
      const int y = classes[k];
      s.a2 = s.base2;
      double t = 0.0;
      if (y >= 0) {
        s.a2 += p.W3.col(y);
        t += p.b_y(y);
      }
      for (Eigen::Index i = 0; i < s.a2.size(); ++i)
        t += c.h2.is_fixed(static_cast<int>(i)) ? s.a2(i) * c.h2.value(i) : softplus(s.a2(i));
      s.t(static_cast<Eigen::Index>(k)) = t;
    }
    return lw + log_sum_exp(s.t);
  }

  std::size_t chunk() const { return std::max<std::size_t>(64, static_cast<std::size_t>(count / 1024)); }
};

struct LseAcc {
  LogSumExp lse;
  H1Enumerator::Scratch s;
  LseAcc& operator+=(const LseAcc& o) {
    lse += o.lse;
    return *this;
  }
};

struct StatsAcc {
  DbmParams stats;
  H1Enumerator::Scratch s;
  Vec ev, eh2, eh2y;
  StatsAcc& operator+=(const StatsAcc& o) {
    stats += o.stats;
    return *this;
  }
};

double log_sum_impl(const H1Enumerator& e, Exec exec) {
  auto acc = chunked_reduce<LseAcc>(
      e.count, exec, [] { return LseAcc{}; },
      [&](std::size_t idx, LseAcc& a) { a.lse.add(e.log_weight(idx, a.s)); }, e.chunk());
  return acc.lse.value();
}

DbmParams stats_impl(const H1Enumerator& e, double log_total, Exec exec) {
  const ModelSpec spec = e.p.spec();
  auto acc = chunked_reduce<StatsAcc>(
      e.count, exec, [&] { return StatsAcc{DbmParams::zeros(spec), {}, {}, {}, {}}; },
      [&](std::size_t idx, StatsAcc& a) {
        const double lw = e.log_weight(idx, a.s);
        const double w = std::exp(lw - log_total);
        if (w == 0.0) return;
        const double ly = log_sum_exp(a.s.t);
        a.ev.resize(a.s.av.size());
        for (Eigen::Index j = 0; j < a.ev.size(); ++j)
          a.ev(j) = e.c.v.is_fixed(static_cast<int>(j)) ? e.c.v.value(j) : sigmoid(a.s.av(j));
        a.eh2 = Vec::Zero(spec.n_hidden2);
        for (std::size_t k = 0; k < e.classes.size(); ++k) {
          const int y = e.classes[k];
          const double py = std::exp(a.s.t(static_cast<Eigen::Index>(k)) - ly);
          a.s.a2 = a.s.base2;
          if (y >= 0) a.s.a2 += e.p.W3.col(y);
          a.eh2y.resize(spec.n_hidden2);
          for (Eigen::Index i = 0; i < a.eh2y.size(); ++i)
            a.eh2y(i) = e.c.h2.is_fixed(static_cast<int>(i)) ? e.c.h2.value(i) : sigmoid(a.s.a2(i));
          a.eh2 += py * a.eh2y;
          if (y >= 0) {
            a.stats.W3.col(y) += (w * py) * a.eh2y;
            a.stats.b_y(y) += w * py;
          }
        }
        a.stats.W1.noalias() += w * a.ev * a.s.h1.transpose();
        a.stats.W2.noalias() += w * a.s.h1 * a.eh2.transpose();
        a.stats.b_v += w * a.ev;
        a.stats.b_h1 += w * a.s.h1;
        a.stats.b_h2 += w * a.eh2;
      },
      e.chunk());
  return acc.stats;
}

}  // namespace

double exact_log_sum(const DbmParams& params, const ClampSpec& clamp, const OracleOptions& opt) {
  check_clamp(params, clamp);
  return log_sum_impl(H1Enumerator(params, clamp, opt.budget), opt.exec);
}

double exact_log_partition(const DbmParams& params, const OracleOptions& opt) {
  return exact_log_sum(params, ClampSpec::none(params.spec()), opt);
}

double exact_log_marginal(const DbmParams& params, const ClampSpec& clamp, const OracleOptions& opt) {
  return exact_log_sum(params, clamp, opt) - exact_log_partition(params, opt);
}

double exact_log_joint(const DbmParams& params, const Vec& v, int label, const OracleOptions& opt) {
  const ModelSpec spec = params.spec();
  return exact_log_marginal(params, ClampSpec::observed(spec, Example{v, spec.has_label() ? label : -1}), opt);
}

DbmParams exact_expected_statistics(const DbmParams& params, const ClampSpec& clamp, const OracleOptions& opt) {
  check_clamp(params, clamp);
  const H1Enumerator e(params, clamp, opt.budget);
  return stats_impl(e, log_sum_impl(e, opt.exec), opt.exec);
}

Marginals exact_posterior_marginals(const DbmParams& params, const ClampSpec& clamp, const OracleOptions& opt) {
  DbmParams s = exact_expected_statistics(params, clamp, opt);
  return Marginals{std::move(s.b_v), std::move(s.b_h1), std::move(s.b_h2), std::move(s.b_y)};
}

double exact_inpaint_logprob(const DbmParams& params, const Example& ex, const MaskSet& mask,
                             const OracleOptions& opt) {
  const ModelSpec spec = params.spec();
  if (mask.empty()) return 0.0;
  const ClampSpec all = ClampSpec::observed(spec, ex);
  const ClampSpec cond = inpaint_clamp(spec, ex, mask);
  return exact_log_sum(params, all, opt) - exact_log_sum(params, cond, opt);
}

ParamGradient exact_clamped_loglik_gradient(const DbmParams& params, std::span<const ClampSpec> clamps,
                                            const OracleOptions& opt) {
  if (clamps.empty()) throw std::invalid_argument("exact_loglik_gradient: empty batch");
  ParamGradient g = DbmParams::zeros(params.spec());
  for (const auto& c : clamps) g += exact_expected_statistics(params, c, opt);
  g *= 1.0 / static_cast<double>(clamps.size());
  g -= exact_expected_statistics(params, ClampSpec::none(params.spec()), opt);
  return g;
}

ParamGradient exact_loglik_gradient(const DbmParams& params, std::span<const Example> batch,
                                    const OracleOptions& opt) {
  std::vector<ClampSpec> clamps;
  clamps.reserve(batch.size());
  for (const auto& ex : batch) clamps.push_back(ClampSpec::observed(params.spec(), ex));
  return exact_clamped_loglik_gradient(params, clamps, opt);
}

namespace brute {
namespace {

struct FreeSet {
  std::vector<int> v, h1, h2;
  std::vector<int> classes;
  int bits() const { return static_cast<int>(v.size() + h1.size() + h2.size()); }
};

FreeSet free_set(const DbmParams& p, const ClampSpec& c) {
  check_clamp(p, c);
  return FreeSet{c.v.free_indices(), c.h1.free_indices(), c.h2.free_indices(), label_options(p.spec(), c)};
}

// Visits every configuration of the free units: label outermost, then the h2,
// h1 and v bit patterns (v varies fastest).
template <class F>
void for_each_state(const DbmParams& p, const ClampSpec& c, std::uint64_t budget, F&& f) {
  const FreeSet fs = free_set(p, c);
  checked_count(fs.bits(), fs.classes.size(), budget, "brute");
  const ModelSpec spec = p.spec();
  FullState s{c.v.value, c.h1.value, c.h2.value, Vec::Zero(spec.n_classes)};
  auto assign = [](Vec& x, const std::vector<int>& idx, std::uint64_t bits) {
    for (std::size_t b = 0; b < idx.size(); ++b) x(idx[b]) = static_cast<double>((bits >> b) & 1u);
  };
  for (int y : fs.classes) {
    if (y >= 0) s.y = one_hot(y, spec.n_classes);
    for (std::uint64_t b2 = 0; b2 < (std::uint64_t{1} << fs.h2.size()); ++b2) {
      assign(s.h2, fs.h2, b2);
      for (std::uint64_t b1 = 0; b1 < (std::uint64_t{1} << fs.h1.size()); ++b1) {
        assign(s.h1, fs.h1, b1);
        for (std::uint64_t bv = 0; bv < (std::uint64_t{1} << fs.v.size()); ++bv) {
          assign(s.v, fs.v, bv);
          f(s);
        }
      }
    }
  }
}

}  // namespace

double energy(const DbmParams& p, const FullState& s) {
  double e = 0.0;
  for (Eigen::Index i = 0; i < p.W1.rows(); ++i)
    for (Eigen::Index j = 0; j < p.W1.cols(); ++j) e -= s.v(i) * p.W1(i, j) * s.h1(j);
  for (Eigen::Index i = 0; i < p.W2.rows(); ++i)
    for (Eigen::Index j = 0; j < p.W2.cols(); ++j) e -= s.h1(i) * p.W2(i, j) * s.h2(j);
  for (Eigen::Index i = 0; i < p.W3.rows(); ++i)
    for (Eigen::Index j = 0; j < p.W3.cols(); ++j) e -= s.h2(i) * p.W3(i, j) * s.y(j);
  for (Eigen::Index i = 0; i < p.b_v.size(); ++i) e -= p.b_v(i) * s.v(i);
  for (Eigen::Index i = 0; i < p.b_h1.size(); ++i) e -= p.b_h1(i) * s.h1(i);
  for (Eigen::Index i = 0; i < p.b_h2.size(); ++i) e -= p.b_h2(i) * s.h2(i);
  for (Eigen::Index i = 0; i < p.b_y.size(); ++i) e -= p.b_y(i) * s.y(i);
  return e;
}

double log_sum(const DbmParams& p, const ClampSpec& c, std::uint64_t budget) {
  LogSumExp lse;
  for_each_state(p, c, budget, [&](const FullState& s) { lse.add(-brute::energy(p, s)); });
  return lse.value();
}

double log_partition(const DbmParams& p, std::uint64_t budget) {
  return log_sum(p, ClampSpec::none(p.spec()), budget);
}

Marginals marginals(const DbmParams& p, const ClampSpec& c, std::uint64_t budget) {
  const double total = log_sum(p, c, budget);
  const ModelSpec spec = p.spec();
  Marginals m{Vec::Zero(spec.n_visible), Vec::Zero(spec.n_hidden1), Vec::Zero(spec.n_hidden2),
              Vec::Zero(spec.n_classes)};
  for_each_state(p, c, budget, [&](const FullState& s) {
    const double w = std::exp(-brute::energy(p, s) - total);
    m.v += w * s.v;
    m.h1 += w * s.h1;
    m.h2 += w * s.h2;
    m.y += w * s.y;
  });
  return m;
}

}  // namespace brute
}  // namespace jdbm
