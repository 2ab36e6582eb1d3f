/*
 * SPDX-License-Identifier: Apache-2.0
 */
#include "jdbm/mean_field.hpp"

#include <stdexcept>

namespace jdbm {
namespace {

void copy_free(Vec& dst, const Vec& src, const LayerClamp& clamp) {
  for (Eigen::Index i = 0; i < dst.size(); ++i)
    if (!clamp.is_fixed(static_cast<int>(i))) dst(i) = src(i);
}

double binary_entropy(double q) {
  double h = 0.0;
  if (q > 0.0) h -= q * std::log(q);
  if (q < 1.0) h -= (1.0 - q) * std::log1p(-q);
  return h;
}

}  // namespace

MeanFieldState mf_init(const ClampSpec& clamp, const ModelSpec& spec) {
  clamp.validate(spec);
  MeanFieldState s;
  auto layer = [](const LayerClamp& c) {
    Vec x = Vec::Constant(c.size(), 0.5);
    for (int i = 0; i < c.size(); ++i)
      if (c.is_fixed(i)) x(i) = c.value(i);
    return x;
  };
  s.v = layer(clamp.v);
  s.h1 = layer(clamp.h1);
  s.h2 = layer(clamp.h2);
  switch (clamp.label_mode) {
    case LabelMode::free:
      s.y = Vec::Constant(spec.n_classes, spec.has_label() ? 1.0 / spec.n_classes : 0.0);
      break;
    case LabelMode::clamped:
      s.y = one_hot(clamp.label, spec.n_classes);
      break;
    case LabelMode::zero:
      s.y = Vec::Zero(spec.n_classes);
      break;
  }
  s.clamp = clamp;
  return s;
}

void mf_update(const DbmParams& p, MeanFieldState& s, Block block) {
  switch (block) {
    case Block::hidden1:
      copy_free(s.h1, hidden1_probs(p, s.v, s.h2), s.clamp.h1);
      break;
    case Block::hidden2:
      copy_free(s.h2, hidden2_probs(p, s.h1, s.y), s.clamp.h2);
      break;
    case Block::label:
      if (s.clamp.label_mode == LabelMode::free && s.y.size() > 0) s.y = label_probs(p, s.h2);
      break;
    case Block::visible:
      copy_free(s.v, visible_probs(p, s.h1), s.clamp.v);
      break;
  }
}

void mf_sweep_inplace(const DbmParams& p, MeanFieldState& s) {
  mf_update(p, s, Block::hidden1);
  mf_update(p, s, Block::hidden2);
  mf_update(p, s, Block::label);
  mf_update(p, s, Block::visible);
}

MeanFieldState mf_sweep(const DbmParams& p, const MeanFieldState& s) {
  MeanFieldState out = s;
  mf_sweep_inplace(p, out);
  return out;
}

namespace {

double max_change(const MeanFieldState& a, const MeanFieldState& b) {
  double d = 0.0;
  if (a.v.size()) d = std::max(d, (a.v - b.v).cwiseAbs().maxCoeff());
  if (a.h1.size()) d = std::max(d, (a.h1 - b.h1).cwiseAbs().maxCoeff());
  if (a.h2.size()) d = std::max(d, (a.h2 - b.h2).cwiseAbs().maxCoeff());
  if (a.y.size()) d = std::max(d, (a.y - b.y).cwiseAbs().maxCoeff());
  return d;
}

}  // namespace

double mf_residual(const DbmParams& p, const MeanFieldState& s) { return max_change(s, mf_sweep(p, s)); }

MeanFieldResult mf_infer(const DbmParams& p, const ClampSpec& clamp, const MeanFieldConfig& cfg) {
  if (cfg.max_sweeps < 1) throw std::invalid_argument("mf_infer: max_sweeps must be >= 1");
  MeanFieldResult r;
  r.state = mf_init(clamp, p.spec());
  MeanFieldState prev;
  for (r.sweeps = 1; r.sweeps <= cfg.max_sweeps; ++r.sweeps) {
    prev = r.state;
    mf_sweep_inplace(p, r.state);
    r.last_change = max_change(prev, r.state);
    if (r.last_change < cfg.tol) {
      r.converged = true;
      return r;
    }
  }
  r.sweeps = cfg.max_sweeps;
  return r;
}

std::vector<MeanFieldResult> mf_infer_batch(const DbmParams& p, std::span<const ClampSpec> clamps,
                                            const MeanFieldConfig& cfg, Exec exec) {
  std::vector<MeanFieldResult> out(clamps.size());
  parallel_for(clamps.size(), exec, [&](std::size_t i) { out[i] = mf_infer(p, clamps[i], cfg); });
  return out;
}

double elbo(const DbmParams& p, const MeanFieldState& s) {
  // The energy is multilinear across layers, so E_Q[-E] is -E at the means.
  double e = s.v.dot(p.W1 * s.h1) + s.h1.dot(p.W2 * s.h2) + p.b_v.dot(s.v) + p.b_h1.dot(s.h1) + p.b_h2.dot(s.h2);
  if (s.y.size() > 0) e += s.h2.dot(p.W3 * s.y) + p.b_y.dot(s.y);
  double h = 0.0;
  for (const Vec* layer : {&s.v, &s.h1, &s.h2})
    for (Eigen::Index i = 0; i < layer->size(); ++i) h += binary_entropy((*layer)(i));
  for (Eigen::Index i = 0; i < s.y.size(); ++i)
    if (s.y(i) > 0.0) h -= s.y(i) * std::log(s.y(i));
  return e + h;
}

void accumulate_statistics(DbmParams& acc, const MeanFieldState& s, double weight) {
  accumulate_statistics(acc, s.v, s.h1, s.h2, s.y, weight);
}

}  // namespace jdbm
