/*
 * SPDX-License-Identifier: Apache-2.0
 */
#include "jdbm/inpainting.hpp"

#include <memory>
#include <stdexcept>

namespace jdbm {

void MaskConfig::validate() const {
  if (!(p > 0.0 && p <= 1.0)) throw std::invalid_argument("MaskConfig: p must lie in (0, 1]");
  if (max_retries < 0) throw std::invalid_argument("MaskConfig: max_retries must be >= 0");
}

MaskSet sample_mask(const ModelSpec& spec, const MaskConfig& cfg, Rng& rng) {
  cfg.validate();
  const bool label_in_lottery = cfg.mask_label && spec.has_label();
  MaskSet m;
  for (int attempt = 0; attempt <= cfg.max_retries; ++attempt) {
    m.masked_visibles.clear();
    for (int j = 0; j < spec.n_visible; ++j)
      if (!bernoulli(rng, cfg.p)) m.masked_visibles.push_back(j);
    m.label_masked = label_in_lottery && !bernoulli(rng, cfg.p);
    if (!m.empty()) return m;
  }
  const auto n = static_cast<std::uint64_t>(spec.n_visible + (label_in_lottery ? 1 : 0));
  const auto pick = static_cast<int>(uniform_index(rng, n));
  if (pick == spec.n_visible)
    m.label_masked = true;
  else
    m.masked_visibles.push_back(pick);
  return m;
}

std::vector<MaskSet> sample_masks(const ModelSpec& spec, std::size_t n, const MaskConfig& cfg, std::uint64_t seed) {
  std::vector<MaskSet> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    Rng rng(derive_seed(seed, i));
    out.push_back(sample_mask(spec, cfg, rng));
  }
  return out;
}

namespace {

void check_query(const MaskSet& mask, int sweeps) {
  if (sweeps < 1) throw std::invalid_argument("inpainting: need at least one sweep");
  if (mask.empty()) throw std::invalid_argument("inpainting: empty mask");
}

double floored_log(double q) { return std::log(std::max(q, kProbFloor)); }

}  // namespace

UnrollTrace unroll(const DbmParams& params, const ClampSpec& clamp, int sweeps) {
  if (sweeps < 1) throw std::invalid_argument("unroll: need at least one sweep");
  UnrollTrace t;
  t.inputs.reserve(static_cast<std::size_t>(sweeps));
  MeanFieldState s = mf_init(clamp, params.spec());
  for (int k = 0; k < sweeps; ++k) {
    t.inputs.push_back(s);
    mf_sweep_inplace(params, s);
  }
  t.output = std::move(s);
  return t;
}

double inpaint_score(const Example& ex, const MaskSet& mask, const MeanFieldState& q) {
  double score = 0.0;
  for (int j : mask.masked_visibles) {
    const double x = ex.v(j);
    score += x * floored_log(q.v(j)) + (1.0 - x) * floored_log(1.0 - q.v(j));
  }
  if (mask.label_masked) score += floored_log(q.y(ex.label));
  return score;
}

double inpaint_loss(const DbmParams& params, const Example& ex, const MaskSet& mask, int sweeps) {
  check_query(mask, sweeps);
  const ClampSpec clamp = inpaint_clamp(params.spec(), ex, mask);
  MeanFieldState s = mf_init(clamp, params.spec());
  for (int k = 0; k < sweeps; ++k) mf_sweep_inplace(params, s);
  return inpaint_score(ex, mask, s);
}

LossGrad inpaint_grad(const DbmParams& p, const Example& ex, const MaskSet& mask, int sweeps) {
  check_query(mask, sweeps);
  const ModelSpec spec = p.spec();
  const ClampSpec clamp = inpaint_clamp(spec, ex, mask);
  const UnrollTrace trace = unroll(p, clamp, sweeps);

  LossGrad out;
  out.loss = inpaint_score(ex, mask, trace.output);
  out.grad = DbmParams::zeros(spec);
  ParamGradient& G = out.grad;

  // Adjoints of the current value of each block.
  Vec gv = Vec::Zero(spec.n_visible);
  Vec gh1 = Vec::Zero(spec.n_hidden1);
  Vec gh2 = Vec::Zero(spec.n_hidden2);
  Vec gy = Vec::Zero(spec.n_classes);
  for (int j : mask.masked_visibles) {
    const double q = trace.output.v(j), x = ex.v(j);
    double d = 0.0;
    if (q > kProbFloor) d += x / q;
    if (1.0 - q > kProbFloor) d -= (1.0 - x) / (1.0 - q);
    gv(j) = d;
  }
  if (mask.label_masked) {
    const double q = trace.output.y(ex.label);
    if (q > kProbFloor) gy(ex.label) = 1.0 / q;
  }

  const bool y_free = clamp.label_mode == LabelMode::free && spec.has_label();
  auto free_only = [](Vec& d, const LayerClamp& c) {
    for (int i = 0; i < c.size(); ++i)
      if (c.is_fixed(i)) d(i) = 0.0;
  };
  Vec d1, d2, d3, d4;

  for (int t = sweeps; t >= 1; --t) {
    const MeanFieldState& cur = t == sweeps ? trace.output : trace.inputs[static_cast<std::size_t>(t)];
    const MeanFieldState& prev = trace.inputs[static_cast<std::size_t>(t - 1)];

    // v <- sigmoid(W1 h1 + b_v) on free coordinates
    d4 = gv.cwiseProduct(cur.v.cwiseProduct((1.0 - cur.v.array()).matrix()));
    free_only(d4, clamp.v);
    G.W1.noalias() += d4 * cur.h1.transpose();
    G.b_v += d4;
    gh1.noalias() += p.W1.transpose() * d4;
    gv.setZero();

    // y <- softmax(W3' h2 + b_y)
    if (y_free) {
      d3 = cur.y.cwiseProduct((gy.array() - cur.y.dot(gy)).matrix());
      G.W3.noalias() += cur.h2 * d3.transpose();
      G.b_y += d3;
      gh2.noalias() += p.W3 * d3;
    }
    gy.setZero();

    // h2 <- sigmoid(W2' h1 + W3 y_prev + b_h2)
    d2 = gh2.cwiseProduct(cur.h2.cwiseProduct((1.0 - cur.h2.array()).matrix()));
    free_only(d2, clamp.h2);
    G.W2.noalias() += cur.h1 * d2.transpose();
    G.b_h2 += d2;
    gh1.noalias() += p.W2 * d2;
    if (spec.has_label()) {
      G.W3.noalias() += d2 * prev.y.transpose();
      if (y_free) gy.noalias() += p.W3.transpose() * d2;
    }
    gh2.setZero();

    // h1 <- sigmoid(W1' v_prev + W2 h2_prev + b_h1)
    d1 = gh1.cwiseProduct(cur.h1.cwiseProduct((1.0 - cur.h1.array()).matrix()));
    free_only(d1, clamp.h1);
    G.W1.noalias() += prev.v * d1.transpose();
    G.W2.noalias() += d1 * prev.h2.transpose();
    G.b_h1 += d1;
    gv.noalias() += p.W1 * d1;
    free_only(gv, clamp.v);
    gh2.noalias() += p.W2.transpose() * d1;
    gh1.setZero();
  }
  return out;
}

namespace {

struct GradAcc {
  double loss = 0.0;
  ParamGradient grad;
  GradAcc& operator+=(const GradAcc& o) {
    loss += o.loss;
    grad += o.grad;
    return *this;
  }
};

}  // namespace

BatchObjective minibatch_objective(const DbmParams& params, std::span<const Example> batch,
                                   std::span<const MaskSet> masks, int sweeps, Exec exec) {
  if (batch.empty()) throw std::invalid_argument("minibatch_objective: empty batch");
  if (masks.size() != batch.size()) throw std::invalid_argument("minibatch_objective: one mask per example");
  const ModelSpec spec = params.spec();
  GradAcc total = chunked_reduce<GradAcc>(
      batch.size(), exec, [&] { return GradAcc{0.0, DbmParams::zeros(spec)}; },
      [&](std::size_t i, GradAcc& acc) {
        LossGrad lg = inpaint_grad(params, batch[i], masks[i], sweeps);
        acc.loss += lg.loss;
        acc.grad += lg.grad;
      });
  const double scale = -1.0 / static_cast<double>(batch.size());
  total.grad *= scale;
  return BatchObjective{total.loss * scale, std::move(total.grad)};
}

BatchObjective minibatch_objective(const DbmParams& params, std::span<const Example> batch, const MaskConfig& mask,
                                   int sweeps, std::uint64_t seed, Exec exec) {
  const auto masks = sample_masks(params.spec(), batch.size(), mask, seed);
  return minibatch_objective(params, batch, masks, sweeps, exec);
}

double mean_inpaint_score(const DbmParams& params, std::span<const Example> data, std::span<const MaskSet> masks,
                          int sweeps, Exec exec) {
  if (data.empty() || data.size() != masks.size())
    throw std::invalid_argument("mean_inpaint_score: need one mask per example");
  const double sum = chunked_reduce<double>(
      data.size(), exec, [] { return 0.0; },
      [&](std::size_t i, double& acc) { acc += inpaint_loss(params, data[i], masks[i], sweeps); });
  return sum / static_cast<double>(data.size());
}

DbmParams train_jdbm(const DbmParams& init, std::span<const Example> data, const JdbmTrainConfig& cfg,
                     const std::function<bool(const BatchRound&, const DbmParams&)>& on_batch,
                     const std::function<bool(int, const DbmParams&)>& on_epoch, int first_epoch) {
  cfg.mask.validate();
  if (cfg.sweeps < 1) throw std::invalid_argument("train_jdbm: sweeps must be >= 1");
  const ModelSpec spec = init.spec();

  BatchObjectiveFactory factory = [&](std::span<const std::size_t> idx, std::uint64_t batch_seed) -> ObjectiveFn {
    auto batch = std::make_shared<std::vector<Example>>();
    batch->reserve(idx.size());
    for (std::size_t i : idx) batch->push_back(data[i]);
    auto masks = std::make_shared<std::vector<MaskSet>>(sample_masks(spec, idx.size(), cfg.mask, batch_seed));
    return [&, batch, masks](const Vec& x, Vec& grad) {
      const BatchObjective o = minibatch_objective(DbmParams::unflatten(spec, x), *batch, *masks, cfg.sweeps, cfg.exec);
      grad = o.grad.flatten();
      return o.value;
    };
  };
  BatchCallback batch_cb;
  if (on_batch)
    batch_cb = [&](const BatchRound& r, const Vec& x) { return on_batch(r, DbmParams::unflatten(spec, x)); };
  EpochCallback epoch_cb;
  if (on_epoch) epoch_cb = [&](int e, const Vec& x) { return on_epoch(e, DbmParams::unflatten(spec, x)); };

  const Vec x = minibatch_ncg(factory, data.size(), init.flatten(), cfg.optimizer, batch_cb, epoch_cb, first_epoch);
  return DbmParams::unflatten(spec, x);
}

}  // namespace jdbm
