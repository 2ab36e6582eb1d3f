/*
 * SPDX-License-Identifier: Apache-2.0
 */
#include "jdbm/baseline.hpp"

#include <stdexcept>

#include "jdbm/ncg.hpp"

namespace jdbm {

RbmParams RbmParams::zeros(int n_visible, int n_hidden, int n_classes) {
  if (n_visible < 1 || n_hidden < 1 || n_classes < 0) throw std::invalid_argument("RbmParams: bad sizes");
  return RbmParams{Mat::Zero(n_visible, n_hidden), Vec::Zero(n_visible), Vec::Zero(n_hidden),
                   Mat::Zero(n_hidden, n_classes), Vec::Zero(n_classes)};
}

void RbmParams::validate() const {
  if (b_vis.size() != W.rows() || b_hid.size() != W.cols() || W_y.rows() != W.cols() || b_y.size() != W_y.cols())
    throw std::invalid_argument("RbmParams: inconsistent shapes");
  if (!all_finite()) throw std::invalid_argument("RbmParams: non-finite entry");
}

bool RbmParams::all_finite() const {
  return W.allFinite() && b_vis.allFinite() && b_hid.allFinite() && W_y.allFinite() && b_y.allFinite();
}

RbmParams& RbmParams::operator+=(const RbmParams& o) {
  add_scaled(o, 1.0);
  return *this;
}

RbmParams& RbmParams::operator*=(double s) {
  W *= s;
  b_vis *= s;
  b_hid *= s;
  W_y *= s;
  b_y *= s;
  return *this;
}

void RbmParams::add_scaled(const RbmParams& o, double s) {
  W += s * o.W;
  b_vis += s * o.b_vis;
  b_hid += s * o.b_hid;
  W_y += s * o.W_y;
  b_y += s * o.b_y;
}

double RbmParams::dot(const RbmParams& o) const {
  return W.cwiseProduct(o.W).sum() + b_vis.dot(o.b_vis) + b_hid.dot(o.b_hid) + W_y.cwiseProduct(o.W_y).sum() +
         b_y.dot(o.b_y);
}

Vec rbm_hidden_input(const RbmParams& p, const RbmScaling& s, const Vec& v, const Vec& y) {
  Vec a = s.hidden_input * (p.W.transpose() * v) + p.b_hid;
  if (p.n_classes() > 0) a.noalias() += p.W_y * y;
  return a;
}

Vec rbm_visible_input(const RbmParams& p, const RbmScaling& s, const Vec& h) {
  return s.visible_input * (p.W * h) + p.b_vis;
}

Vec sample_bernoulli(const Vec& probs, Rng& rng) {
  Vec out(probs.size());
  for (Eigen::Index i = 0; i < probs.size(); ++i) out(i) = bernoulli(rng, probs(i)) ? 1.0 : 0.0;
  return out;
}

int sample_categorical(const Vec& probs, Rng& rng) {
  const double u = uniform01(rng);
  double c = 0.0;
  for (Eigen::Index i = 0; i < probs.size(); ++i) {
    c += probs(i);
    if (u < c) return static_cast<int>(i);
  }
  // Rounding left the cumulative sum just below u.
  return static_cast<int>(probs.size() - 1);
}

namespace {

Mat sigmoid_rows(const Mat& a) { return a.unaryExpr([](double x) { return sigmoid(x); }); }

Mat sample_rows(const Mat& probs, Rng& rng) {
  Mat s(probs.rows(), probs.cols());
  for (Eigen::Index i = 0; i < probs.rows(); ++i)
    for (Eigen::Index j = 0; j < probs.cols(); ++j) s(i, j) = bernoulli(rng, probs(i, j)) ? 1.0 : 0.0;
  return s;
}

Mat one_hot_rows(std::span<const int> labels, int k) {
  Mat y = Mat::Zero(static_cast<Eigen::Index>(labels.size()), k);
  for (std::size_t i = 0; i < labels.size(); ++i) y(static_cast<Eigen::Index>(i), labels[i]) = 1.0;
  return y;
}

// Hidden probabilities for a batch of visible rows.
Mat hidden_probs_rows(const RbmParams& p, const RbmScaling& s, const Mat& v, const Mat& y) {
  Mat a = s.hidden_input * (v * p.W);
  a.rowwise() += p.b_hid.transpose();
  if (p.n_classes() > 0) a.noalias() += y * p.W_y.transpose();
  return sigmoid_rows(a);
}

void add_stats(RbmParams& g, const Mat& v, const Mat& h, const Mat& y, double w) {
  const double scale = w / static_cast<double>(v.rows());
  g.W.noalias() += scale * (v.transpose() * h);
  g.b_vis += scale * v.colwise().sum().transpose();
  g.b_hid += scale * h.colwise().sum().transpose();
  if (g.n_classes() > 0) {
    g.W_y.noalias() += scale * (h.transpose() * y);
    g.b_y += scale * y.colwise().sum().transpose();
  }
}

void check_binary(const Mat& m, const char* what) {
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    const double x = m.data()[i];
    if (x != 0.0 && x != 1.0) throw std::invalid_argument(std::string(what) + ": data must be binary");
  }
}

void check_labels(std::span<const int> labels, int k, Eigen::Index n) {
  if (static_cast<Eigen::Index>(labels.size()) != n) throw std::invalid_argument("train_top_rbm: one label per row");
  for (int c : labels)
    if (c < 0 || c >= k) throw std::invalid_argument("train_top_rbm: label out of range");
}

RbmParams train_impl(const Mat& data, std::span<const int> labels, int k, const RbmTrainConfig& cfg) {
  const int n_hidden = cfg.n_hidden;
  if (cfg.epochs < 0 || cfg.batch_size < 1 || cfg.cd_k < 1) throw std::invalid_argument("RbmTrainConfig: bad value");
  if (data.rows() < 1) throw std::invalid_argument("train_rbm: empty data");
  RbmParams p = RbmParams::zeros(static_cast<int>(data.cols()), n_hidden, k);
  {
    Rng rng(derive_seed(cfg.seed, 0x1417));
    for (Eigen::Index i = 0; i < p.W.size(); ++i) p.W.data()[i] = cfg.init_stddev * gaussian(rng);
    for (Eigen::Index i = 0; i < p.W_y.size(); ++i) p.W_y.data()[i] = cfg.init_stddev * gaussian(rng);
  }
  RbmParams velocity = RbmParams::zeros(p.n_visible(), n_hidden, k);

  RbmChains chains;
  if (cfg.persistent) {
    const int m = cfg.n_chains > 0 ? cfg.n_chains : cfg.batch_size;
    Rng rng(derive_seed(cfg.seed, 0xc4a1));
    chains.v = sample_rows(Mat::Constant(m, p.n_visible(), 0.5), rng);
    for (int i = 0; i < m && k > 0; ++i) chains.y.push_back(static_cast<int>(uniform_index(rng, k)));
  }

  const MinibatchCgConfig schedule{.batch_size = cfg.batch_size, .shuffle = true, .seed = cfg.seed};
  const std::size_t n = static_cast<std::size_t>(data.rows());
  for (int e = 0; e < cfg.epochs; ++e) {
    const double lr = cfg.learning_rate / (1.0 + cfg.lr_decay * e);
    const double mom = e < cfg.momentum_switch_epoch ? cfg.momentum : cfg.final_momentum;
    const auto batches = epoch_batches(n, schedule, e);
    for (std::size_t b = 0; b < batches.size(); ++b) {
      const auto& idx = batches[b];
      Mat v(static_cast<Eigen::Index>(idx.size()), data.cols());
      std::vector<int> y;
      for (std::size_t i = 0; i < idx.size(); ++i) {
        v.row(static_cast<Eigen::Index>(i)) = data.row(static_cast<Eigen::Index>(idx[i]));
        if (k > 0) y.push_back(labels[idx[i]]);
      }
      Rng rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(e), b));
      RbmParams g = rbm_gradient(p, v, y, chains, cfg, rng);
      g.W -= cfg.weight_decay * p.W;
      g.W_y -= cfg.weight_decay * p.W_y;
      velocity *= mom;
      velocity.add_scaled(g, lr);
      p += velocity;
    }
    if (!p.all_finite()) throw std::runtime_error("train_rbm: parameters diverged");
  }
  return p;
}

}  // namespace

RbmParams rbm_gradient(const RbmParams& p, const Mat& v_batch, std::span<const int> labels, RbmChains& chains,
                       const RbmTrainConfig& cfg, Rng& rng) {
  const int k = p.n_classes();
  const Mat y_batch = k > 0 ? one_hot_rows(labels, k) : Mat(v_batch.rows(), 0);
  RbmParams g = RbmParams::zeros(p.n_visible(), p.n_hidden(), k);
  add_stats(g, v_batch, hidden_probs_rows(p, cfg.scaling, v_batch, y_batch), y_batch, 1.0);

  if (!cfg.persistent) {
    chains.v = v_batch;
    chains.y.assign(labels.begin(), labels.end());
  }
  if (chains.v.rows() < 1) throw std::invalid_argument("rbm_gradient: no chains");
  Mat yc = k > 0 ? one_hot_rows(chains.y, k) : Mat(chains.v.rows(), 0);
  for (int step = 0; step < cfg.cd_k; ++step) {
    const Mat h = sample_rows(hidden_probs_rows(p, cfg.scaling, chains.v, yc), rng);
    Mat av = cfg.scaling.visible_input * (h * p.W.transpose());
    av.rowwise() += p.b_vis.transpose();
    chains.v = sample_rows(sigmoid_rows(av), rng);
    if (k > 0) {
      Mat ay = h * p.W_y;
      ay.rowwise() += p.b_y.transpose();
      for (Eigen::Index i = 0; i < ay.rows(); ++i)
        chains.y[static_cast<std::size_t>(i)] = sample_categorical(softmax(ay.row(i).transpose()), rng);
      yc = one_hot_rows(chains.y, k);
    }
  }
  add_stats(g, chains.v, hidden_probs_rows(p, cfg.scaling, chains.v, yc), yc, -1.0);
  return g;
}

RbmParams train_rbm(const Mat& data, const RbmTrainConfig& cfg) {
  check_binary(data, "train_rbm");
  return train_impl(data, {}, 0, cfg);
}

RbmParams train_top_rbm(const Mat& h1, std::span<const int> labels, int n_classes, const RbmTrainConfig& cfg) {
  if (n_classes < 1) throw std::invalid_argument("train_top_rbm: need at least one class");
  check_binary(h1, "train_top_rbm");
  check_labels(labels, n_classes, h1.rows());
  return train_impl(h1, labels, n_classes, cfg);
}

Mat sample_hidden_layer(const RbmParams& bottom, const RbmScaling& scaling, const Mat& data, std::uint64_t seed,
                        bool use_mean) {
  const Mat probs = hidden_probs_rows(bottom, scaling, data, Mat(data.rows(), 0));
  if (use_mean) return probs;
  Rng rng(seed);
  return sample_rows(probs, rng);
}

DbmParams assemble_dbm(const RbmParams& bottom, const RbmParams& top) {
  bottom.validate();
  top.validate();
  if (bottom.n_classes() != 0) throw std::invalid_argument("assemble_dbm: bottom RBM must not carry a label");
  if (bottom.n_hidden() != top.n_visible())
    throw std::invalid_argument("assemble_dbm: bottom hidden size differs from top visible size");
  DbmParams p = DbmParams::zeros({bottom.n_visible(), bottom.n_hidden(), top.n_hidden(), top.n_classes()});
  p.W1 = bottom.W;
  p.W2 = top.W;
  p.W3 = top.W_y;
  p.b_v = bottom.b_vis;
  p.b_h1 = bottom.b_hid;
  p.b_h2 = top.b_hid;
  p.b_y = top.b_y;
  return p;
}

// --- Gibbs and PCD ------------------------------------------------------------

void gibbs_sweep(const DbmParams& params, FullState& s, Rng& rng) {
  s.h1 = sample_bernoulli(hidden1_probs(params, s.v, s.h2), rng);
  s.h2 = sample_bernoulli(hidden2_probs(params, s.h1, s.y), rng);
  if (params.spec().has_label()) s.y = one_hot(sample_categorical(label_probs(params, s.h2), rng), params.spec().n_classes);
  s.v = sample_bernoulli(visible_probs(params, s.h1), rng);
}

ChainState ChainState::init(const ModelSpec& spec, int n_chains, std::uint64_t seed) {
  if (n_chains < 1) throw std::invalid_argument("ChainState: need at least one chain");
  ChainState c;
  Rng rng(seed);
  auto coin = [&](int n) {
    Vec x(n);
    for (int i = 0; i < n; ++i) x(i) = bernoulli(rng, 0.5) ? 1.0 : 0.0;
    return x;
  };
  for (int i = 0; i < n_chains; ++i) {
    FullState s{coin(spec.n_visible), coin(spec.n_hidden1), coin(spec.n_hidden2), Vec::Zero(spec.n_classes)};
    if (spec.has_label()) s.y = one_hot(static_cast<int>(uniform_index(rng, spec.n_classes)), spec.n_classes);
    c.states.push_back(std::move(s));
  }
  c.rngs.resize(c.states.size());
  c.reseed(derive_seed(seed, 1));
  return c;
}

void ChainState::reseed(std::uint64_t seed) {
  rngs.resize(states.size());
  for (std::size_t i = 0; i < rngs.size(); ++i) rngs[i].seed(derive_seed(seed, i));
}

void advance_chains(const DbmParams& params, ChainState& chains, int sweeps, Exec exec) {
  if (chains.rngs.size() != chains.states.size()) throw std::invalid_argument("advance_chains: one stream per chain");
  parallel_for(chains.states.size(), exec, [&](std::size_t i) {
    for (int s = 0; s < sweeps; ++s) gibbs_sweep(params, chains.states[i], chains.rngs[i]);
  });
}

DbmParams positive_statistics(const DbmParams& params, std::span<const Example> batch, const MeanFieldConfig& mf,
                              Exec exec) {
  if (batch.empty()) throw std::invalid_argument("positive_statistics: empty batch");
  const ModelSpec spec = params.spec();
  DbmParams pos = chunked_reduce<DbmParams>(
      batch.size(), exec, [&] { return DbmParams::zeros(spec); },
      [&](std::size_t i, DbmParams& acc) {
        accumulate_statistics(acc, mf_infer(params, ClampSpec::observed(spec, batch[i]), mf).state);
      });
  pos *= 1.0 / static_cast<double>(batch.size());
  return pos;
}

ParamGradient pcd_step(const DbmParams& params, std::span<const Example> batch, ChainState& chains,
                       const PcdConfig& cfg) {
  const ModelSpec spec = params.spec();
  ParamGradient g = positive_statistics(params, batch, cfg.positive, cfg.exec);
  advance_chains(params, chains, cfg.gibbs_sweeps, cfg.exec);
  DbmParams neg = chunked_reduce<DbmParams>(
      chains.states.size(), cfg.exec, [&] { return DbmParams::zeros(spec); },
      [&](std::size_t i, DbmParams& acc) {
        const FullState& s = chains.states[i];
        accumulate_statistics(acc, s.v, s.h1, s.h2, s.y);
      });
  g.add_scaled(neg, -1.0 / static_cast<double>(chains.size()));
  return g;
}

PcdState PcdState::start(const DbmParams& init, const PcdTrainConfig& cfg) {
  const int m = cfg.n_chains > 0 ? cfg.n_chains : cfg.batch_size;
  return PcdState{init, DbmParams::zeros(init.spec()), ChainState::init(init.spec(), m, derive_seed(cfg.seed, 0xc4a1)),
                  0};
}

void train_pcd(PcdState& st, std::span<const Example> data, const PcdTrainConfig& cfg,
               const std::function<bool(const PcdState&)>& on_epoch) {
  if (data.empty()) throw std::invalid_argument("train_pcd: empty data");
  if (cfg.batch_size < 1) throw std::invalid_argument("train_pcd: batch_size must be >= 1");
  const MinibatchCgConfig schedule{.batch_size = cfg.batch_size, .shuffle = true, .seed = cfg.seed};
  std::vector<Example> batch;
  for (int e = st.epoch; e < cfg.epochs; ++e) {
    const double lr = cfg.learning_rate / (1.0 + cfg.lr_decay * e);
    const double mom = e < cfg.momentum_switch_epoch ? cfg.momentum : cfg.final_momentum;
    const auto batches = epoch_batches(data.size(), schedule, e);
    for (std::size_t b = 0; b < batches.size(); ++b) {
      batch.clear();
      for (std::size_t i : batches[b]) batch.push_back(data[i]);
      st.chains.reseed(derive_seed(cfg.seed, static_cast<std::uint64_t>(e), b));
      ParamGradient g = pcd_step(st.params, batch, st.chains, cfg.step);
      g.W1 -= cfg.weight_decay * st.params.W1;
      g.W2 -= cfg.weight_decay * st.params.W2;
      g.W3 -= cfg.weight_decay * st.params.W3;
      st.velocity *= mom;
      st.velocity.add_scaled(g, lr);
      st.params += st.velocity;
    }
    if (!st.params.all_finite()) throw std::runtime_error("train_pcd: parameters diverged");
    st.epoch = e + 1;
    if (on_epoch && !on_epoch(st)) return;
  }
}

DbmParams train_pcd(const DbmParams& init, std::span<const Example> data, const PcdTrainConfig& cfg) {
  PcdState st = PcdState::start(init, cfg);
  train_pcd(st, data, cfg);
  return st.params;
}

}  // namespace jdbm
