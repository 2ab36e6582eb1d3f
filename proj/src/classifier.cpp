/*
 * SPDX-License-Identifier: Apache-2.0
 */
#include "jdbm/classifier.hpp"

#include <memory>
#include <numeric>
#include <stdexcept>

namespace jdbm {

MlpParams MlpParams::zeros(int d, int n1, int n2, int k) {
  if (d < 1 || n1 < 1 || n2 < 1 || k < 1) throw std::invalid_argument("MlpParams: bad sizes");
  return MlpParams{Mat::Zero(d, n1), Mat::Zero(n2, n1), Mat::Zero(n1, n2), Vec::Zero(n1),
                   Vec::Zero(n2),    Mat::Zero(n2, k),  Vec::Zero(k)};
}

void MlpParams::validate() const {
  const auto n1 = A.cols(), n2 = C.cols();
  if (B.rows() != n2 || B.cols() != n1 || C.rows() != n1 || b1.size() != n1 || b2.size() != n2 ||
      D_out.rows() != n2 || b_out.size() != D_out.cols() || D_out.cols() < 1)
    throw std::invalid_argument("MlpParams: inconsistent shapes");
}

Eigen::Index MlpParams::size() const {
  return A.size() + B.size() + C.size() + b1.size() + b2.size() + D_out.size() + b_out.size();
}

Vec MlpParams::flatten() const {
  Vec x(size());
  Eigen::Index o = 0;
  auto put = [&](const auto& m) {
    x.segment(o, m.size()) = Eigen::Map<const Vec>(m.data(), m.size());
    o += m.size();
  };
  put(A), put(B), put(C), put(b1), put(b2), put(D_out), put(b_out);
  return x;
}

MlpParams MlpParams::unflatten(const MlpParams& shape, const Vec& x) {
  if (x.size() != shape.size()) throw std::invalid_argument("MlpParams::unflatten: size mismatch");
  MlpParams p = shape;
  Eigen::Index o = 0;
  auto get = [&](auto& m) {
    Eigen::Map<Vec>(m.data(), m.size()) = x.segment(o, m.size());
    o += m.size();
  };
  get(p.A), get(p.B), get(p.C), get(p.b1), get(p.b2), get(p.D_out), get(p.b_out);
  return p;
}

MlpParams mlp_from_dbm(const DbmParams& p) {
  if (!p.spec().has_label()) throw std::invalid_argument("mlp_from_dbm: model has no label layer");
  return MlpParams{p.W1, p.W2.transpose(), p.W2, p.b_h1, p.b_h2, p.W3, p.b_y};
}

// --- features -----------------------------------------------------------------

Vec extract_features(const DbmParams& params, const Vec& v, const MeanFieldConfig& mf) {
  const ModelSpec spec = params.spec();
  ClampSpec c = ClampSpec::none(spec);
  c.v = LayerClamp::all(v);
  if (spec.has_label()) c.label_mode = LabelMode::zero;
  return mf_infer(params, c, mf).state.h2;
}

Mat extract_features_batch(const DbmParams& params, std::span<const Example> data, const MeanFieldConfig& mf,
                           Exec exec) {
  Mat out(static_cast<Eigen::Index>(data.size()), params.spec().n_hidden2);
  parallel_for(data.size(), exec, [&](std::size_t i) {
    out.row(static_cast<Eigen::Index>(i)) = extract_features(params, data[i].v, mf).transpose();
  });
  return out;
}

FeatureSet FeatureSet::build(std::span<const Example> data, Mat phi) {
  if (static_cast<std::size_t>(phi.rows()) != data.size())
    throw std::invalid_argument("FeatureSet: one feature row per example");
  FeatureSet s;
  s.phi = std::move(phi);
  if (data.empty()) return s;
  s.v.resize(static_cast<Eigen::Index>(data.size()), data[0].v.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    s.v.row(static_cast<Eigen::Index>(i)) = data[i].v.transpose();
    s.labels.push_back(data[i].label);
  }
  return s;
}

// --- forward / backward ---------------------------------------------------------

MlpActivations mlp_activations(const MlpParams& m, const Vec& v, const Vec& phi) {
  if (v.size() != m.n_visible() || phi.size() != m.n_hidden2())
    throw std::invalid_argument("mlp_forward: input size mismatch");
  MlpActivations a;
  a.h1 = sigmoid(Vec(m.A.transpose() * v + m.B.transpose() * phi + m.b1));
  a.h2 = sigmoid(Vec(m.C.transpose() * a.h1 + m.b2));
  a.y = softmax(Vec(m.D_out.transpose() * a.h2 + m.b_out));
  return a;
}

Vec mlp_forward(const MlpParams& m, const Vec& v, const Vec& phi) { return mlp_activations(m, v, phi).y; }

namespace {

constexpr std::size_t kRowBlock = 64;

struct LossAcc {
  double loss = 0.0;
  MlpParams grad;
  LossAcc& operator+=(const LossAcc& o) {
    loss += o.loss;
    grad.A += o.grad.A;
    grad.B += o.grad.B;
    grad.C += o.grad.C;
    grad.b1 += o.grad.b1;
    grad.b2 += o.grad.b2;
    grad.D_out += o.grad.D_out;
    grad.b_out += o.grad.b_out;
    return *this;
  }
};

Mat logistic(const Mat& a) { return a.unaryExpr([](double x) { return sigmoid(x); }); }

// Sum (not mean) of NLL and gradient over one block of rows, in matrix form.
void block_loss_grad(const MlpParams& m, const FeatureSet& s, std::span<const std::size_t> rows, LossAcc& acc) {
  const auto n = static_cast<Eigen::Index>(rows.size());
  Mat V(n, m.n_visible()), P(n, m.n_hidden2());
  for (Eigen::Index r = 0; r < n; ++r) {
    const auto i = static_cast<Eigen::Index>(rows[static_cast<std::size_t>(r)]);
    V.row(r) = s.v.row(i);
    P.row(r) = s.phi.row(i);
  }
  Mat A1 = V * m.A + P * m.B;
  A1.rowwise() += m.b1.transpose();
  const Mat H1 = logistic(A1);
  Mat A2 = H1 * m.C;
  A2.rowwise() += m.b2.transpose();
  const Mat H2 = logistic(A2);
  Mat L = H2 * m.D_out;
  L.rowwise() += m.b_out.transpose();

  Mat dL(n, m.n_classes());
  for (Eigen::Index r = 0; r < n; ++r) {
    const int y = s.labels[rows[static_cast<std::size_t>(r)]];
    const double mx = L.row(r).maxCoeff();
    const double lse = mx + std::log((L.row(r).array() - mx).exp().sum());
    acc.loss += lse - L(r, y);
    dL.row(r) = (L.row(r).array() - lse).exp().matrix();
    dL(r, y) -= 1.0;
  }
  acc.grad.D_out.noalias() += H2.transpose() * dL;
  acc.grad.b_out += dL.colwise().sum().transpose();
  const Mat dA2 = ((dL * m.D_out.transpose()).array() * H2.array() * (1.0 - H2.array())).matrix();
  acc.grad.C.noalias() += H1.transpose() * dA2;
  acc.grad.b2 += dA2.colwise().sum().transpose();
  const Mat dA1 = ((dA2 * m.C.transpose()).array() * H1.array() * (1.0 - H1.array())).matrix();
  acc.grad.A.noalias() += V.transpose() * dA1;
  acc.grad.B.noalias() += P.transpose() * dA1;
  acc.grad.b1 += dA1.colwise().sum().transpose();
}

}  // namespace

MlpLossGrad mlp_loss_grad(const MlpParams& m, const FeatureSet& s, std::span<const std::size_t> rows, Exec exec) {
  std::vector<std::size_t> all;
  if (rows.empty()) {
    all.resize(s.size());
    std::iota(all.begin(), all.end(), std::size_t{0});
    rows = all;
  }
  if (rows.empty()) throw std::invalid_argument("mlp_loss_grad: empty batch");
  for (std::size_t i : rows) {
    if (i >= s.size()) throw std::invalid_argument("mlp_loss_grad: row out of range");
    if (s.labels[i] < 0 || s.labels[i] >= m.n_classes()) throw std::invalid_argument("mlp_loss_grad: bad label");
  }
  const std::size_t blocks = (rows.size() + kRowBlock - 1) / kRowBlock;
  const MlpParams zero = MlpParams::zeros(m.n_visible(), m.n_hidden1(), m.n_hidden2(), m.n_classes());
  LossAcc total = chunked_reduce<LossAcc>(
      blocks, exec, [&] { return LossAcc{0.0, zero}; },
      [&](std::size_t b, LossAcc& acc) {
        const std::size_t lo = b * kRowBlock;
        block_loss_grad(m, s, rows.subspan(lo, std::min(kRowBlock, rows.size() - lo)), acc);
      },
      1);
  const double inv = 1.0 / static_cast<double>(rows.size());
  MlpLossGrad out{total.loss * inv, MlpParams::unflatten(zero, total.grad.flatten() * inv)};
  return out;
}

// --- training and evaluation ---------------------------------------------------

ClassifierResult train_classifier(const MlpParams& init, const FeatureSet& train, const ClassifierConfig& cfg,
                                  const std::function<bool(int, const MlpParams&, double)>& on_epoch) {
  init.validate();
  if (train.size() == 0) throw std::invalid_argument("train_classifier: empty training set");
  ClassifierResult result;
  BatchObjectiveFactory factory = [&](std::span<const std::size_t> idx, std::uint64_t) -> ObjectiveFn {
    auto rows = std::make_shared<std::vector<std::size_t>>(idx.begin(), idx.end());
    return [&, rows](const Vec& x, Vec& grad) {
      const MlpLossGrad lg = mlp_loss_grad(MlpParams::unflatten(init, x), train, *rows, cfg.exec);
      grad = lg.grad.flatten();
      return lg.loss;
    };
  };
  EpochCallback epoch_cb = [&](int e, const Vec& x) {
    const MlpParams m = MlpParams::unflatten(init, x);
    const double err = evaluate_error(m, train, cfg.exec);
    result.train_error.push_back(err);
    return on_epoch ? on_epoch(e, m, err) : true;
  };
  const Vec x = minibatch_ncg(factory, train.size(), init.flatten(), cfg.optimizer, {}, epoch_cb);
  result.mlp = MlpParams::unflatten(init, x);
  return result;
}

int argmax(const Vec& x) {
  int best = 0;
  for (Eigen::Index i = 1; i < x.size(); ++i)
    if (x(i) > x(best)) best = static_cast<int>(i);
  return best;
}

std::vector<int> predict(const MlpParams& m, const FeatureSet& s, Exec exec) {
  std::vector<int> out(s.size());
  parallel_for(s.size(), exec, [&](std::size_t i) {
    const auto r = static_cast<Eigen::Index>(i);
    out[i] = argmax(mlp_forward(m, s.v.row(r).transpose(), s.phi.row(r).transpose()));
  });
  return out;
}

double error_rate(std::span<const int> predicted, std::span<const int> labels) {
  if (predicted.size() != labels.size()) throw std::invalid_argument("error_rate: size mismatch");
  if (labels.empty()) return 0.0;
  std::size_t wrong = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) wrong += predicted[i] != labels[i];
  return static_cast<double>(wrong) / static_cast<double>(labels.size());
}

double evaluate_error(const MlpParams& m, const FeatureSet& s, Exec exec) {
  return error_rate(predict(m, s, exec), s.labels);
}

double evaluate_error(const MlpParams& m, const DbmParams& params, std::span<const Example> data,
                      const MeanFieldConfig& mf, Exec exec) {
  return evaluate_error(m, FeatureSet::build(data, extract_features_batch(params, data, mf, exec)), exec);
}

std::vector<int> generative_predict(const DbmParams& params, std::span<const Example> data, const MeanFieldConfig& mf,
                                    Exec exec) {
  const ModelSpec spec = params.spec();
  if (!spec.has_label()) throw std::invalid_argument("generative_predict: model has no label layer");
  std::vector<int> out(data.size());
  parallel_for(data.size(), exec, [&](std::size_t i) {
    ClampSpec c = ClampSpec::none(spec);
    c.v = LayerClamp::all(data[i].v);
    out[i] = argmax(mf_infer(params, c, mf).state.y);
  });
  return out;
}

double evaluate_generative_error(const DbmParams& params, std::span<const Example> data, const MeanFieldConfig& mf,
                                 Exec exec) {
  std::vector<int> labels;
  for (const auto& ex : data) labels.push_back(ex.label);
  return error_rate(generative_predict(params, data, mf, exec), labels);
}

}  // namespace jdbm
