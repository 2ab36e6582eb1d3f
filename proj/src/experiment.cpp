/*
 * SPDX-License-Identifier: Apache-2.0
 */
#include "jdbm/experiment.hpp"

#include <cmath>
#include <functional>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "jdbm/oracle.hpp"

namespace jdbm {

using nlohmann::json;
namespace fs = std::filesystem;

// --- enums ------------------------------------------------------------------------

std::string to_string(Method m) {
  switch (m) {
    case Method::jdbm: return "jdbm";
    case Method::pcd_pretrained: return "pcd-pretrained";
    case Method::pcd_scratch: return "pcd-scratch";
  }
  return "?";
}

Method method_from_string(const std::string& s) {
  if (s == "jdbm") return Method::jdbm;
  if (s == "pcd-pretrained") return Method::pcd_pretrained;
  if (s == "pcd-scratch") return Method::pcd_scratch;
  throw std::invalid_argument("unknown method '" + s + "' (jdbm, pcd-pretrained, pcd-scratch)");
}

std::string to_string(StopPhase p) {
  switch (p) {
    case StopPhase::validating: return "validating";
    case StopPhase::retraining: return "retraining";
    case StopPhase::done: return "done";
  }
  return "?";
}

namespace {

StopPhase stop_phase_from_string(const std::string& s) {
  if (s == "validating") return StopPhase::validating;
  if (s == "retraining") return StopPhase::retraining;
  if (s == "done") return StopPhase::done;
  throw std::invalid_argument("unknown early-stopping phase '" + s + "'");
}

std::string criterion_name(StopCriterion c) {
  return c == StopCriterion::inpainting ? "inpainting" : "variational-bound";
}

StopCriterion criterion_from_string(const std::string& s) {
  if (s == "inpainting") return StopCriterion::inpainting;
  if (s == "variational-bound") return StopCriterion::variational_bound;
  throw std::invalid_argument("unknown stopping criterion '" + s + "'");
}

// --- config parsing ----------------------------------------------------------------

template <class T>
void get(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

void check_keys(const json& j, std::initializer_list<const char*> known, const std::string& where) {
  if (!j.is_object()) throw std::invalid_argument(where + ": expected an object");
  for (const auto& [key, value] : j.items()) {
    bool ok = false;
    for (const char* k : known) ok = ok || key == k;
    if (!ok) throw std::invalid_argument(where + ": unknown key '" + key + "'");
  }
}

void parse_rbm(const json& j, RbmTrainConfig& r, const std::string& where) {
  check_keys(j,
             {"epochs", "batch_size", "learning_rate", "lr_decay", "momentum", "final_momentum",
              "momentum_switch_epoch", "weight_decay", "cd_k", "persistent", "n_chains", "init_stddev"},
             where);
  get(j, "epochs", r.epochs);
  get(j, "batch_size", r.batch_size);
  get(j, "learning_rate", r.learning_rate);
  get(j, "lr_decay", r.lr_decay);
  get(j, "momentum", r.momentum);
  get(j, "final_momentum", r.final_momentum);
  get(j, "momentum_switch_epoch", r.momentum_switch_epoch);
  get(j, "weight_decay", r.weight_decay);
  get(j, "cd_k", r.cd_k);
  get(j, "persistent", r.persistent);
  get(j, "n_chains", r.n_chains);
  get(j, "init_stddev", r.init_stddev);
}

json rbm_json(const RbmTrainConfig& r) {
  return {{"epochs", r.epochs},
          {"batch_size", r.batch_size},
          {"learning_rate", r.learning_rate},
          {"lr_decay", r.lr_decay},
          {"momentum", r.momentum},
          {"final_momentum", r.final_momentum},
          {"momentum_switch_epoch", r.momentum_switch_epoch},
          {"weight_decay", r.weight_decay},
          {"cd_k", r.cd_k},
          {"persistent", r.persistent},
          {"n_chains", r.n_chains},
          {"init_stddev", r.init_stddev}};
}

void parse_mf(const json& j, MeanFieldConfig& m, const std::string& where) {
  check_keys(j, {"max_sweeps", "tol"}, where);
  get(j, "max_sweeps", m.max_sweeps);
  get(j, "tol", m.tol);
}

json mf_json(const MeanFieldConfig& m) { return {{"max_sweeps", m.max_sweeps}, {"tol", m.tol}}; }

}  // namespace

ExperimentConfig ExperimentConfig::from_json(const json& j) {
  check_keys(j,
             {"method", "seed", "output_dir", "reproducible", "data", "model", "jdbm", "pretrain", "pcd",
              "early_stopping", "features", "evaluation", "classifier", "oracle_monitor", "parallel"},
             "config");
  ExperimentConfig c;
  if (j.contains("method")) c.method = method_from_string(j.at("method").get<std::string>());
  get(j, "seed", c.seed);
  if (j.contains("output_dir")) c.output_dir = j.at("output_dir").get<std::string>();
  get(j, "reproducible", c.reproducible);
  if (j.contains("parallel")) c.exec = j.at("parallel").get<bool>() ? Exec::parallel : Exec::serial;

  if (j.contains("data")) {
    const json& d = j.at("data");
    check_keys(d,
               {"source", "train_images", "train_labels", "test_images", "test_labels", "binarization",
                "threshold", "train_limit", "test_limit", "n_train", "n_test", "noise", "splits"},
               "data");
    get(d, "source", c.data.source);
    for (auto [key, field] : {std::pair{"train_images", &c.data.train_images}, {"train_labels", &c.data.train_labels},
                              {"test_images", &c.data.test_images}, {"test_labels", &c.data.test_labels}})
      if (d.contains(key)) *field = d.at(key).get<std::string>();
    if (d.contains("binarization")) c.data.binarize.kind = binarize_kind_from_string(d.at("binarization").get<std::string>());
    get(d, "threshold", c.data.binarize.threshold);
    get(d, "train_limit", c.data.train_limit);
    get(d, "test_limit", c.data.test_limit);
    get(d, "n_train", c.data.synthetic_train);
    get(d, "n_test", c.data.synthetic_test);
    get(d, "noise", c.data.synthetic_noise);
    if (d.contains("splits")) {
      check_keys(d.at("splits"), {"train", "validation"}, "data.splits");
      get(d.at("splits"), "train", c.data.train_split);
      get(d.at("splits"), "validation", c.data.validation_split);
    }
  }
  if (j.contains("model")) {
    const json& m = j.at("model");
    check_keys(m, {"n_hidden1", "n_hidden2", "init", "init_stddev"}, "model");
    get(m, "n_hidden1", c.n_hidden1);
    get(m, "n_hidden2", c.n_hidden2);
    if (m.contains("init")) {
      const std::string k = m.at("init").get<std::string>();
      if (k != "gaussian" && k != "zeros") throw std::invalid_argument("model.init: gaussian or zeros");
      c.init.kind = k == "zeros" ? InitScheme::Kind::zeros : InitScheme::Kind::gaussian;
    }
    get(m, "init_stddev", c.init.stddev);
  }
  if (j.contains("jdbm")) {
    const json& m = j.at("jdbm");
    check_keys(m,
               {"p", "mask_label", "sweeps", "batch_size", "cg_iters_per_batch", "epochs", "c1", "c2",
                "max_line_evals", "shuffle"},
               "jdbm");
    get(m, "p", c.jdbm.mask.p);
    get(m, "mask_label", c.jdbm.mask.mask_label);
    get(m, "sweeps", c.jdbm.sweeps);
    get(m, "batch_size", c.jdbm.optimizer.batch_size);
    get(m, "cg_iters_per_batch", c.jdbm.optimizer.cg.max_iters);
    get(m, "epochs", c.jdbm_epochs);
    get(m, "c1", c.jdbm.optimizer.cg.c1);
    get(m, "c2", c.jdbm.optimizer.cg.c2);
    get(m, "max_line_evals", c.jdbm.optimizer.cg.max_line_evals);
    get(m, "shuffle", c.jdbm.optimizer.shuffle);
  }
  if (j.contains("pretrain")) {
    const json& m = j.at("pretrain");
    check_keys(m, {"bottom", "top", "top_use_mean"}, "pretrain");
    if (m.contains("bottom")) parse_rbm(m.at("bottom"), c.bottom_rbm, "pretrain.bottom");
    if (m.contains("top")) parse_rbm(m.at("top"), c.top_rbm, "pretrain.top");
    get(m, "top_use_mean", c.top_rbm_use_mean);
  }
  if (j.contains("pcd")) {
    const json& m = j.at("pcd");
    check_keys(m,
               {"epochs", "batch_size", "n_chains", "learning_rate", "lr_decay", "momentum", "final_momentum",
                "momentum_switch_epoch", "weight_decay", "gibbs_sweeps", "positive"},
               "pcd");
    get(m, "epochs", c.pcd.epochs);
    get(m, "batch_size", c.pcd.batch_size);
    get(m, "n_chains", c.pcd.n_chains);
    get(m, "learning_rate", c.pcd.learning_rate);
    get(m, "lr_decay", c.pcd.lr_decay);
    get(m, "momentum", c.pcd.momentum);
    get(m, "final_momentum", c.pcd.final_momentum);
    get(m, "momentum_switch_epoch", c.pcd.momentum_switch_epoch);
    get(m, "weight_decay", c.pcd.weight_decay);
    get(m, "gibbs_sweeps", c.pcd.step.gibbs_sweeps);
    if (m.contains("positive")) parse_mf(m.at("positive"), c.pcd.step.positive, "pcd.positive");
  }
  // The criterion default depends on the method.
  c.early_stopping.criterion = c.method == Method::jdbm ? StopCriterion::inpainting : StopCriterion::variational_bound;
  if (j.contains("early_stopping")) {
    const json& m = j.at("early_stopping");
    check_keys(m, {"enabled", "patience", "max_phase1_epochs", "max_phase2_epochs", "criterion", "criterion_examples"},
               "early_stopping");
    get(m, "enabled", c.early_stopping.enabled);
    get(m, "patience", c.early_stopping.patience);
    get(m, "max_phase1_epochs", c.early_stopping.max_phase1_epochs);
    get(m, "max_phase2_epochs", c.early_stopping.max_phase2_epochs);
    if (m.contains("criterion")) c.early_stopping.criterion = criterion_from_string(m.at("criterion").get<std::string>());
    get(m, "criterion_examples", c.early_stopping.criterion_examples);
  }
  if (j.contains("features")) parse_mf(j.at("features"), c.features, "features");
  if (j.contains("evaluation")) parse_mf(j.at("evaluation"), c.evaluation, "evaluation");
  if (j.contains("classifier")) {
    const json& m = j.at("classifier");
    check_keys(m, {"epochs", "batch_size", "cg_iters_per_batch"}, "classifier");
    get(m, "epochs", c.classifier.optimizer.epochs);
    get(m, "batch_size", c.classifier.optimizer.batch_size);
    get(m, "cg_iters_per_batch", c.classifier.optimizer.cg.max_iters);
  }
  if (j.contains("oracle_monitor")) {
    const json& m = j.at("oracle_monitor");
    check_keys(m, {"enabled", "examples", "every_rounds"}, "oracle_monitor");
    get(m, "enabled", c.oracle_monitor.enabled);
    get(m, "examples", c.oracle_monitor.examples);
    get(m, "every_rounds", c.oracle_monitor.every_rounds);
  }
  return c;
}

json ExperimentConfig::to_json() const {
  json dj = {{"source", this->data.source},
               {"binarization", this->data.binarize.kind == BinarizeRule::Kind::threshold ? "threshold" : "bernoulli"},
               {"threshold", this->data.binarize.threshold},
               {"splits", {{"train", this->data.train_split}, {"validation", this->data.validation_split}}}};
  if (this->data.source == "mnist") {
    dj["train_images"] = this->data.train_images.string();
    dj["train_labels"] = this->data.train_labels.string();
    dj["test_images"] = this->data.test_images.string();
    dj["test_labels"] = this->data.test_labels.string();
    dj["train_limit"] = this->data.train_limit;
    dj["test_limit"] = this->data.test_limit;
  } else {
    dj["n_train"] = this->data.synthetic_train;
    dj["n_test"] = this->data.synthetic_test;
    dj["noise"] = this->data.synthetic_noise;
  }
  const auto& cg = jdbm.optimizer.cg;
  return {
      {"method", to_string(method)},
      {"seed", seed},
      {"output_dir", output_dir.string()},
      {"reproducible", reproducible},
      {"parallel", exec == Exec::parallel},
      {"data", dj},
      {"model",
       {{"n_hidden1", n_hidden1},
        {"n_hidden2", n_hidden2},
        {"init", init.kind == InitScheme::Kind::zeros ? "zeros" : "gaussian"},
        {"init_stddev", init.stddev}}},
      {"jdbm",
       {{"p", jdbm.mask.p},
        {"mask_label", jdbm.mask.mask_label},
        {"sweeps", jdbm.sweeps},
        {"batch_size", jdbm.optimizer.batch_size},
        {"cg_iters_per_batch", cg.max_iters},
        {"epochs", jdbm_epochs},
        {"c1", cg.c1},
        {"c2", cg.c2},
        {"max_line_evals", cg.max_line_evals},
        {"shuffle", jdbm.optimizer.shuffle}}},
      {"pretrain", {{"bottom", rbm_json(bottom_rbm)}, {"top", rbm_json(top_rbm)}, {"top_use_mean", top_rbm_use_mean}}},
      {"pcd",
       {{"epochs", pcd.epochs},
        {"batch_size", pcd.batch_size},
        {"n_chains", pcd.n_chains},
        {"learning_rate", pcd.learning_rate},
        {"lr_decay", pcd.lr_decay},
        {"momentum", pcd.momentum},
        {"final_momentum", pcd.final_momentum},
        {"momentum_switch_epoch", pcd.momentum_switch_epoch},
        {"weight_decay", pcd.weight_decay},
        {"gibbs_sweeps", pcd.step.gibbs_sweeps},
        {"positive", mf_json(pcd.step.positive)}}},
      {"early_stopping",
       {{"enabled", early_stopping.enabled},
        {"patience", early_stopping.patience},
        {"max_phase1_epochs", early_stopping.max_phase1_epochs},
        {"max_phase2_epochs", early_stopping.max_phase2_epochs},
        {"criterion", criterion_name(early_stopping.criterion)},
        {"criterion_examples", early_stopping.criterion_examples}}},
      {"features", mf_json(features)},
      {"evaluation", mf_json(evaluation)},
      {"classifier",
       {{"epochs", classifier.optimizer.epochs},
        {"batch_size", classifier.optimizer.batch_size},
        {"cg_iters_per_batch", classifier.optimizer.cg.max_iters}}},
      {"oracle_monitor",
       {{"enabled", oracle_monitor.enabled},
        {"examples", oracle_monitor.examples},
        {"every_rounds", oracle_monitor.every_rounds}}},
  };
}

void ExperimentConfig::validate() const {
  auto fail = [](const std::string& m) { throw std::invalid_argument("config: " + m); };
  if (data.source != "synthetic-bars" && data.source != "mnist") fail("data.source must be synthetic-bars or mnist");
  if (data.source == "mnist") {
    for (const fs::path* p : {&data.train_images, &data.train_labels, &data.test_images, &data.test_labels})
      if (p->empty()) fail("mnist needs train_images, train_labels, test_images and test_labels");
  } else {
    if (data.synthetic_train < 2 || data.synthetic_test < 1) fail("synthetic set sizes too small");
    if (!(data.synthetic_noise >= 0.0 && data.synthetic_noise < 0.5)) fail("data.noise must lie in [0, 0.5)");
  }
  if (data.validation_split < 1 || data.train_split < 1) fail("both splits must be non-empty");
  if (data.source != "mnist" && data.train_split + data.validation_split != data.synthetic_train)
    fail("splits (" + std::to_string(data.train_split) + " + " + std::to_string(data.validation_split) +
         ") do not sum to the training set size (" + std::to_string(data.synthetic_train) + ")");
  if (n_hidden1 < 1 || n_hidden2 < 1) fail("hidden layer sizes must be >= 1");
  init.validate();
  jdbm.mask.validate();
  jdbm.optimizer.cg.validate();
  if (jdbm.sweeps < 1) fail("jdbm.sweeps must be >= 1");
  if (jdbm.optimizer.batch_size < 1 || classifier.optimizer.batch_size < 1 || pcd.batch_size < 1)
    fail("batch sizes must be >= 1");
  if (jdbm_epochs < 0 || pcd.epochs < 0 || classifier.optimizer.epochs < 0) fail("epoch counts must be >= 0");
  if (early_stopping.patience < 1) fail("early_stopping.patience must be >= 1");
  if (early_stopping.max_phase1_epochs < 1 || early_stopping.max_phase2_epochs < 0)
    fail("early-stopping epoch caps out of range");
  if (pcd.step.gibbs_sweeps < 1) fail("pcd.gibbs_sweeps must be >= 1");
  for (const MeanFieldConfig* m : {&features, &evaluation, &pcd.step.positive})
    if (m->max_sweeps < 1 || !(m->tol >= 0.0)) fail("mean-field settings out of range");
  if (oracle_monitor.enabled && (oracle_monitor.examples < 1 || oracle_monitor.every_rounds < 1))
    fail("oracle_monitor needs examples >= 1 and every_rounds >= 1");
}

std::string ExperimentConfig::fingerprint() const {
  json j = to_json();
  j.erase("output_dir");
  j.erase("parallel");  // results do not depend on it
  std::ostringstream s;
  s << std::hex << std::setw(16) << std::setfill('0') << std::hash<std::string>{}(j.dump());
  return s.str();
}

ExperimentConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in, nullptr, true, /*ignore_comments=*/true);
  } catch (const json::exception& e) {
    throw std::invalid_argument("config " + path.string() + ": " + e.what());
  }
  return ExperimentConfig::from_json(j);
}

// --- early stopping ---------------------------------------------------------------

namespace {

json num(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

double num_or_nan(const json& j, const char* key) {
  return j.contains(key) && j.at(key).is_number() ? j.at(key).get<double>()
                                                   : std::numeric_limits<double>::quiet_NaN();
}

}  // namespace

json EarlyStopState::to_json() const {
  return {{"phase", to_string(phase)},     {"best_error", num(best_error)},
          {"best_epoch", best_epoch},      {"best_criterion", num(best_criterion)},
          {"recorded_criterion", num(recorded_criterion)},
          {"rise_epoch", rise_epoch},      {"rises", rises},
          {"phase1_epochs", phase1_epochs}, {"phase2_epochs", phase2_epochs},
          {"done_epoch", done_epoch},      {"status", status}};
}

EarlyStopState EarlyStopState::from_json(const json& j) {
  EarlyStopState s;
  s.phase = stop_phase_from_string(j.at("phase").get<std::string>());
  s.best_error = j.at("best_error").is_null() ? std::numeric_limits<double>::infinity() : j.at("best_error").get<double>();
  s.best_epoch = j.at("best_epoch").get<int>();
  s.best_criterion = num_or_nan(j, "best_criterion");
  s.recorded_criterion = num_or_nan(j, "recorded_criterion");
  s.rise_epoch = j.at("rise_epoch").get<int>();
  s.rises = j.at("rises").get<int>();
  s.phase1_epochs = j.at("phase1_epochs").get<int>();
  s.phase2_epochs = j.at("phase2_epochs").get<int>();
  s.done_epoch = j.at("done_epoch").get<int>();
  s.status = j.at("status").get<std::string>();
  return s;
}

EarlyStopper::EarlyStopper(int patience, int max1, int max2, EarlyStopState state)
    : patience_(patience), max1_(max1), max2_(max2), state_(std::move(state)) {
  if (patience < 1 || max1 < 1 || max2 < 0) throw std::invalid_argument("EarlyStopper: bad settings");
}

void EarlyStopper::record_validation(int epoch, double err, double criterion) {
  if (state_.phase != StopPhase::validating) throw std::logic_error("EarlyStopper: not in the validation phase");
  ++state_.phase1_epochs;
  if (err < state_.best_error) {
    state_.best_error = err;
    state_.best_epoch = epoch;
    state_.best_criterion = criterion;
    state_.rises = 0;
    state_.rise_epoch = -1;
  } else if (err > state_.best_error) {
    if (state_.rises++ == 0) state_.rise_epoch = epoch;
  } else {
    state_.rises = 0;
    state_.rise_epoch = -1;
  }
  const bool triggered = state_.rises >= patience_;
  if (triggered || state_.phase1_epochs >= max1_) {
    state_.status = triggered ? "triggered" : "phase1_cap";
    state_.recorded_criterion = state_.best_criterion;
    state_.phase = max2_ > 0 ? StopPhase::retraining : StopPhase::done;
    if (state_.phase == StopPhase::done) state_.done_epoch = epoch;
  }
}

void EarlyStopper::record_retraining(int epoch, double criterion) {
  if (state_.phase != StopPhase::retraining) throw std::logic_error("EarlyStopper: not in the retraining phase");
  ++state_.phase2_epochs;
  if (criterion >= state_.recorded_criterion) {
    state_.status = "matched";
  } else if (state_.phase2_epochs >= max2_) {
    state_.status = "phase2_cap";
  } else {
    return;
  }
  state_.phase = StopPhase::done;
  state_.done_epoch = epoch;
}

// --- metrics --------------------------------------------------------------------------

MetricsWriter::MetricsWriter(const fs::path& path, bool zero_wall_time)
    : zero_(zero_wall_time), start_(std::chrono::steady_clock::now()) {
  const bool fresh = !fs::exists(path) || fs::file_size(path) == 0;
  out_.open(path, std::ios::app);
  if (!out_) throw std::runtime_error("cannot open " + path.string() + " for appending");
  if (fresh) out_ << kHeader << '\n' << std::flush;
}

double MetricsWriter::elapsed() const {
  if (zero_) return 0.0;
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
}

void MetricsWriter::row(const std::string& phase, int epoch, int batch, double objective, double validation_error) {
  auto field = [&](double x) {
    if (std::isfinite(x)) out_ << std::setprecision(17) << x;
  };
  out_ << phase << ',' << epoch << ',';
  if (batch >= 0) out_ << batch;
  out_ << ',';
  field(objective);
  out_ << ',';
  field(validation_error);
  out_ << ',';
  field(elapsed());
  out_ << '\n' << std::flush;
  if (!out_) throw std::runtime_error("metrics: write failed");
}

// --- data ------------------------------------------------------------------------------

std::vector<Example> DataSplits::all_training() const {
  std::vector<Example> out = train;
  out.insert(out.end(), validation.begin(), validation.end());
  return out;
}

DataSplits load_data(const ExperimentConfig& cfg) {
  DataSplits d;
  std::vector<Example> training;
  if (cfg.data.source == "mnist") {
    // Split sizes are checked against the label header before any pixels are read.
    const IdxArray header = load_idx_header(cfg.data.train_labels);
    std::size_t n = header.count();
    if (cfg.data.train_limit > 0) n = std::min(n, cfg.data.train_limit);
    if (cfg.data.train_split + cfg.data.validation_split != n)
      throw std::invalid_argument("config: splits do not sum to the training set size (" + std::to_string(n) + ")");
    BinarizeRule rule = cfg.data.binarize;
    rule.seed = derive_seed(cfg.seed, 0xb1, 0);
    training = load_idx_pair(cfg.data.train_images, cfg.data.train_labels, rule, 10, cfg.data.train_limit);
    rule.seed = derive_seed(cfg.seed, 0xb1, 1);
    d.test = load_idx_pair(cfg.data.test_images, cfg.data.test_labels, rule, 10, cfg.data.test_limit);
    d.n_classes = 10;
  } else {
    training = make_bars(cfg.data.synthetic_train, cfg.data.synthetic_noise, derive_seed(cfg.seed, 0xda7a, 0));
    d.test = make_bars(cfg.data.synthetic_test, cfg.data.synthetic_noise, derive_seed(cfg.seed, 0xda7a, 1));
    d.n_classes = 2;
  }
  if (training.size() != cfg.data.train_split + cfg.data.validation_split)
    throw std::invalid_argument("config: splits do not sum to the training set size");
  const auto cut = training.begin() + static_cast<std::ptrdiff_t>(cfg.data.train_split);
  d.train.assign(training.begin(), cut);
  d.validation.assign(cut, training.end());
  return d;
}

std::vector<std::size_t> phase_training_indices(const DataSplits& d, StopPhase phase) {
  const std::size_t n = phase == StopPhase::validating ? d.train.size() : d.train.size() + d.validation.size();
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  return idx;
}

// --- MLP persistence ----------------------------------------------------------------------

void save_mlp(const fs::path& path, const MlpParams& mlp) {
  mlp.validate();
  Container c;
  c.kind = "mlp";
  c.meta = {{"n_visible", mlp.n_visible()},
            {"n_hidden1", mlp.n_hidden1()},
            {"n_hidden2", mlp.n_hidden2()},
            {"n_classes", mlp.n_classes()}};
  c.fields = {matrix_field("A", mlp.A),         matrix_field("B", mlp.B),  matrix_field("C", mlp.C),
              matrix_field("b1", mlp.b1),       matrix_field("b2", mlp.b2), matrix_field("D_out", mlp.D_out),
              matrix_field("b_out", mlp.b_out)};
  write_container(path, c);
}

MlpParams load_mlp(const fs::path& path) {
  const Container c = read_container(path);
  if (c.kind != "mlp") throw std::runtime_error(path.string() + ": expected an mlp container");
  MlpParams m{field_matrix(c.field("A")),  field_matrix(c.field("B")),     field_matrix(c.field("C")),
              field_matrix(c.field("b1")), field_matrix(c.field("b2")),    field_matrix(c.field("D_out")),
              field_matrix(c.field("b_out"))};
  m.validate();
  return m;
}

// --- experiment -------------------------------------------------------------------------------

namespace {

constexpr const char* kStateFile = "state_generative.ckpt";

std::vector<Example> head(const std::vector<Example>& v, std::size_t n) {
  if (n == 0 || n >= v.size()) return v;
  return {v.begin(), v.begin() + static_cast<std::ptrdiff_t>(n)};
}

void log_line(const std::string& msg) { std::cerr << "[jdbm] " << msg << std::endl; }

void add_chain_fields(Container& c, const ChainState& chains) {
  const auto m = static_cast<Eigen::Index>(chains.states.size());
  const FullState& s0 = chains.states.front();
  Mat v(m, s0.v.size()), h1(m, s0.h1.size()), h2(m, s0.h2.size()), y(m, s0.y.size());
  for (Eigen::Index i = 0; i < m; ++i) {
    const FullState& s = chains.states[static_cast<std::size_t>(i)];
    v.row(i) = s.v.transpose();
    h1.row(i) = s.h1.transpose();
    h2.row(i) = s.h2.transpose();
    y.row(i) = s.y.transpose();
  }
  c.fields.push_back(matrix_field("chains.v", v));
  c.fields.push_back(matrix_field("chains.h1", h1));
  c.fields.push_back(matrix_field("chains.h2", h2));
  c.fields.push_back(matrix_field("chains.y", y));
}

ChainState chains_from(const Container& c) {
  const Mat v = field_matrix(c.field("chains.v")), h1 = field_matrix(c.field("chains.h1")),
            h2 = field_matrix(c.field("chains.h2")), y = field_matrix(c.field("chains.y"));
  ChainState ch;
  for (Eigen::Index i = 0; i < v.rows(); ++i)
    ch.states.push_back({v.row(i).transpose(), h1.row(i).transpose(), h2.row(i).transpose(), y.row(i).transpose()});
  ch.rngs.resize(ch.states.size());
  return ch;
}

}  // namespace

Experiment::Experiment(ExperimentConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
  fs::create_directories(cfg_.output_dir);
  const fs::path r = path("result.json");
  if (fs::exists(r)) {
    std::ifstream in(r);
    result_ = json::parse(in, nullptr, false);
    if (result_.is_discarded() || !result_.is_object()) result_ = json::object();
  }
  if (!result_.is_object()) result_ = json::object();
  result_["method"] = to_string(cfg_.method);
  result_["seed"] = cfg_.seed;
  result_["reproducible"] = cfg_.reproducible;
  result_["config"] = cfg_.to_json();
  result_["config"].erase("output_dir");
}

const DataSplits& Experiment::data() {
  if (!data_) data_ = load_data(cfg_);
  return *data_;
}

MetricsWriter& Experiment::metrics() {
  if (!metrics_) metrics_.emplace(path("metrics.csv"), cfg_.reproducible);
  return *metrics_;
}

void Experiment::write_result() {
  const fs::path tmp = path("result.json.tmp");
  {
    std::ofstream out(tmp);
    out << result_.dump(2) << '\n';
    if (!out) throw std::runtime_error("cannot write result.json");
  }
  fs::rename(tmp, path("result.json"));
}

void Experiment::pretrain() {
  const DataSplits& d = data();
  // Only the fitting split: the validation examples stay unseen until retraining.
  Mat v(static_cast<Eigen::Index>(d.train.size()), d.train.front().v.size());
  std::vector<int> labels;
  for (std::size_t i = 0; i < d.train.size(); ++i) {
    v.row(static_cast<Eigen::Index>(i)) = d.train[i].v.transpose();
    labels.push_back(d.train[i].label);
  }
  RbmTrainConfig bottom = cfg_.bottom_rbm;
  bottom.n_hidden = cfg_.n_hidden1;
  bottom.scaling = {.hidden_input = 2.0, .visible_input = 1.0};
  bottom.seed = derive_seed(cfg_.seed, 0xb07);
  log_line("pretrain: bottom RBM " + std::to_string(v.cols()) + "x" + std::to_string(bottom.n_hidden));
  const RbmParams b = train_rbm(v, bottom);
  const Mat h1 = sample_hidden_layer(b, bottom.scaling, v, derive_seed(cfg_.seed, 0x5a3), cfg_.top_rbm_use_mean);
  RbmTrainConfig top = cfg_.top_rbm;
  top.n_hidden = cfg_.n_hidden2;
  top.scaling = {.hidden_input = 1.0, .visible_input = 2.0};
  top.seed = derive_seed(cfg_.seed, 0x70b);
  log_line("pretrain: top RBM " + std::to_string(h1.cols()) + "x" + std::to_string(top.n_hidden));
  Mat h1_bits = h1;
  if (cfg_.top_rbm_use_mean) {
    // Mean values are not binary; the RBM trainer accepts only 0/1, so round.
    h1_bits = h1.unaryExpr([](double x) { return x > 0.5 ? 1.0 : 0.0; });
  }
  const RbmParams t = train_top_rbm(h1_bits, labels, d.n_classes, top);
  const DbmParams p = assemble_dbm(b, t);
  save_dbm(path("pretrained.ckpt"), p, cfg_.init, cfg_.seed, {{"stage", "pretrain"}});
  const double gen_err = evaluate_generative_error(p, d.validation, cfg_.evaluation, cfg_.exec);
  metrics().row("pretrain", bottom.epochs + top.epochs, -1, std::nan(""), gen_err);
  result_["pretrain"] = {{"validation_generative_error", gen_err}};
}

void Experiment::train_jdbm_stage() { generative_stage(true); }
void Experiment::train_pcd_stage() { generative_stage(false); }

void Experiment::generative_stage(bool use_jdbm) {
  const DataSplits& d = data();
  const std::string stage = use_jdbm ? "train-jdbm" : "train-pcd";
  const std::string tag = use_jdbm ? "jdbm" : "pcd";
  const ModelSpec spec{static_cast<int>(d.train.front().v.size()), cfg_.n_hidden1, cfg_.n_hidden2, d.n_classes};
  const std::vector<Example> all = d.all_training();
  const auto& es_cfg = cfg_.early_stopping;

  // Fixed evaluation sets and masks for the stopping criterion and the monitor.
  const std::vector<Example> crit_train = head(d.train, es_cfg.criterion_examples);
  const std::vector<Example> crit_valid = head(d.validation, es_cfg.criterion_examples);
  const auto masks_train = sample_masks(spec, crit_train.size(), cfg_.jdbm.mask, derive_seed(cfg_.seed, 0xc417, 0));
  const auto masks_valid = sample_masks(spec, crit_valid.size(), cfg_.jdbm.mask, derive_seed(cfg_.seed, 0xc417, 1));
  auto criterion = [&](const DbmParams& p, bool validation) {
    const auto& set = validation ? crit_valid : crit_train;
    if (es_cfg.criterion == StopCriterion::inpainting)
      return mean_inpaint_score(p, set, validation ? masks_valid : masks_train, cfg_.jdbm.sweeps, cfg_.exec);
    double s = 0.0;
    for (const auto& ex : set) s += elbo(p, mf_infer(p, ClampSpec::observed(spec, ex), cfg_.evaluation).state);
    return s / static_cast<double>(set.size());
  };

  const std::vector<Example> monitor_set = head(es_cfg.enabled ? d.train : all, cfg_.oracle_monitor.examples);
  const auto monitor_masks = sample_masks(spec, monitor_set.size(), cfg_.jdbm.mask, derive_seed(cfg_.seed, 0x0e4c));
  bool monitor_on = use_jdbm && cfg_.oracle_monitor.enabled;
  auto exact_criterion = [&](const DbmParams& p) {
    double s = 0.0;
    for (std::size_t i = 0; i < monitor_set.size(); ++i)
      s += exact_inpaint_logprob(p, monitor_set[i], monitor_masks[i], {.exec = cfg_.exec});
    return s / static_cast<double>(monitor_set.size());
  };

  // --- state: fresh or resumed ---
  DbmParams params;
  PcdState pcd;
  EarlyStopState es;
  int epoch = 0, rounds = 0;
  json monitor = json::array(), history = json::array();
  std::string monitor_note;
  const fs::path state_path = path(kStateFile);
  if (fs::exists(state_path)) {
    const Container c = read_container(state_path);
    const json& m = c.meta;
    if (m.value("fingerprint", "") != cfg_.fingerprint() || m.value("stage", "") != stage)
      throw std::runtime_error(state_path.string() +
                               " belongs to a different configuration; remove it or choose another output directory");
    params = dbm_from_container(c);
    es = EarlyStopState::from_json(m.at("early_stopping"));
    epoch = m.at("epoch").get<int>();
    rounds = m.at("rounds").get<int>();
    monitor = m.at("monitor");
    history = m.at("history");
    monitor_note = m.value("monitor_note", "");
    monitor_on = monitor_on && monitor_note.empty();
    if (!use_jdbm) {
      DbmParams vel = DbmParams::zeros(spec);
      vel.visit([&](std::string_view name, double* data, Eigen::Index, Eigen::Index) {
        const auto& f = c.field("velocity." + std::string(name));
        std::copy(f.values.begin(), f.values.end(), data);
      });
      pcd = PcdState{params, vel, chains_from(c), epoch};
    }
    log_line(stage + ": resuming at epoch " + std::to_string(epoch));
  } else {
    if (cfg_.method == Method::pcd_pretrained) {
      params = load_dbm(path("pretrained.ckpt"));
      if (!(params.spec() == spec)) throw std::runtime_error("pretrained.ckpt does not match the configured shape");
    } else {
      params = init_params(spec, cfg_.init, derive_seed(cfg_.seed, 0x1417));
    }
    if (!use_jdbm) {
      PcdTrainConfig pc = cfg_.pcd;
      pc.seed = derive_seed(cfg_.seed, 0x9cd);
      pcd = PcdState::start(params, pc);
    }
    if (monitor_on) {
      try {
        const double v0 = exact_criterion(params);
        monitor.push_back({{"round", 0}, {"value", v0}});
        metrics().row("oracle", 0, 0, v0);
      } catch (const BudgetExceeded& e) {
        monitor_note = std::string("skipped: ") + e.what();
        monitor_on = false;
        log_line("oracle monitor " + monitor_note);
      }
    }
    if (!es_cfg.enabled) es.phase = StopPhase::retraining;  // plain training on everything
  }

  auto save_state = [&] {
    json meta = {{"stage", stage},
                 {"fingerprint", cfg_.fingerprint()},
                 {"epoch", epoch},
                 {"rounds", rounds},
                 {"early_stopping", es.to_json()},
                 {"monitor", monitor},
                 {"monitor_note", monitor_note},
                 {"history", history}};
    Container c = dbm_container(params, cfg_.init, cfg_.seed, meta);
    if (!use_jdbm) {
      pcd.velocity.visit([&](std::string_view name, const double* data, Eigen::Index r, Eigen::Index cols) {
        c.fields.push_back({"velocity." + std::string(name), {r, cols}, "column-major", {data, data + r * cols}});
      });
      add_chain_fields(c, pcd.chains);
    }
    write_container(state_path, c);
  };

  EarlyStopper stopper(es_cfg.patience, es_cfg.max_phase1_epochs,
                       es_cfg.enabled ? es_cfg.max_phase2_epochs : std::max(1, use_jdbm ? cfg_.jdbm_epochs : cfg_.pcd.epochs),
                       es);
  const int fixed_epochs = use_jdbm ? cfg_.jdbm_epochs : cfg_.pcd.epochs;
  int epochs_here = 0;

  while (stopper.state().phase != StopPhase::done && (es_cfg.enabled || epoch < fixed_epochs)) {
    const StopPhase phase = stopper.state().phase;
    const auto idx = phase_training_indices(d, phase);
    std::vector<Example> fit;
    fit.reserve(idx.size());
    for (std::size_t i : idx) {
      if (phase == StopPhase::validating && es_cfg.enabled && i >= d.train.size())
        throw std::logic_error("validation example fed to the trainer during the validation phase");
      fit.push_back(all[i]);
    }

    if (use_jdbm) {
      JdbmTrainConfig jc = cfg_.jdbm;
      jc.exec = cfg_.exec;
      jc.optimizer.seed = derive_seed(cfg_.seed, 0x0c6);
      jc.optimizer.epochs = epoch + 1;
      params = train_jdbm(
          params, fit, jc,
          [&](const BatchRound& r, const DbmParams& p) {
            ++rounds;
            metrics().row(tag + ":" + to_string(phase), epoch, r.batch, r.f_end);
            if (monitor_on && rounds % cfg_.oracle_monitor.every_rounds == 0) {
              const double v = exact_criterion(p);
              monitor.push_back({{"round", rounds}, {"value", v}});
              metrics().row("oracle", epoch, rounds, v);
            }
            return true;
          },
          {}, epoch);
    } else {
      PcdTrainConfig pc = cfg_.pcd;
      pc.seed = derive_seed(cfg_.seed, 0x9cd);
      pc.step.exec = cfg_.exec;
      pc.epochs = epoch + 1;
      pcd.epoch = epoch;
      pcd.params = params;
      train_pcd(pcd, fit, pc);
      params = pcd.params;
      rounds += static_cast<int>((fit.size() + static_cast<std::size_t>(pc.batch_size) - 1) /
                                 static_cast<std::size_t>(pc.batch_size));
    }

    json rec = {{"epoch", epoch}, {"phase", to_string(phase)}};
    if (!es_cfg.enabled) {
      const double c = criterion(params, false);
      rec["criterion_train"] = c;
      metrics().row(tag + ":train", epoch, -1, c);
      stopper.record_retraining(epoch, -std::numeric_limits<double>::infinity());
    } else if (phase == StopPhase::validating) {
      const double err = evaluate_generative_error(params, d.validation, cfg_.evaluation, cfg_.exec);
      const double c = criterion(params, false);
      rec["validation_error"] = err;
      rec["criterion_train"] = c;
      metrics().row(tag + ":validating", epoch, -1, c, err);
      stopper.record_validation(epoch, err, c);
      log_line(stage + ": epoch " + std::to_string(epoch) + " validation error " + std::to_string(err) +
               " criterion " + std::to_string(c));
    } else {
      const double c = criterion(params, true);
      rec["criterion_validation"] = c;
      metrics().row(tag + ":retraining", epoch, -1, c);
      stopper.record_retraining(epoch, c);
      log_line(stage + ": retraining epoch " + std::to_string(epoch) + " validation criterion " + std::to_string(c) +
               " target " + std::to_string(stopper.state().recorded_criterion));
    }
    history.push_back(rec);
    es = stopper.state();
    ++epoch;
    ++epochs_here;
    save_state();
    if (cfg_.interrupt_after_epochs > 0 && epochs_here >= cfg_.interrupt_after_epochs &&
        (stopper.state().phase != StopPhase::done && (es_cfg.enabled || epoch < fixed_epochs)))
      throw std::runtime_error("interrupted after " + std::to_string(epochs_here) + " epochs");
  }
  if (!es_cfg.enabled && stopper.state().phase != StopPhase::done) {
    es = stopper.state();
    es.phase = StopPhase::done;
    es.status = "fixed_epochs";
    es.done_epoch = epoch - 1;
    save_state();
  }

  save_dbm(path("generative.ckpt"), params, cfg_.init, cfg_.seed, {{"stage", stage}, {"epochs", epoch}});
  json g = {{"stage", stage},
            {"epochs", epoch},
            {"batch_rounds", rounds},
            {"early_stopping", es.to_json()},
            {"history", history},
            {"criterion", criterion_name(es_cfg.criterion)}};
  if (use_jdbm && cfg_.oracle_monitor.enabled) {
    g["oracle_monitor"] = {{"values", monitor}, {"note", monitor_note}};
    if (monitor.size() >= 2)
      g["oracle_monitor"]["net_change"] =
          monitor.back().at("value").get<double>() - monitor.front().at("value").get<double>();
  }
  result_["generative"] = g;
}

void Experiment::extract_features_stage() {
  const DataSplits& d = data();
  const DbmParams p = load_dbm(path("generative.ckpt"));
  const std::vector<Example> all = d.all_training();
  const json meta = {{"source", "generative.ckpt"}, {"max_sweeps", cfg_.features.max_sweeps}, {"tol", cfg_.features.tol}};
  json mt = meta, ms = meta;
  mt["split"] = "training";
  ms["split"] = "test";
  save_features(path("features_train.bin"), extract_features_batch(p, all, cfg_.features, cfg_.exec), mt);
  save_features(path("features_test.bin"), extract_features_batch(p, d.test, cfg_.features, cfg_.exec), ms);
  result_["features"] = {{"n_train", all.size()}, {"n_test", d.test.size()}, {"n_features", p.spec().n_hidden2}};
}

void Experiment::train_classifier_stage() {
  const DataSplits& d = data();
  const DbmParams p = load_dbm(path("generative.ckpt"));
  const std::vector<Example> all = d.all_training();
  const FeatureSet train = FeatureSet::build(all, load_features(path("features_train.bin")));
  ClassifierConfig cc = cfg_.classifier;
  cc.exec = cfg_.exec;
  cc.optimizer.seed = derive_seed(cfg_.seed, 0xc1a5);
  const ClassifierResult r = train_classifier(mlp_from_dbm(p), train, cc, [&](int e, const MlpParams& m, double err) {
    metrics().row("classifier", e, -1, mlp_loss_grad(m, train, {}, cfg_.exec).loss, err);
    return true;
  });
  save_mlp(path("classifier.ckpt"), r.mlp);
  result_["classifier"] = {{"epochs", r.train_error.size()},
                           {"train_error", r.train_error.empty() ? json(nullptr) : json(r.train_error.back())}};
}

void Experiment::eval_stage() {
  const DataSplits& d = data();
  const DbmParams p = load_dbm(path("generative.ckpt"));
  const MlpParams m = load_mlp(path("classifier.ckpt"));
  const FeatureSet test = FeatureSet::build(d.test, load_features(path("features_test.bin")));
  const double test_error = evaluate_error(m, test, cfg_.exec);
  const double gen_error = evaluate_generative_error(p, d.test, cfg_.evaluation, cfg_.exec);
  metrics().row("eval", 0, -1, std::nan(""), test_error);
  result_["test_error"] = test_error;
  result_["generative_test_error"] = gen_error;
  result_["n_test"] = d.test.size();
  log_line("eval: test error " + std::to_string(test_error) + ", generative mean-field test error " +
           std::to_string(gen_error));
}

void Experiment::run_stage(const std::string& name) {
  static const std::map<std::string, void (Experiment::*)()> stages = {
      {"pretrain", &Experiment::pretrain},
      {"train-jdbm", &Experiment::train_jdbm_stage},
      {"train-pcd", &Experiment::train_pcd_stage},
      {"extract-features", &Experiment::extract_features_stage},
      {"train-classifier", &Experiment::train_classifier_stage},
      {"eval", &Experiment::eval_stage}};
  const auto it = stages.find(name);
  if (it == stages.end()) throw std::invalid_argument("unknown stage '" + name + "'");
  if (!result_.contains("stages") || !result_["stages"].is_object()) result_["stages"] = json::object();
  const auto t0 = std::chrono::steady_clock::now();
  auto wall = [&] {
    return cfg_.reproducible ? 0.0 : std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  };
  try {
    (this->*(it->second))();
  } catch (const std::exception& e) {
    result_["stages"][name] = {{"status", "failed"}, {"wall_seconds", wall()}, {"error", e.what()}};
    result_["status"] = "failed";
    result_["failed_stage"] = name;
    result_["error"] = e.what();
    write_result();
    throw StageError(name, e.what());
  }
  result_["stages"][name] = {{"status", "ok"}, {"wall_seconds", wall()}};
  write_result();
}

json Experiment::run() {
  const auto t0 = std::chrono::steady_clock::now();
  // A fresh run starts new files; a resumed one keeps appending.
  if (!fs::exists(path(kStateFile))) fs::remove(path("metrics.csv"));
  metrics_.reset();
  const json keep = {{"method", result_["method"]},
                     {"seed", result_["seed"]},
                     {"reproducible", result_["reproducible"]},
                     {"config", result_["config"]}};
  result_ = keep;
  result_["status"] = "running";
  std::vector<std::string> order;
  if (cfg_.method == Method::pcd_pretrained) order.push_back("pretrain");
  order.push_back(cfg_.method == Method::jdbm ? "train-jdbm" : "train-pcd");
  order.insert(order.end(), {"extract-features", "train-classifier", "eval"});
  for (const auto& s : order) run_stage(s);
  result_["status"] = "ok";
  result_["failed_stage"] = nullptr;
  result_["wall_seconds"] =
      cfg_.reproducible ? 0.0 : std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  write_result();
  return result_;
}

// --- oracle check --------------------------------------------------------------------------

json oracle_check(const ExperimentConfig& cfg, int n_models) {
  double worst_norm = 0.0, worst_dual = 0.0;
  for (int t = 0; t < n_models; ++t) {
    Rng rng(derive_seed(cfg.seed, 0x0a, static_cast<std::uint64_t>(t)));
    const int ks[] = {0, 2, 3};
    const ModelSpec spec{1 + static_cast<int>(uniform_index(rng, 5)), 1 + static_cast<int>(uniform_index(rng, 5)),
                         1 + static_cast<int>(uniform_index(rng, 5)), ks[uniform_index(rng, 3)]};
    DbmParams p = DbmParams::zeros(spec);
    p.visit([&](std::string_view, double* data, Eigen::Index r, Eigen::Index c) {
      for (Eigen::Index i = 0; i < r * c; ++i) data[i] = gaussian(rng);
    });
    LogSumExp total;
    const int k = std::max(spec.n_classes, 1);
    for (int y = 0; y < k; ++y)
      for (int bits = 0; bits < (1 << spec.n_visible); ++bits) {
        Vec v(spec.n_visible);
        for (int j = 0; j < spec.n_visible; ++j) v(j) = (bits >> j) & 1;
        total.add(exact_log_joint(p, v, spec.has_label() ? y : -1));
      }
    worst_norm = std::max(worst_norm, std::abs(std::exp(total.value()) - 1.0));
    worst_dual = std::max(worst_dual, std::abs(exact_log_partition(p) - brute::log_partition(p)));
  }
  json out = {{"models", n_models},
              {"max_normalization_error", worst_norm},
              {"max_dual_log_z_difference", worst_dual},
              {"tolerance", 1e-10},
              {"pass", worst_norm <= 1e-10 && worst_dual <= 1e-10}};

  const fs::path ckpt = cfg.output_dir / "generative.ckpt";
  if (fs::exists(ckpt)) {
    const DbmParams p = load_dbm(ckpt);
    const std::uint64_t states = std::uint64_t{1} << std::min(p.spec().n_hidden1, 63);
    if (p.spec().n_hidden1 > 22) {
      out["checkpoint"] = {{"note", "first hidden layer too large to enumerate"}, {"states", states}};
    } else {
      const DataSplits d = load_data(cfg);
      const std::vector<Example> set = head(d.train, cfg.oracle_monitor.examples);
      const auto masks = sample_masks(p.spec(), set.size(), cfg.jdbm.mask, derive_seed(cfg.seed, 0x0e4c));
      double exact = 0.0, mf = 0.0;
      for (std::size_t i = 0; i < set.size(); ++i) {
        exact += exact_inpaint_logprob(p, set[i], masks[i], {.exec = cfg.exec});
        mf += inpaint_loss(p, set[i], masks[i], cfg.jdbm.sweeps);
      }
      out["checkpoint"] = {{"examples", set.size()},
                           {"exact_inpainting_criterion", exact / static_cast<double>(set.size())},
                           {"mean_field_inpainting_criterion", mf / static_cast<double>(set.size())}};
    }
  }
  return out;
}

}  // namespace jdbm
