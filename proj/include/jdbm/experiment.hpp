/*
 * SPDX-License-Identifier: Apache-2.0
 */
#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "jdbm/baseline.hpp"
#include "jdbm/classifier.hpp"
#include "jdbm/container.hpp"
#include "jdbm/data.hpp"
#include "jdbm/inpainting.hpp"

namespace jdbm {

enum class Method { jdbm, pcd_pretrained, pcd_scratch };
std::string to_string(Method m);
Method method_from_string(const std::string& s);

/// What "log likelihood" means when the retraining phase compares the
/// validation examples against the recorded training value. log Z cancels in
/// that comparison, so the unnormalized mean-field bound is usable.
enum class StopCriterion { inpainting, variational_bound };

struct DataConfig {
  std::string source = "synthetic-bars";  // or "mnist"
  std::filesystem::path train_images, train_labels, test_images, test_labels;
  BinarizeRule binarize;
  std::size_t train_limit = 0;  // 0 means the whole file
  std::size_t test_limit = 0;
  std::size_t synthetic_train = 500;
  std::size_t synthetic_test = 200;
  double synthetic_noise = 0.05;
  /// Partition of the training set; must add up to its size.
  std::size_t train_split = 400;
  std::size_t validation_split = 100;
};

struct EarlyStopConfig {
  bool enabled = true;
  int patience = 2;
  int max_phase1_epochs = 50;
  int max_phase2_epochs = 50;
  StopCriterion criterion = StopCriterion::inpainting;
  /// Examples used for each criterion evaluation (0 means all of the set).
  std::size_t criterion_examples = 0;
};

/// Exact inpainting criterion of a fixed set of training examples and masks,
/// evaluated every few batch rounds. Only for models whose first hidden layer
/// is small enough to enumerate.
struct OracleMonitorConfig {
  bool enabled = false;
  std::size_t examples = 20;
  int every_rounds = 10;
};

struct ExperimentConfig {
  Method method = Method::jdbm;
  std::uint64_t seed = 0;
  std::filesystem::path output_dir = "run";
  bool reproducible = false;
  /// Test hook: abort the generative stage after this many epochs (0 = off).
  /// Not part of the config fingerprint.
  int interrupt_after_epochs = 0;

  DataConfig data;
  int n_hidden1 = 500;
  int n_hidden2 = 1000;
  InitScheme init{InitScheme::Kind::gaussian, 0.01};

  JdbmTrainConfig jdbm;
  int jdbm_epochs = 10;  // when early stopping is off
  RbmTrainConfig bottom_rbm;
  RbmTrainConfig top_rbm;
  bool top_rbm_use_mean = false;
  PcdTrainConfig pcd;
  EarlyStopConfig early_stopping;
  MeanFieldConfig features{.max_sweeps = 30, .tol = 1e-6};
  MeanFieldConfig evaluation{.max_sweeps = 30, .tol = 1e-6};
  ClassifierConfig classifier;
  OracleMonitorConfig oracle_monitor;
  Exec exec = Exec::parallel;

  static ExperimentConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
  /// Throws std::invalid_argument; checks everything that can be checked
  /// without reading the data payload.
  void validate() const;
  /// Stable hash of the settings that influence results.
  std::string fingerprint() const;
};

ExperimentConfig load_config(const std::filesystem::path& path);

// --- early stopping ------------------------------------------------------------

enum class StopPhase { validating, retraining, done };
std::string to_string(StopPhase p);

struct EarlyStopState {
  StopPhase phase = StopPhase::validating;
  double best_error = std::numeric_limits<double>::infinity();
  int best_epoch = -1;
  double best_criterion = std::numeric_limits<double>::quiet_NaN();
  /// Training-set criterion recorded for the retraining phase.
  double recorded_criterion = std::numeric_limits<double>::quiet_NaN();
  int rise_epoch = -1;  // first epoch of the current run of rises
  int rises = 0;
  int phase1_epochs = 0;
  int phase2_epochs = 0;
  int done_epoch = -1;
  /// running, triggered, phase1_cap, matched or phase2_cap.
  std::string status = "running";

  nlohmann::json to_json() const;
  static EarlyStopState from_json(const nlohmann::json& j);
};

/// Validation phase: the trigger fires once the validation error has been
/// above the best value so far for `patience` consecutive epochs; the training
/// criterion at the best epoch is recorded. Retraining phase: done as soon as
/// the validation-set criterion reaches the recorded value. Both phases have an
/// epoch cap; hitting it is reported in `status`. Phases only move forward.
class EarlyStopper {
 public:
  EarlyStopper(int patience, int max_phase1_epochs, int max_phase2_epochs, EarlyStopState state = {});

  void record_validation(int epoch, double validation_error, double train_criterion);
  void record_retraining(int epoch, double validation_criterion);
  const EarlyStopState& state() const { return state_; }

 private:
  int patience_;
  int max1_;
  int max2_;
  EarlyStopState state_;
};

// --- metrics ---------------------------------------------------------------------

/// metrics.csv writer. The header is written only when the file is new or
/// empty, so a resumed run keeps appending to the same file. Missing values are
/// empty fields.
class MetricsWriter {
 public:
  MetricsWriter(const std::filesystem::path& path, bool zero_wall_time);
  void row(const std::string& phase, int epoch, int batch, double objective,
           double validation_error = std::numeric_limits<double>::quiet_NaN());
  double elapsed() const;

  static constexpr const char* kHeader = "phase,epoch,batch,objective,validation_error,wall_seconds";

 private:
  std::ofstream out_;
  bool zero_;
  std::chrono::steady_clock::time_point start_;
};

// --- pipeline ----------------------------------------------------------------------

struct DataSplits {
  std::vector<Example> train;       // used for fitting in the validation phase
  std::vector<Example> validation;  // held out in the validation phase
  std::vector<Example> test;
  int n_classes = 0;

  /// train followed by validation.
  std::vector<Example> all_training() const;
};

DataSplits load_data(const ExperimentConfig& cfg);

/// Indices into all_training() that the generative trainer may see in a phase.
std::vector<std::size_t> phase_training_indices(const DataSplits& d, StopPhase phase);

void save_mlp(const std::filesystem::path& path, const MlpParams& mlp);
MlpParams load_mlp(const std::filesystem::path& path);

/// Error raised by a pipeline stage; carries the stage name.
class StageError : public std::runtime_error {
 public:
  StageError(std::string stage, const std::string& what)
      : std::runtime_error(stage + ": " + what), stage_(std::move(stage)) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

/// Orchestrates the stages. Each stage reads its inputs from and writes its
/// outputs to the output directory, so stages can also run one at a time.
///
///   pretrain          -> pretrained.ckpt
///   train-jdbm        -> generative.ckpt  (resumable via state_generative.ckpt)
///   train-pcd         -> generative.ckpt  (idem)
///   extract-features  -> features_train.bin, features_test.bin
///   train-classifier  -> classifier.ckpt
///   eval              -> result.json
class Experiment {
 public:
  explicit Experiment(ExperimentConfig cfg);

  void pretrain();
  void train_jdbm_stage();
  void train_pcd_stage();
  void extract_features_stage();
  void train_classifier_stage();
  void eval_stage();

  /// The method's stages in order. Failures are written to result.json with
  /// the stage name and rethrown as StageError.
  nlohmann::json run();
  /// Runs one named stage with the same bookkeeping as run().
  void run_stage(const std::string& name);

  const nlohmann::json& result() const { return result_; }
  const ExperimentConfig& config() const { return cfg_; }
  std::filesystem::path path(const std::string& file) const { return cfg_.output_dir / file; }

 private:
  const DataSplits& data();
  MetricsWriter& metrics();
  void write_result();
  void generative_stage(bool jdbm);

  ExperimentConfig cfg_;
  std::optional<DataSplits> data_;
  std::optional<MetricsWriter> metrics_;
  nlohmann::json result_;
};

/// Oracle self-consistency report on random tiny models plus, when the
/// generative checkpoint in `out` is small enough, its exact inpainting
/// criterion on a few training examples.
nlohmann::json oracle_check(const ExperimentConfig& cfg, int n_models = 20);

}  // namespace jdbm
