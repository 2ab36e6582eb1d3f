/*
 * SPDX-License-Identifier: Apache-2.0
 */
#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "jdbm/experiment.hpp"

namespace {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  bool reproducible = false;
  int interrupt_after = 0;
};

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--config", c.config, "experiment config (JSON)")->required()->check(CLI::ExistingFile);
  sub->add_option("--seed", c.seed, "override the config seed");
  sub->add_option("--out", c.out, "output directory (overrides output_dir)");
  sub->add_flag("--reproducible", c.reproducible, "deterministic run; wall times are written as 0");
  sub->add_option("--interrupt-after-epochs", c.interrupt_after, "stop the generative stage early (testing)")
      ->group("");
}

jdbm::ExperimentConfig resolve(const Common& c) {
  jdbm::ExperimentConfig cfg = jdbm::load_config(c.config);
  if (c.seed) cfg.seed = *c.seed;
  if (!c.out.empty()) cfg.output_dir = c.out;
  if (c.reproducible) cfg.reproducible = true;
  cfg.interrupt_after_epochs = c.interrupt_after;
  cfg.validate();
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Deep Boltzmann machine training with the mean-field inpainting criterion"};
  app.require_subcommand(1);
  Common common;
  const std::vector<std::pair<std::string, std::string>> stages = {
      {"pretrain", "greedy RBM pretraining"},
      {"train-pcd", "train the DBM with persistent contrastive divergence"},
      {"train-jdbm", "train the DBM jointly with the inpainting criterion"},
      {"extract-features", "mean-field features of the training and test sets"},
      {"train-classifier", "train the MLP on cached features"},
      {"eval", "test error of the classifier and of the generative model"},
  };
  for (const auto& [name, help] : stages) add_common(app.add_subcommand(name, help), common);
  add_common(app.add_subcommand("oracle-check", "exact-inference self-check"), common);
  add_common(app.add_subcommand("run", "all stages of the configured method"), common);

  CLI11_PARSE(app, argc, argv);
  const std::string name = app.get_subcommands().front()->get_name();

  std::string stage = "config";
  try {
    jdbm::ExperimentConfig cfg = resolve(common);
    if (name == "oracle-check") {
      stage = name;
      const nlohmann::json report = jdbm::oracle_check(cfg);
      std::filesystem::create_directories(cfg.output_dir);
      std::ofstream(cfg.output_dir / "oracle_check.json") << report.dump(2) << '\n';
      std::cout << report.dump(2) << '\n';
      return report.at("pass").get<bool>() ? 0 : 1;
    }
    stage = "setup";
    jdbm::Experiment exp(std::move(cfg));
    stage = name;
    if (name == "run") {
      const nlohmann::json r = exp.run();
      std::cout << "test_error " << r.at("test_error").get<double>() << '\n';
    } else {
      exp.run_stage(name);
    }
  } catch (const jdbm::StageError& e) {
    std::cerr << "stage " << e.stage() << " failed: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "stage " << stage << " failed: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
