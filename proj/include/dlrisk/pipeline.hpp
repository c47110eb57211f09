#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "dlrisk/features.hpp"
#include "dlrisk/sda.hpp"
#include "dlrisk/synthgen.hpp"

/// Stage runners behind the command-line tool. Every stage reads and writes
/// files in the output directory only.
namespace dlrisk::pipeline {

inline constexpr int kReportSchemaVersion = 1;

struct RunConfig {
  std::uint64_t seed = 42;
  std::filesystem::path out = "out";

  synth::GeneratorConfig generator;
  features::FeatureConfig features;

  std::vector<std::string> classifiers = {"logit", "cart", "forest", "adaboost", "svm", "ann", "sda"};
  bool grid_search = false;
  sda::HyperParams sda;
  /// Random-search trials for the SdA (0 keeps `sda` as given).
  int search_budget = 0;
  double selection_fraction = 0.2;

  int folds = 5;
  bool smote = false;
  int smote_k = 5;
  double hedge_cost = 0.0;
  double threshold = 0.5;

  std::vector<std::string> importance_classifiers = {"logit", "cart"};
  double importance_validation = 0.3;

  std::vector<std::string> policies = {"stx",    "custom1", "custom2",  "custom3", "ensemble",
                                        "ctree2", "model",   "no_hedge", "oracle"};
  std::string hedge_model = "sda";
  bool hedge_smote = false;
  double stx_threshold = 0.05;
  std::string custom2_mode = "and";
  double hedge_test_fraction = 0.3;

  void validate() const;
  /// Canonical JSON of every field (stamped into outputs).
  std::string to_json() const;
  /// Unknown fields and type errors are reported with their path.
  static RunConfig from_json(const std::string& text);
  static RunConfig load(const std::filesystem::path& path);

  /// 128-1024-1024-128 SdA and 10 folds.
  void apply_paper_scale();
  std::uint64_t stage_seed(const std::string& stage) const { return derive_seed(seed, stage); }
};

void run_generate(const RunConfig& config);
void run_featurize(const RunConfig& config);
void run_train(const RunConfig& config);
void run_evaluate(const RunConfig& config);
void run_importance(const RunConfig& config);
void run_hedge(const RunConfig& config);
void run_report(const RunConfig& config);

/// Runs a stage by name.
void run_stage(const std::string& stage, const RunConfig& config);
const std::vector<std::string>& stage_names();

}  // namespace dlrisk::pipeline
