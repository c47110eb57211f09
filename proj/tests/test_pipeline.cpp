#include <gtest/gtest.h>

#include <filesystem>

#include <nlohmann/json.hpp>

#include "dlrisk/io.hpp"
#include "dlrisk/pipeline.hpp"

using namespace dlrisk;
using pipeline::RunConfig;
namespace fs = std::filesystem;

namespace {

RunConfig tiny(const std::string& dir) {
  auto c = RunConfig::from_json(R"({
    "seed": 3,
    "generator": {"n_traders": 150, "min_trades": 40, "max_trades": 90},
    "features": {"examples_per_trader": 4},
    "models": {"classifiers": ["logit", "cart", "sda"],
               "sda": {"hidden": [8, 8], "pretrain_epochs": 1, "finetune_epochs": 5}},
    "evaluation": {"folds": 3},
    "importance": {"classifiers": ["logit"]},
    "hedging": {"model": "logit"}
  })");
  c.out = fs::temp_directory_path() / dir;
  fs::remove_all(c.out);
  return c;
}

}  // namespace

TEST(Config, DefaultsRoundTrip) {
  const RunConfig c;
  const auto back = RunConfig::from_json(c.to_json());
  EXPECT_EQ(back.to_json(), c.to_json());
}

TEST(Config, UnknownFieldReportsPath) {
  try {
    RunConfig::from_json(R"({"models": {"sda": {"hiden": [4]}}})");
    FAIL() << "expected a schema error";
  } catch (const SchemaError& e) {
    EXPECT_NE(std::string(e.what()).find("models.sda.hiden"), std::string::npos) << e.what();
  }
}

TEST(Config, TypeErrorReportsPath) {
  try {
    RunConfig::from_json(R"({"evaluation": {"folds": "five"}})");
    FAIL() << "expected a schema error";
  } catch (const SchemaError& e) {
    EXPECT_NE(std::string(e.what()).find("evaluation.folds"), std::string::npos) << e.what();
  }
}

TEST(Config, InvalidValueRejected) {
  EXPECT_THROW(RunConfig::from_json(R"({"hedging": {"policies": ["stx", "magic"]}})"), InvalidArgument);
  EXPECT_THROW(RunConfig::from_json(R"({"evaluation": {"folds": 1}})"), InvalidArgument);
}

TEST(Config, PaperScale) {
  RunConfig c;
  c.apply_paper_scale();
  EXPECT_EQ(c.sda.hidden, (std::vector<int>{128, 1024, 1024, 128}));
  EXPECT_EQ(c.folds, 10);
}

TEST(Config, StageSeedsDiffer) {
  const RunConfig c;
  EXPECT_NE(c.stage_seed("train"), c.stage_seed("evaluate"));
}

TEST(Pipeline, EvaluateWithoutTrainNamesMissingArtifact) {
  const auto c = tiny("dlrisk_pipe_missing");
  pipeline::run_generate(c);
  pipeline::run_featurize(c);
  try {
    pipeline::run_evaluate(c);
    FAIL() << "expected a missing-artifact error";
  } catch (const IoError& e) {
    EXPECT_NE(std::string(e.what()).find("models/manifest.json"), std::string::npos) << e.what();
  }
}

TEST(Pipeline, SmallConfigRunsEndToEnd) {
  const auto c = tiny("dlrisk_pipe_full");
  for (const auto& stage : pipeline::stage_names()) pipeline::run_stage(stage, c);
  for (const char* f : {"trades.csv", "features.csv", "schema.json", "models/manifest.json", "models/sda.ckpt",
                        "evaluation.json", "curves.csv", "importance.csv", "fused.csv", "policies.csv",
                        "report.json", "histograms.csv"})
    EXPECT_TRUE(fs::exists(c.out / f)) << f;
  const auto report = nlohmann::json::parse(io::read_text(c.out / "report.json"));
  EXPECT_EQ(report.at("schema_version"), pipeline::kReportSchemaVersion);
  EXPECT_EQ(report.at("metrics").size(), 3u);
  EXPECT_EQ(report.at("policies").front().at("policy"), "oracle");
  EXPECT_TRUE(report.at("missing_sections").empty());
}
