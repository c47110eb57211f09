#include "dlrisk/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <map>
#include <set>

#include <nlohmann/json.hpp>

#include "dlrisk/baselines.hpp"
#include "dlrisk/dataprep.hpp"
#include "dlrisk/eval.hpp"
#include "dlrisk/hedging.hpp"
#include "dlrisk/ifbsa.hpp"
#include "dlrisk/imbalance.hpp"
#include "dlrisk/io.hpp"

namespace dlrisk::pipeline {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

// ------------------------------------------------------------ config reading

/// Reads one JSON object, tracking which keys were consumed so unknown ones
/// can be reported with their full path.
class Reader {
 public:
  Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw SchemaError("config: '" + where() + "' must be an object");
  }

  bool has(const std::string& key) const { return j_.contains(key); }

  void get(const std::string& key, int& out) {
    if (const json* v = field(key)) {
      if (!v->is_number_integer()) fail(key, "an integer");
      out = v->get<int>();
    }
  }
  void get(const std::string& key, std::uint64_t& out) {
    if (const json* v = field(key)) {
      if (!v->is_number_unsigned() && !(v->is_number_integer() && v->get<std::int64_t>() >= 0))
        fail(key, "a non-negative integer");
      out = v->get<std::uint64_t>();
    }
  }
  void get(const std::string& key, double& out) {
    if (const json* v = field(key)) {
      if (!v->is_number()) fail(key, "a number");
      out = v->get<double>();
    }
  }
  void get(const std::string& key, bool& out) {
    if (const json* v = field(key)) {
      if (!v->is_boolean()) fail(key, "a boolean");
      out = v->get<bool>();
    }
  }
  void get(const std::string& key, std::string& out) {
    if (const json* v = field(key)) {
      if (!v->is_string()) fail(key, "a string");
      out = v->get<std::string>();
    }
  }
  void get(const std::string& key, std::vector<std::string>& out) {
    if (const json* v = field(key)) {
      if (!v->is_array() || !std::all_of(v->begin(), v->end(), [](const json& e) { return e.is_string(); }))
        fail(key, "an array of strings");
      out = v->get<std::vector<std::string>>();
    }
  }
  void get(const std::string& key, std::vector<int>& out) {
    if (const json* v = field(key)) {
      if (!v->is_array() || !std::all_of(v->begin(), v->end(), [](const json& e) { return e.is_number_integer(); }))
        fail(key, "an array of integers");
      out = v->get<std::vector<int>>();
    }
  }
  template <std::size_t N>
  void get(const std::string& key, std::array<double, N>& out) {
    if (const json* v = field(key)) {
      if (!v->is_array() || v->size() != N ||
          !std::all_of(v->begin(), v->end(), [](const json& e) { return e.is_number(); }))
        fail(key, "an array of " + std::to_string(N) + " numbers");
      for (std::size_t i = 0; i < N; ++i) out[i] = (*v)[i].get<double>();
    }
  }
  void get(const std::string& key, fs::path& out) {
    std::string s = out.string();
    get(key, s);
    out = s;
  }

  /// Nested object; returns nullopt-like empty reader when absent.
  std::optional<Reader> child(const std::string& key) {
    const json* v = field(key);
    if (!v) return std::nullopt;
    return Reader(*v, where(key));
  }

  void finish() const {
    for (const auto& [key, value] : j_.items())
      if (!seen_.count(key)) throw SchemaError("config: unknown field '" + where(key) + "'");
  }

 private:
  const json* field(const std::string& key) {
    seen_.insert(key);
    return j_.contains(key) ? &j_.at(key) : nullptr;
  }
  std::string where(const std::string& key = "") const {
    if (key.empty()) return path_.empty() ? "<root>" : path_;
    return path_.empty() ? key : path_ + "." + key;
  }
  [[noreturn]] void fail(const std::string& key, const std::string& what) const {
    throw SchemaError("config: field '" + where(key) + "' must be " + what);
  }

  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

void read_sda(Reader& r, sda::HyperParams& hp) {
  r.get("hidden", hp.hidden);
  r.get("corruption", hp.corruption);
  r.get("dropout", hp.dropout);
  r.get("lambda", hp.lambda);
  r.get("learning_rate", hp.learning_rate);
  r.get("decay", hp.decay);
  r.get("momentum", hp.momentum);
  r.get("batch_size", hp.batch_size);
  r.get("pretrain_epochs", hp.pretrain_epochs);
  r.get("finetune_epochs", hp.finetune_epochs);
  r.get("patience", hp.patience);
  r.get("batch_norm", hp.batch_norm);
  r.get("pretrain", hp.pretrain);
  r.get("validation_fraction", hp.validation_fraction);
  std::string act = nn::to_string(hp.activation);
  r.get("activation", act);
  hp.activation = nn::parse_activation(act);
  r.finish();
}

// ------------------------------------------------------------ artifacts

fs::path artifact(const RunConfig& c, const std::string& name) { return c.out / name; }

/// Path of an upstream artifact; throws naming it when it is missing.
fs::path need(const RunConfig& c, const std::string& name, const std::string& producer) {
  const fs::path p = artifact(c, name);
  if (!fs::exists(p))
    throw IoError("missing artifact '" + name + "' in " + c.out.string() + " (produced by the '" + producer +
                  "' stage)");
  return p;
}

void write_json(const fs::path& path, const json& j) { io::write_text(path, j.dump(2) + "\n"); }

json read_json(const fs::path& path) {
  try {
    return json::parse(io::read_text(path));
  } catch (const json::exception& e) {
    throw SchemaError(path.string() + ": " + e.what());
  }
}

void write_manifest(const RunConfig& c, const std::string& stage, const std::vector<std::string>& inputs,
                    const std::vector<std::string>& outputs) {
  write_json(artifact(c, "manifest_" + stage + ".json"), json{{"stage", stage},
                                                              {"seed", c.seed},
                                                              {"stage_seed", c.stage_seed(stage)},
                                                              {"inputs", inputs},
                                                              {"outputs", outputs},
                                                              {"config", json::parse(c.to_json())}});
}

features::FeatureMatrix load_features(const RunConfig& c) {
  return features::read_features_csv(need(c, "features.csv", "featurize"), need(c, "schema.json", "featurize"));
}

struct TrainedModel {
  std::string family;
  NamedFactory factory;
  std::string file;
};

std::vector<TrainedModel> load_model_manifest(const RunConfig& c) {
  const json m = read_json(need(c, "models/manifest.json", "train"));
  std::vector<TrainedModel> out;
  try {
    for (const auto& e : m.at("models")) {
      const auto family = e.at("family").get<std::string>();
      out.push_back({family, baselines::factory_from_json(family, e.at("params").dump()),
                     e.at("file").get<std::string>()});
    }
  } catch (const json::exception& e) {
    throw SchemaError("models/manifest.json: " + std::string(e.what()));
  }
  return out;
}

NamedFactory family_factory(const RunConfig& c, const std::string& family) {
  if (family == "sda") {
    const auto hp = c.sda;
    return {family, [hp] { return std::make_unique<sda::SdaClassifier>(hp); }};
  }
  return baselines::default_factory(family);
}

const std::set<std::string> kFamilies = {"logit", "cart", "forest", "adaboost", "svm", "ann", "sda"};
const std::set<std::string> kPolicies = {"stx",    "custom1", "custom2",  "custom3", "ensemble",
                                         "ctree2", "model",   "no_hedge", "oracle"};

}  // namespace

// ------------------------------------------------------------ config

void RunConfig::validate() const {
  generator.validate();
  sda.validate();
  require(!classifiers.empty(), "config: models.classifiers is empty");
  for (const auto& f : classifiers) require(kFamilies.count(f) > 0, "config: unknown classifier '" + f + "'");
  for (const auto& f : importance_classifiers)
    require(kFamilies.count(f) > 0, "config: unknown importance classifier '" + f + "'");
  for (const auto& p : policies) require(kPolicies.count(p) > 0, "config: unknown policy '" + p + "'");
  require(kFamilies.count(hedge_model) > 0, "config: unknown hedging model '" + hedge_model + "'");
  require(folds >= 2, "config: evaluation.folds must be >= 2");
  require(smote_k >= 1, "config: evaluation.smote_k must be >= 1");
  require(hedge_cost >= 0.0, "config: evaluation.hedge_cost must be non-negative");
  require(threshold > 0.0 && threshold < 1.0, "config: evaluation.threshold must lie in (0, 1)");
  require(search_budget >= 0, "config: models.search_budget must be non-negative");
  require(selection_fraction > 0.0 && selection_fraction < 1.0, "config: models.selection_fraction must lie in (0, 1)");
  require(importance_validation > 0.0 && importance_validation < 1.0,
          "config: importance.validation_fraction must lie in (0, 1)");
  require(hedge_test_fraction > 0.0 && hedge_test_fraction < 1.0, "config: hedging.test_fraction must lie in (0, 1)");
  require(custom2_mode == "and" || custom2_mode == "or", "config: hedging.custom2_mode must be 'and' or 'or'");
  require(features.examples_per_trader >= 0, "config: features.examples_per_trader must be non-negative");
}

std::string RunConfig::to_json() const {
  const auto& g = generator;
  const auto& f = features;
  return json{{"seed", seed},
              {"out", out.string()},
              {"generator",
               {{"n_traders", g.n_traders},
                {"min_trades", g.min_trades},
                {"max_trades", g.max_trades},
                {"target_a_prevalence", g.target_a_prevalence},
                {"skill_mix", g.skill_mix},
                {"calibrate_prevalence", g.calibrate_prevalence},
                {"nonlinearity_strength", g.nonlinearity_strength},
                {"return_noise", g.return_noise}}},
              {"features",
               {{"window", f.window},
                {"horizon", f.horizon},
                {"label_offset", f.label_offset},
                {"threshold", f.threshold},
                {"min_future", f.min_future},
                {"examples_per_trader", f.examples_per_trader}}},
              {"models",
               {{"classifiers", classifiers},
                {"grid_search", grid_search},
                {"search_budget", search_budget},
                {"selection_fraction", selection_fraction},
                {"sda", json::parse(sda.to_json())}}},
              {"evaluation",
               {{"folds", folds}, {"smote", smote}, {"smote_k", smote_k}, {"hedge_cost", hedge_cost},
                {"threshold", threshold}}},
              {"importance", {{"classifiers", importance_classifiers}, {"validation_fraction", importance_validation}}},
              {"hedging",
               {{"policies", policies},
                {"model", hedge_model},
                {"smote", hedge_smote},
                {"stx_threshold", stx_threshold},
                {"custom2_mode", custom2_mode},
                {"test_fraction", hedge_test_fraction}}}}
      .dump();
}

RunConfig RunConfig::from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw SchemaError(std::string("config: not valid JSON: ") + e.what());
  }
  RunConfig c;
  Reader root(j, "");
  root.get("seed", c.seed);
  root.get("out", c.out);
  if (auto r = root.child("generator")) {
    auto& g = c.generator;
    r->get("n_traders", g.n_traders);
    r->get("min_trades", g.min_trades);
    r->get("max_trades", g.max_trades);
    r->get("target_a_prevalence", g.target_a_prevalence);
    r->get("skill_mix", g.skill_mix);
    r->get("calibrate_prevalence", g.calibrate_prevalence);
    r->get("nonlinearity_strength", g.nonlinearity_strength);
    r->get("return_noise", g.return_noise);
    r->finish();
  }
  if (auto r = root.child("features")) {
    auto& f = c.features;
    r->get("window", f.window);
    r->get("horizon", f.horizon);
    r->get("label_offset", f.label_offset);
    r->get("threshold", f.threshold);
    r->get("min_future", f.min_future);
    r->get("examples_per_trader", f.examples_per_trader);
    r->finish();
  }
  if (auto r = root.child("models")) {
    r->get("classifiers", c.classifiers);
    r->get("grid_search", c.grid_search);
    r->get("search_budget", c.search_budget);
    r->get("selection_fraction", c.selection_fraction);
    if (auto s = r->child("sda")) read_sda(*s, c.sda);
    r->finish();
  }
  if (auto r = root.child("evaluation")) {
    r->get("folds", c.folds);
    r->get("smote", c.smote);
    r->get("smote_k", c.smote_k);
    r->get("hedge_cost", c.hedge_cost);
    r->get("threshold", c.threshold);
    r->finish();
  }
  if (auto r = root.child("importance")) {
    r->get("classifiers", c.importance_classifiers);
    r->get("validation_fraction", c.importance_validation);
    r->finish();
  }
  if (auto r = root.child("hedging")) {
    r->get("policies", c.policies);
    r->get("model", c.hedge_model);
    r->get("smote", c.hedge_smote);
    r->get("stx_threshold", c.stx_threshold);
    r->get("custom2_mode", c.custom2_mode);
    r->get("test_fraction", c.hedge_test_fraction);
    r->finish();
  }
  root.finish();
  c.validate();
  return c;
}

RunConfig RunConfig::load(const fs::path& path) {
  if (!fs::exists(path)) throw IoError("config file not found: " + path.string());
  return from_json(io::read_text(path));
}

void RunConfig::apply_paper_scale() {
  sda.hidden = {128, 1024, 1024, 128};
  folds = 10;
}

// ------------------------------------------------------------ stages

void run_generate(const RunConfig& c) {
  synth::GeneratorConfig g = c.generator;
  g.seed = c.stage_seed("generate");
  g.label_horizon = c.features.horizon;
  g.min_future = c.features.min_future;
  const auto pop = synth::generate_population(g);
  fs::create_directories(c.out);
  synth::export_trades(pop.trades, artifact(c, "trades.csv"));
  synth::export_profiles(pop.profiles, artifact(c, "profiles.csv"));
  write_manifest(c, "generate", {}, {"trades.csv", "profiles.csv"});
}

void run_featurize(const RunConfig& c) {
  const auto trades = synth::import_trades(need(c, "trades.csv", "generate"));
  const auto profiles = synth::import_profiles(need(c, "profiles.csv", "generate"));
  const auto data = features::build_dataset(trades, profiles, c.features);
  features::write_features_csv(data, artifact(c, "features.csv"));
  features::write_schema_json(data.schema, artifact(c, "schema.json"));
  write_manifest(c, "featurize", {"trades.csv", "profiles.csv"}, {"features.csv", "schema.json"});
}

void run_train(const RunConfig& c) {
  const auto data = load_features(c);
  const std::uint64_t seed = c.stage_seed("train");
  prep::Preprocessor prep;
  const Matrix x = prep.fit_transform(data.x);
  const IntVector y = data.classes();
  io::write_text(artifact(c, "prep.json"), prep.to_json());
  const std::string fingerprint = data.schema.fingerprint();

  json models = json::array();
  std::vector<std::string> outputs = {"prep.json", "models/manifest.json"};
  for (const auto& family : c.classifiers) {
    std::vector<NamedFactory> candidates;
    if (family == "sda" && c.search_budget > 0) {
      sda::SearchSpace space;
      space.topologies = {c.sda.hidden};
      const auto result = sda::random_search(x, y, &data.trader_id, space, c.sda, c.search_budget,
                                             derive_seed(seed, "sda-search"));
      sda::write_trial_log(result, artifact(c, "sda_trials.jsonl"));
      outputs.push_back("sda_trials.jsonl");
      const auto hp = result.best;
      candidates.push_back({"sda", [hp] { return std::make_unique<sda::SdaClassifier>(hp); }});
    } else if (c.grid_search && family != "sda") {
      candidates = baselines::grid(family);
    } else {
      candidates.push_back(family_factory(c, family));
    }
    const NamedFactory chosen = baselines::select_by_holdout(candidates, x, y, &data.trader_id, c.selection_fraction,
                                                             derive_seed(seed, family));
    auto model = chosen.make();
    const std::string params = model->to_json();
    model->set_schema(fingerprint);
    model->fit(x, y, FitContext{derive_seed(seed, family), &data.trader_id});
    const std::string file = "models/" + family + ".ckpt";
    baselines::save_model(*model, artifact(c, file));
    outputs.push_back(file);
    models.push_back({{"family", family}, {"selected", chosen.name}, {"file", file}, {"params", json::parse(params)}});
  }
  write_json(artifact(c, "models/manifest.json"), json{{"schema", fingerprint}, {"models", models}});
  write_manifest(c, "train", {"features.csv", "schema.json"}, outputs);
}

void run_evaluate(const RunConfig& c) {
  const auto trained = load_model_manifest(c);
  const auto data = load_features(c);
  std::vector<NamedFactory> factories;
  for (const auto& t : trained) factories.push_back(t.factory);
  eval::CvConfig cv;
  cv.n_folds = c.folds;
  cv.seed = c.stage_seed("evaluate");
  cv.threshold = c.threshold;
  cv.money.hedge_cost = c.hedge_cost;
  if (c.smote) cv.smote = imbalance::SmoteConfig{c.smote_k, 1.0, derive_seed(cv.seed, "smote")};
  const auto report = eval::cross_validate(data, factories, cv);

  json j = json::parse(report.to_json());
  j["config"] = json::parse(c.to_json());
  write_json(artifact(c, "evaluation.json"), j);

  const IntVector y = data.classes();
  std::vector<std::pair<std::string, eval::Curves>> curves;
  for (const auto& r : report.classifiers) {
    std::vector<int> rows;
    for (Eigen::Index i = 0; i < r.oof_scores.size(); ++i)
      if (std::isfinite(r.oof_scores(i))) rows.push_back(static_cast<int>(i));
    const IntVector yr = take(y, rows);
    if ((yr.array() == 1).any() && (yr.array() == 0).any())
      curves.emplace_back(r.name, eval::roc_pr_curves(take(r.oof_scores, rows), yr));
  }
  eval::write_curves_csv(curves, artifact(c, "curves.csv").string());
  write_manifest(c, "evaluate", {"features.csv", "schema.json", "models/manifest.json"},
                 {"evaluation.json", "curves.csv"});
}

void run_importance(const RunConfig& c) {
  const auto data = load_features(c);
  const std::uint64_t seed = c.stage_seed("importance");
  const auto split = ifbsa::make_split(data, c.importance_validation, seed);
  std::vector<NamedFactory> factories;
  for (const auto& f : c.importance_classifiers) factories.push_back(family_factory(c, f));
  const auto table = ifbsa::analyze(split, data.schema, factories, seed);
  ifbsa::write_importance_csv(table, artifact(c, "importance.csv"));
  ifbsa::write_fused_csv(table, artifact(c, "fused.csv"));
  json groups = json::object();
  for (int g = 0; g < features::kFeatureGroups; ++g)
    groups[features::to_string(static_cast<features::FeatureGroup>(g))] = table.group_totals[static_cast<std::size_t>(g)];
  json per = json::array();
  for (std::size_t t = 0; t < table.classifiers.size(); ++t)
    per.push_back({{"classifier", table.classifiers[t]},
                   {"auc", table.auc(static_cast<Eigen::Index>(t))},
                   {"omega", table.omega(static_cast<Eigen::Index>(t))}});
  write_json(artifact(c, "importance.json"), json{{"classifiers", per}, {"group_totals", groups}});
  write_manifest(c, "importance", {"features.csv", "schema.json"}, {"importance.csv", "fused.csv", "importance.json"});
}

void run_hedge(const RunConfig& c) {
  const auto data = load_features(c);
  const auto trades = synth::import_trades(need(c, "trades.csv", "generate"));
  const std::uint64_t seed = c.stage_seed("hedge");
  NamedFactory model_factory = family_factory(c, c.hedge_model);
  if (fs::exists(artifact(c, "models/manifest.json")))
    for (const auto& t : load_model_manifest(c))
      if (t.family == c.hedge_model) model_factory = t.factory;

  const IntVector y = data.classes();
  const auto [train, test] = sda::holdout_split(y, &data.trader_id, c.hedge_test_fraction, derive_seed(seed, "split"));
  const auto train_data = data.subset(train);
  const auto test_data = data.subset(test);
  prep::Preprocessor prep;
  Matrix x_train = prep.fit_transform(train_data.x);
  const Matrix x_test = prep.transform(test_data.x);
  IntVector y_train = take(y, train);

  const auto ctx_train = hedging::trade_contexts(trades, train_data.trader_id, train_data.trade_seq);
  const auto ctx_test = hedging::trade_contexts(trades, test_data.trader_id, test_data.trade_seq);
  const auto stats = hedging::population_stats(ctx_train);
  const auto mode = c.custom2_mode == "or" ? hedging::Combine::Or : hedging::Combine::And;
  const Vector& pnl = test_data.pnl;
  const auto n = ctx_test.size();

  std::map<std::string, std::vector<bool>> decisions;
  auto rule = [&](auto f) {
    std::vector<bool> d(n);
    for (std::size_t i = 0; i < n; ++i) d[i] = f(ctx_test[i]);
    return d;
  };
  decisions["stx"] = rule([&](const auto& t) { return hedging::stx_policy(t, c.stx_threshold); });
  decisions["custom1"] = rule([&](const auto& t) { return hedging::custom1_policy(t, stats); });
  decisions["custom2"] = rule([&](const auto& t) { return hedging::custom2_policy(t, stats, mode); });
  decisions["custom3"] = rule([&](const auto& t) { return hedging::custom3_policy(t); });
  decisions["ensemble"] = rule([&](const auto& t) {
    return hedging::ensemble_policy(hedging::custom1_policy(t, stats), hedging::custom2_policy(t, stats, mode),
                                    hedging::custom3_policy(t));
  });
  decisions["no_hedge"] = std::vector<bool>(n, false);
  decisions["oracle"] = hedging::oracle_decisions(pnl, eval::MonetaryModel{c.hedge_cost});

  json extra = json::object();
  const auto wanted = [&](const std::string& p) {
    return std::find(c.policies.begin(), c.policies.end(), p) != c.policies.end();
  };
  if (wanted("ctree2")) {
    hedging::Ctree2Policy tree;
    tree.fit(x_train, y_train, data.schema, derive_seed(seed, "ctree2"));
    decisions["ctree2"] = tree.decide(x_test);
    extra["ctree2_split_features"] = tree.split_features();
  }
  if (wanted("model")) {
    std::vector<std::int64_t> groups = train_data.trader_id;
    if (c.hedge_smote) {
      auto s = imbalance::smote(x_train, y_train, imbalance::SmoteConfig{c.smote_k, 1.0, derive_seed(seed, "smote")});
      for (const auto& [a, b] : s.parents) groups.push_back(groups[static_cast<std::size_t>(a)]);
      x_train = std::move(s.x);
      y_train = std::move(s.y);
    }
    auto model = model_factory.make();
    model->fit(x_train, y_train, FitContext{derive_seed(seed, "model"), &groups});
    decisions["model"] = eval::decide(model->predict_proba(x_test), c.threshold);
    extra["model"] = model_factory.name;
  }

  std::vector<hedging::NamedDecisions> chosen;
  for (const auto& p : c.policies) chosen.push_back({p, decisions.at(p)});
  const auto results = hedging::compare_policies(chosen, pnl, eval::MonetaryModel{c.hedge_cost});
  hedging::write_policies_csv(results, artifact(c, "policies.csv"));
  extra["population_stats"] = {{"sharpe", stats.sharpe},
                               {"stake", stats.stake},
                               {"frequency", stats.frequency},
                               {"duration_minutes", stats.duration}};
  extra["n_train"] = train.size();
  extra["n_test"] = test.size();
  write_json(artifact(c, "hedge.json"), extra);
  write_manifest(c, "hedge", {"features.csv", "schema.json", "trades.csv"}, {"policies.csv", "hedge.json"});
}

void run_report(const RunConfig& c) {
  const json evaluation = read_json(need(c, "evaluation.json", "evaluate"));
  json report{{"schema_version", kReportSchemaVersion}, {"seed", c.seed}, {"config", json::parse(c.to_json())}};
  std::vector<std::string> inputs = {"evaluation.json"};
  std::vector<std::string> outputs = {"report.json"};
  std::vector<std::string> missing;

  json table = json::array();
  for (const auto& cl : evaluation.at("classifiers")) {
    json row = cl.at("mean");
    row.erase("fold");
    row.erase("valid");
    row["classifier"] = cl.at("name");
    table.push_back(row);
  }
  report["metrics"] = table;
  report["n_folds"] = evaluation.at("n_folds");
  report["smote"] = evaluation.at("smote");
  report["warnings"] = evaluation.at("warnings");

  if (fs::exists(artifact(c, "curves.csv"))) {
    const auto curves = io::read_csv(artifact(c, "curves.csv"));
    std::map<std::string, std::vector<eval::CurvePoint>> roc;
    for (const auto& r : curves.rows)
      if (r[1] == "roc") roc[r[0]].push_back({io::parse_double(r[2]), io::parse_double(r[3])});
    json areas = json::object();
    for (const auto& [name, pts] : roc) areas[name] = eval::trapezoid_area(pts);
    report["roc_area"] = areas;
    inputs.push_back("curves.csv");
  } else {
    missing.push_back("curves.csv");
  }

  if (fs::exists(artifact(c, "policies.csv"))) {
    const auto t = io::read_csv(artifact(c, "policies.csv"));
    io::expect_header(t, {"policy", "mean_pnl_gbp", "n_trades", "hedge_rate"}, "policies.csv");
    json rows = json::array();
    for (const auto& r : t.rows)
      rows.push_back({{"policy", r[0]},
                      {"mean_pnl_gbp", io::parse_double(r[1])},
                      {"n_trades", io::parse_int(r[2])},
                      {"hedge_rate", io::parse_double(r[3])}});
    report["policies"] = rows;
    inputs.push_back("policies.csv");
  } else {
    missing.push_back("policies.csv");
  }

  if (fs::exists(artifact(c, "importance.json"))) {
    report["importance"] = read_json(artifact(c, "importance.json"));
    inputs.push_back("importance.json");
  } else {
    missing.push_back("importance.json");
  }

  const fs::path sda_model = artifact(c, "models/sda.ckpt");
  if (fs::exists(sda_model) && fs::exists(artifact(c, "prep.json"))) {
    const auto data = load_features(c);
    const auto prep = prep::Preprocessor::from_json(io::read_text(artifact(c, "prep.json")));
    const Matrix x = prep.transform(data.x);
    const IntVector y = data.classes();
    const auto model = baselines::load_model(sda_model);
    const auto* net = dynamic_cast<const sda::SdaClassifier*>(model.get());
    if (!net) throw SchemaError("models/sda.ckpt does not hold an SdA");
    const auto hist = sda::activation_histogram(net->network(), x, y, 0, 20);
    std::string csv = "neuron,bin,lower,upper,count_hedge,count_no_hedge\n";
    json top = json::array();
    for (const auto& h : hist)
      for (std::size_t b = 0; b < h.counts_hedge.size(); ++b)
        csv += std::to_string(h.neuron) + "," + std::to_string(b) + "," + io::format_double(h.edges[b]) + "," +
               io::format_double(h.edges[b + 1]) + "," + std::to_string(h.counts_hedge[b]) + "," +
               std::to_string(h.counts_no_hedge[b]) + "\n";
    std::vector<const sda::NeuronHistogram*> order;
    for (const auto& h : hist) order.push_back(&h);
    std::stable_sort(order.begin(), order.end(),
                     [](const auto* a, const auto* b) { return a->js_divergence > b->js_divergence; });
    for (std::size_t i = 0; i < std::min<std::size_t>(10, order.size()); ++i)
      top.push_back({{"neuron", order[i]->neuron}, {"js_divergence", order[i]->js_divergence}});
    io::write_text(artifact(c, "histograms.csv"), csv);
    report["histograms"] = {{"layer", 0}, {"bins", 20}, {"file", "histograms.csv"}, {"top_neurons", top}};
    outputs.push_back("histograms.csv");

    const int n = static_cast<int>(std::min<Eigen::Index>(100, x.rows()));
    const auto s = sda::top_stimuli(net->network(), x, y, data.pnl, n, 20);
    report["stimuli"] = {{"neuron", s.neuron},
                         {"threshold", s.threshold},
                         {"purity", s.purity},
                         {"majority_class", s.majority_class},
                         {"rows", s.rows.size()},
                         {"profit_fraction", s.profit_fraction},
                         {"base_profit_rate", s.base_profit_rate}};
    inputs.insert(inputs.end(), {"models/sda.ckpt", "prep.json", "features.csv", "schema.json"});
  } else {
    missing.push_back("models/sda.ckpt");
  }
  report["missing_sections"] = missing;
  write_json(artifact(c, "report.json"), report);
  write_manifest(c, "report", inputs, outputs);
}

const std::vector<std::string>& stage_names() {
  static const std::vector<std::string> names = {"generate", "featurize", "train", "evaluate",
                                                 "importance", "hedge",   "report"};
  return names;
}

void run_stage(const std::string& stage, const RunConfig& config) {
  if (stage == "generate") return run_generate(config);
  if (stage == "featurize") return run_featurize(config);
  if (stage == "train") return run_train(config);
  if (stage == "evaluate") return run_evaluate(config);
  if (stage == "importance") return run_importance(config);
  if (stage == "hedge") return run_hedge(config);
  if (stage == "report") return run_report(config);
  throw InvalidArgument("unknown stage '" + stage + "'");
}

}  // namespace dlrisk::pipeline
