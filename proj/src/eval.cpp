#include "dlrisk/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <map>
#include <numeric>

#include <nlohmann/json.hpp>

#include "dlrisk/io.hpp"

namespace dlrisk::eval {

namespace {

using nlohmann::json;

double ratio(double num, double den, bool& degenerate) {
  if (den == 0.0) {
    degenerate = true;
    return 0.0;
  }
  return num / den;
}

void check_binary(const IntVector& y, std::string_view who) {
  for (Eigen::Index i = 0; i < y.size(); ++i)
    if (y(i) != 0 && y(i) != 1) throw InvalidArgument(std::string(who) + ": labels must be 0 or 1");
}

json metrics_json(const FoldMetrics& m) {
  return json{{"fold", m.fold},
              {"valid", m.valid},
              {"n_train", m.n_train},
              {"n_test", m.n_test},
              {"synthetic_train_rows", m.synthetic_train_rows},
              {"synthetic_test_rows", m.synthetic_test_rows},
              {"auc", m.auc},
              {"pnl_per_trade", m.pnl},
              {"amc", m.amc},
              {"sensitivity", m.metrics.sensitivity},
              {"specificity", m.metrics.specificity},
              {"precision", m.metrics.precision},
              {"g_mean", m.metrics.g_mean},
              {"f_score", m.metrics.f_score}};
}

FoldMetrics mean_of(const std::vector<FoldMetrics>& folds) {
  FoldMetrics m;
  m.fold = -1;
  int n = 0;
  for (const auto& f : folds) {
    if (!f.valid) continue;
    ++n;
    m.n_test += f.n_test;
    m.n_train += f.n_train;
    m.synthetic_train_rows += f.synthetic_train_rows;
    m.synthetic_test_rows += f.synthetic_test_rows;
    m.pnl += f.pnl;
    m.amc += f.amc;
    m.auc += f.auc;
    m.metrics.sensitivity += f.metrics.sensitivity;
    m.metrics.specificity += f.metrics.specificity;
    m.metrics.precision += f.metrics.precision;
    m.metrics.g_mean += f.metrics.g_mean;
    m.metrics.f_score += f.metrics.f_score;
    m.metrics.degenerate = m.metrics.degenerate || f.metrics.degenerate;
  }
  m.valid = n > 0;
  if (n == 0) return m;
  const double d = n;
  m.pnl /= d;
  m.amc /= d;
  m.auc /= d;
  m.metrics.sensitivity /= d;
  m.metrics.specificity /= d;
  m.metrics.precision /= d;
  m.metrics.g_mean /= d;
  m.metrics.f_score /= d;
  return m;
}

}  // namespace

ConfusionCounts confusion(const std::vector<bool>& hedge, const IntVector& y) {
  require(static_cast<Eigen::Index>(hedge.size()) == y.size(), "confusion: size mismatch");
  check_binary(y, "confusion");
  ConfusionCounts c;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    const bool h = hedge[static_cast<std::size_t>(i)];
    if (y(i) == 1) (h ? c.tp : c.fn)++;
    else (h ? c.fp : c.tn)++;
  }
  return c;
}

ConfusionMetrics confusion_metrics(const ConfusionCounts& c) {
  ConfusionMetrics m;
  m.sensitivity = ratio(static_cast<double>(c.tp), static_cast<double>(c.tp + c.fn), m.degenerate);
  m.specificity = ratio(static_cast<double>(c.tn), static_cast<double>(c.tn + c.fp), m.degenerate);
  m.precision = ratio(static_cast<double>(c.tp), static_cast<double>(c.tp + c.fp), m.degenerate);
  m.g_mean = std::sqrt(m.sensitivity * m.specificity);
  m.f_score = ratio(2.0 * m.precision * m.sensitivity, m.precision + m.sensitivity, m.degenerate);
  return m;
}

double auc(const Vector& scores, const IntVector& y) {
  require(scores.size() == y.size(), "auc: size mismatch");
  check_binary(y, "auc");
  require(scores.allFinite(), "auc: non-finite scores");
  const long n_pos = (y.array() == 1).count();
  const long n_neg = y.size() - n_pos;
  if (n_pos == 0 || n_neg == 0) throw InvalidArgument("auc: both classes are required");
  std::vector<int> order(static_cast<std::size_t>(scores.size()));
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) { return scores(a) < scores(b); });
  double rank_sum = 0.0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && scores(order[j]) == scores(order[i])) ++j;
    const double mid = 0.5 * static_cast<double>(i + 1 + j);  // ranks i+1 .. j
    for (std::size_t k = i; k < j; ++k)
      if (y(order[k]) == 1) rank_sum += mid;
    i = j;
  }
  const double np = static_cast<double>(n_pos);
  return (rank_sum - np * (np + 1.0) / 2.0) / (np * static_cast<double>(n_neg));
}

double pnl_per_trade(const std::vector<bool>& hedge, const Vector& trader_pnl, const MonetaryModel& model) {
  require(static_cast<Eigen::Index>(hedge.size()) == trader_pnl.size(), "pnl_per_trade: size mismatch");
  require(!hedge.empty(), "pnl_per_trade: no trades");
  double total = 0.0;
  for (std::size_t i = 0; i < hedge.size(); ++i)
    total += hedge[i] ? -model.hedge_cost : -trader_pnl(static_cast<Eigen::Index>(i));
  return total / static_cast<double>(hedge.size());
}

double amc(const ConfusionCounts& c, const IntVector& y, const Vector& trader_pnl) {
  require(y.size() == trader_pnl.size(), "amc: size mismatch");
  check_binary(y, "amc");
  double sum_a = 0.0, sum_b = 0.0;
  long n_a = 0, n_b = 0;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    if (y(i) == 1) {
      sum_a += trader_pnl(i);
      ++n_a;
    } else {
      sum_b += std::abs(trader_pnl(i));
      ++n_b;
    }
  }
  const double c_fn = n_a ? sum_a / static_cast<double>(n_a) : 0.0;
  const double c_fp = n_b ? sum_b / static_cast<double>(n_b) : 0.0;
  const double fnr = c.tp + c.fn ? static_cast<double>(c.fn) / static_cast<double>(c.tp + c.fn) : 0.0;
  const double fpr = c.fp + c.tn ? static_cast<double>(c.fp) / static_cast<double>(c.fp + c.tn) : 0.0;
  return c_fn * fnr + c_fp * fpr;
}

Curves roc_pr_curves(const Vector& scores, const IntVector& y) {
  require(scores.size() == y.size(), "curves: size mismatch");
  check_binary(y, "curves");
  const long n_pos = (y.array() == 1).count();
  const long n_neg = y.size() - n_pos;
  if (n_pos == 0 || n_neg == 0) throw InvalidArgument("curves: both classes are required");
  std::vector<int> order(static_cast<std::size_t>(scores.size()));
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) { return scores(a) > scores(b); });
  Curves c;
  c.roc.push_back({0.0, 0.0});
  long tp = 0, fp = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && scores(order[j]) == scores(order[i])) {
      (y(order[j]) == 1 ? tp : fp)++;
      ++j;
    }
    const double recall = static_cast<double>(tp) / static_cast<double>(n_pos);
    c.roc.push_back({static_cast<double>(fp) / static_cast<double>(n_neg), recall});
    c.pr.push_back({recall, static_cast<double>(tp) / static_cast<double>(tp + fp)});
    i = j;
  }
  return c;
}

double trapezoid_area(const std::vector<CurvePoint>& roc) {
  double area = 0.0;
  for (std::size_t i = 1; i < roc.size(); ++i) area += (roc[i].x - roc[i - 1].x) * 0.5 * (roc[i].y + roc[i - 1].y);
  return area;
}

std::vector<bool> decide(const Vector& prob, double threshold) {
  std::vector<bool> out(static_cast<std::size_t>(prob.size()));
  for (Eigen::Index i = 0; i < prob.size(); ++i) out[static_cast<std::size_t>(i)] = prob(i) > threshold;
  return out;
}

const ClassifierReport& EvaluationReport::at(const std::string& name) const {
  for (const auto& c : classifiers)
    if (c.name == name) return c;
  throw InvalidArgument("no evaluation results for classifier '" + name + "'");
}

std::string EvaluationReport::to_json() const {
  json j{{"schema_version", 1}, {"n_folds", n_folds}, {"seed", seed}, {"smote", smote}, {"warnings", warnings}};
  json list = json::array();
  for (const auto& c : classifiers) {
    json folds = json::array();
    for (const auto& f : c.folds) folds.push_back(metrics_json(f));
    list.push_back({{"name", c.name}, {"folds", folds}, {"mean", metrics_json(c.mean)}});
  }
  j["classifiers"] = list;
  return j.dump(2);
}

std::vector<int> trader_folds(const std::vector<std::int64_t>& trader_id, int n_folds, std::uint64_t seed) {
  require(n_folds >= 2, "cross-validation needs at least 2 folds");
  std::vector<std::int64_t> ids(trader_id);
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  if (static_cast<int>(ids.size()) < n_folds)
    throw InvalidArgument("cross-validation: fewer traders (" + std::to_string(ids.size()) + ") than folds");
  Rng rng(derive_seed(seed, "folds"));
  std::shuffle(ids.begin(), ids.end(), rng);
  std::map<std::int64_t, int> fold_of;
  for (std::size_t i = 0; i < ids.size(); ++i) fold_of[ids[i]] = static_cast<int>(i % static_cast<std::size_t>(n_folds));
  std::vector<int> out;
  out.reserve(trader_id.size());
  for (auto t : trader_id) out.push_back(fold_of[t]);
  return out;
}

EvaluationReport cross_validate(const features::FeatureMatrix& data, const std::vector<NamedFactory>& classifiers,
                                const CvConfig& config) {
  require(!classifiers.empty(), "cross_validate: no classifiers");
  require(config.threshold > 0.0 && config.threshold < 1.0, "cross_validate: threshold must lie in (0, 1)");
  const IntVector y = data.classes();
  const auto fold = trader_folds(data.trader_id, config.n_folds, config.seed);
  const std::string fingerprint = data.schema.fingerprint();

  EvaluationReport report;
  report.n_folds = config.n_folds;
  report.seed = config.seed;
  report.smote = config.smote.has_value();
  for (const auto& c : classifiers) {
    ClassifierReport r;
    r.name = c.name;
    r.oof_scores = Vector::Constant(data.rows(), std::numeric_limits<double>::quiet_NaN());
    report.classifiers.push_back(std::move(r));
  }

  for (int f = 0; f < config.n_folds; ++f) {
    std::vector<int> train, test;
    for (std::size_t i = 0; i < fold.size(); ++i) (fold[i] == f ? test : train).push_back(static_cast<int>(i));
    const IntVector y_test = take(y, test);
    IntVector y_train = take(y, train);
    const auto has_both = [](const IntVector& v) { return (v.array() == 1).any() && (v.array() == 0).any(); };
    if (!has_both(y_test) || !has_both(y_train)) {
      report.warnings.push_back("fold " + std::to_string(f) + " excluded: a class is missing");
      std::cerr << "warning: " << report.warnings.back() << '\n';
      for (auto& r : report.classifiers) {
        FoldMetrics m;
        m.fold = f;
        m.valid = false;
        m.n_test = static_cast<long>(test.size());
        m.n_train = static_cast<long>(train.size());
        r.folds.push_back(m);
      }
      continue;
    }

    prep::Preprocessor prep(config.prep);
    Matrix x_train = prep.fit_transform(take_rows(data.x, train));
    const Matrix x_test = prep.transform(take_rows(data.x, test));
    std::vector<std::int64_t> groups;
    for (int r : train) groups.push_back(data.trader_id[static_cast<std::size_t>(r)]);
    long synthetic = 0;
    if (config.smote) {
      imbalance::SmoteConfig sc = *config.smote;
      sc.seed = derive_seed(sc.seed, static_cast<std::uint64_t>(f));
      auto s = imbalance::smote(x_train, y_train, sc);
      synthetic = s.synthetic_count();
      // a synthetic row joins the trader of its first parent for internal splits
      for (const auto& [a, b] : s.parents) groups.push_back(groups[static_cast<std::size_t>(a)]);
      x_train = std::move(s.x);
      y_train = std::move(s.y);
    }
    const Vector pnl_test = take(data.pnl, test);

    for (std::size_t c = 0; c < classifiers.size(); ++c) {
      auto model = classifiers[c].make();
      model->set_schema(fingerprint);
      model->fit(x_train, y_train,
                 FitContext{derive_seed(derive_seed(config.seed, classifiers[c].name), static_cast<std::uint64_t>(f)),
                            &groups});
      const Vector p = model->score(x_test, fingerprint);
      FoldMetrics m;
      m.fold = f;
      m.n_test = static_cast<long>(test.size());
      m.n_train = static_cast<long>(x_train.rows());
      m.synthetic_train_rows = synthetic;
      m.synthetic_test_rows = 0;  // test rows are always original rows
      const auto hedge = decide(p, config.threshold);
      const auto counts = confusion(hedge, y_test);
      m.metrics = confusion_metrics(counts);
      m.auc = auc(p, y_test);
      m.pnl = pnl_per_trade(hedge, pnl_test, config.money);
      m.amc = amc(counts, y_test, pnl_test);
      auto& r = report.classifiers[c];
      for (std::size_t k = 0; k < test.size(); ++k) r.oof_scores(test[k]) = p(static_cast<Eigen::Index>(k));
      r.folds.push_back(m);
    }
  }
  for (auto& r : report.classifiers) r.mean = mean_of(r.folds);
  return report;
}

void write_curves_csv(const std::vector<std::pair<std::string, Curves>>& curves, const std::string& path) {
  std::string out = "classifier,curve_type,x,y\n";
  for (const auto& [name, c] : curves) {
    for (const auto& p : c.roc) out += name + ",roc," + io::format_double(p.x) + "," + io::format_double(p.y) + "\n";
    for (const auto& p : c.pr) out += name + ",pr," + io::format_double(p.x) + "," + io::format_double(p.y) + "\n";
  }
  io::write_text(path, out);
}

}  // namespace dlrisk::eval
