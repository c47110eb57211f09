#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dlrisk/classifier.hpp"
#include "dlrisk/core.hpp"
#include "dlrisk/dataprep.hpp"
#include "dlrisk/features.hpp"
#include "dlrisk/imbalance.hpp"

/// Statistical and monetary metrics and the trader-grouped cross-validation
/// harness. Positive = hedge (A-book).
namespace dlrisk::eval {

struct ConfusionCounts {
  long tp = 0, fp = 0, tn = 0, fn = 0;

  long total() const { return tp + fp + tn + fn; }
  friend bool operator==(const ConfusionCounts&, const ConfusionCounts&) = default;
};

/// Counts for class labels (1 = hedge) and hedge decisions.
ConfusionCounts confusion(const std::vector<bool>& hedge, const IntVector& y);

struct ConfusionMetrics {
  double sensitivity = 0.0;
  double specificity = 0.0;
  double precision = 0.0;
  double g_mean = 0.0;
  double f_score = 0.0;
  /// Set when a denominator was empty and the metric was reported as 0.
  bool degenerate = false;
};

ConfusionMetrics confusion_metrics(const ConfusionCounts& c);

/// P(score_pos > score_neg) + 0.5 P(tie), from midranks. Throws when a
/// class is absent.
double auc(const Vector& scores, const IntVector& y);

struct MonetaryModel {
  /// GBP paid per hedged trade; the maker otherwise earns 0 on it.
  double hedge_cost = 0.0;
};

/// Maker P&L per trade: hedged -> -hedge_cost, unhedged -> -(trader pnl).
double pnl_per_trade(const std::vector<bool>& hedge, const Vector& trader_pnl, const MonetaryModel& model = {});

/// c_FN FNR + c_FP FPR with c_FN the mean trader pnl over hedge-class rows
/// and c_FP the mean |trader pnl| over no-hedge rows.
double amc(const ConfusionCounts& c, const IntVector& y, const Vector& trader_pnl);

struct CurvePoint {
  double x = 0.0;
  double y = 0.0;
};

struct Curves {
  std::vector<CurvePoint> roc;  ///< (FPR, TPR), from (0,0) to (1,1)
  std::vector<CurvePoint> pr;   ///< (recall, precision)
};

/// Sweeps every distinct score as a threshold.
Curves roc_pr_curves(const Vector& scores, const IntVector& y);

/// Trapezoid area under a ROC point set.
double trapezoid_area(const std::vector<CurvePoint>& roc);

std::vector<bool> decide(const Vector& prob, double threshold = 0.5);

struct FoldMetrics {
  int fold = 0;
  bool valid = true;  ///< false when the test fold lacks a class
  long n_test = 0;
  long n_train = 0;
  long synthetic_train_rows = 0;
  long synthetic_test_rows = 0;
  double pnl = 0.0;
  double amc = 0.0;
  double auc = 0.0;
  ConfusionMetrics metrics;
};

struct ClassifierReport {
  std::string name;
  std::vector<FoldMetrics> folds;
  /// Means over valid folds.
  FoldMetrics mean;
  /// Out-of-fold P(hedge) per input row.
  Vector oof_scores;
};

struct EvaluationReport {
  int n_folds = 0;
  std::uint64_t seed = 0;
  bool smote = false;
  std::vector<ClassifierReport> classifiers;
  std::vector<std::string> warnings;

  const ClassifierReport& at(const std::string& name) const;
  /// Schema-versioned JSON with per-fold and mean blocks.
  std::string to_json() const;
};

struct CvConfig {
  int n_folds = 5;
  std::uint64_t seed = 1;
  std::optional<imbalance::SmoteConfig> smote;
  double threshold = 0.5;
  MonetaryModel money;
  prep::Preprocessor::Options prep;
};

/// Trader ids assigned to folds (shuffled, round robin); returns the fold
/// index per row.
std::vector<int> trader_folds(const std::vector<std::int64_t>& trader_id, int n_folds, std::uint64_t seed);

/// For each fold: fit the preprocessing (and SMOTE) on the training traders
/// only, fit every classifier, score the held-out traders.
EvaluationReport cross_validate(const features::FeatureMatrix& data, const std::vector<NamedFactory>& classifiers,
                                const CvConfig& config);

/// curves.csv: classifier,curve_type,x,y
void write_curves_csv(const std::vector<std::pair<std::string, Curves>>& curves, const std::string& path);

}  // namespace dlrisk::eval
