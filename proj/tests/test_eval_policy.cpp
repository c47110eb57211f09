#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <numeric>
#include <set>

#include "dlrisk/baselines.hpp"
#include "dlrisk/eval.hpp"
#include "dlrisk/hedging.hpp"
#include "dlrisk/ifbsa.hpp"
#include "dlrisk/io.hpp"

using namespace dlrisk;

namespace {

double brute_auc(const Vector& s, const IntVector& y) {
  double num = 0.0;
  long pairs = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i)
    for (Eigen::Index j = 0; j < s.size(); ++j) {
      if (y(i) != 1 || y(j) != 0) continue;
      ++pairs;
      num += s(i) > s(j) ? 1.0 : (s(i) == s(j) ? 0.5 : 0.0);
    }
  return num / static_cast<double>(pairs);
}

std::vector<bool> bools(std::initializer_list<int> v) { return std::vector<bool>(v.begin(), v.end()); }

IntVector ints(std::initializer_list<int> v) {
  IntVector out(static_cast<Eigen::Index>(v.size()));
  std::copy(v.begin(), v.end(), out.data());
  return out;
}

/// Train/validation split with an informative column 0, a noise column 1
/// and `extra` further columns built by `fill`.
ifbsa::Split signal_split(std::uint64_t seed, int n = 600) {
  Rng rng(seed);
  auto make = [&](Matrix& x, IntVector& y) {
    x.resize(n, 2);
    y.resize(n);
    for (int i = 0; i < n; ++i) {
      x(i, 0) = uniform01(rng);
      x(i, 1) = uniform01(rng);
      y(i) = x(i, 0) + 0.3 * (uniform01(rng) - 0.5) > 0.5;
    }
  };
  ifbsa::Split s;
  make(s.x_train, s.y_train);
  make(s.x_valid, s.y_valid);
  return s;
}

features::FeatureSchema schema_of(int p) {
  features::FeatureSchema s;
  for (int j = 0; j < p; ++j) s.add("f" + std::to_string(j), features::FeatureGroup::Discipline);
  return s;
}

hedging::TradeContext context(double pnl, double margin, int history) {
  hedging::TradeContext c;
  c.history = history;
  c.trailing.count = history;
  c.trailing.sum_pnl = pnl;
  c.trailing.sum_margin = margin;
  c.cumulative_pnl = pnl;
  return c;
}

}  // namespace

// ---------------------------------------------------------------- metrics

TEST(Confusion, HandCounts) {
  const auto m = eval::confusion_metrics({3, 2, 4, 1});
  EXPECT_DOUBLE_EQ(m.sensitivity, 0.75);
  EXPECT_DOUBLE_EQ(m.specificity, 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(m.precision, 0.6);
  EXPECT_FALSE(m.degenerate);
}

TEST(Confusion, CountsFromDecisions) {
  const auto c = eval::confusion(bools({1, 1, 0, 0, 1}), ints({1, 0, 0, 1, 1}));
  EXPECT_EQ(c, (eval::ConfusionCounts{2, 1, 1, 1}));
}

TEST(Confusion, PerfectClassifierAllOnes) {
  const auto m = eval::confusion_metrics({5, 0, 7, 0});
  EXPECT_EQ(m.sensitivity, 1.0);
  EXPECT_EQ(m.specificity, 1.0);
  EXPECT_EQ(m.precision, 1.0);
  EXPECT_EQ(m.g_mean, 1.0);
  EXPECT_EQ(m.f_score, 1.0);
}

TEST(Confusion, GMeanIdentity) {
  Rng rng(1);
  for (int t = 0; t < 50; ++t) {
    std::uniform_int_distribution<long> d(1, 100);
    const auto m = eval::confusion_metrics({d(rng), d(rng), d(rng), d(rng)});
    EXPECT_NEAR(m.g_mean * m.g_mean, m.sensitivity * m.specificity, 1e-12);
  }
}

TEST(Auc, PerfectAndReversed) {
  const Vector s = (Vector(6) << 0.1, 0.2, 0.3, 0.7, 0.8, 0.9).finished();
  const IntVector y = ints({0, 0, 0, 1, 1, 1});
  EXPECT_EQ(eval::auc(s, y), 1.0);
  EXPECT_EQ(eval::auc(-s, y), 0.0);
}

TEST(Auc, RandomScoresNearHalf) {
  Rng rng(2);
  Vector s(20000);
  IntVector y(20000);
  for (int i = 0; i < 20000; ++i) {
    s(i) = uniform01(rng);
    y(i) = uniform01(rng) < 0.3;
  }
  EXPECT_NEAR(eval::auc(s, y), 0.5, 0.02);
}

TEST(Auc, EqualsBruteForceWithTies) {
  Rng rng(3);
  for (int t = 0; t < 50; ++t) {
    const int n = 5 + static_cast<int>(uniform01(rng) * 195);
    Vector s(n);
    IntVector y(n);
    for (int i = 0; i < n; ++i) {
      s(i) = std::floor(uniform01(rng) * 10) / 10;
      y(i) = i < 2 ? i : uniform01(rng) < 0.4;
    }
    EXPECT_EQ(eval::auc(s, y), brute_auc(s, y));
    const double a = eval::auc(s, y);
    EXPECT_NEAR(eval::auc(-s, y), 1.0 - a, 1e-12);
    EXPECT_NEAR(eval::trapezoid_area(eval::roc_pr_curves(s, y).roc), a, 1e-9);
  }
}

TEST(Curves, PerfectScoresPassThroughCorner) {
  const Vector s = (Vector(4) << 0.1, 0.4, 0.6, 0.9).finished();
  const auto roc = eval::roc_pr_curves(s, ints({0, 0, 1, 1})).roc;
  EXPECT_TRUE(std::any_of(roc.begin(), roc.end(), [](const auto& p) { return p.x == 0.0 && p.y == 1.0; }));
}

TEST(Pnl, HedgeEverythingAtZeroCost) {
  const Vector pnl = (Vector(3) << 10, -30, 4).finished();
  EXPECT_EQ(eval::pnl_per_trade(bools({1, 1, 1}), pnl), 0.0);
}

TEST(Pnl, HedgeNothingIsMinusTraderPnl) {
  const Vector pnl = (Vector(2) << 10, -30).finished();
  EXPECT_DOUBLE_EQ(eval::pnl_per_trade(bools({0, 0}), pnl), 10.0);
}

TEST(Pnl, OracleMaximisesOverAllDecisionVectors) {
  Rng rng(4);
  for (double cost : {0.0, 2.5}) {
    Vector pnl(10);
    for (int i = 0; i < 10; ++i) pnl(i) = 20.0 * (uniform01(rng) - 0.5);
    const eval::MonetaryModel money{cost};
    double best = -1e300;
    for (int mask = 0; mask < 1024; ++mask) {
      std::vector<bool> h(10);
      for (int i = 0; i < 10; ++i) h[i] = (mask >> i) & 1;
      best = std::max(best, eval::pnl_per_trade(h, pnl, money));
    }
    EXPECT_DOUBLE_EQ(eval::pnl_per_trade(hedging::oracle_decisions(pnl, money), pnl, money), best);
  }
}

TEST(Amc, PerfectClassifierIsZero) {
  const IntVector y = ints({1, 0, 0, 1});
  const Vector pnl = (Vector(4) << 5, -3, 2, 8).finished();
  const auto c = eval::confusion(bools({1, 0, 0, 1}), y);
  EXPECT_EQ(eval::amc(c, y, pnl), 0.0);
}

TEST(Amc, CostArithmetic) {
  // c_FN = 100 over two hedge rows, c_FP = 10 over ten no-hedge rows
  IntVector y = IntVector::Zero(12);
  y(0) = y(1) = 1;
  Vector pnl = Vector::Constant(12, -10.0);
  pnl(0) = pnl(1) = 100.0;
  std::vector<bool> h(12, false);
  h[0] = true;
  h[2] = true;
  EXPECT_DOUBLE_EQ(eval::amc(eval::confusion(h, y), y, pnl), 51.0);
}

TEST(Amc, SmallSetMatchesOracle) {
  const Vector pnl = (Vector(8) << 12, -3, 7, -20, 5, -1, 9, -4).finished();
  const IntVector y = ints({1, 0, 1, 0, 0, 0, 1, 0});
  const auto h = bools({1, 0, 0, 1, 0, 1, 1, 0});
  EXPECT_NEAR(eval::amc(eval::confusion(h, y), y, pnl), 5.751111111111111, 1e-12);
}

TEST(Folds, PartitionOfTraders) {
  std::vector<std::int64_t> ids;
  for (int t = 0; t < 23; ++t)
    for (int k = 0; k < 1 + t % 4; ++k) ids.push_back(100 + t);
  const auto fold = eval::trader_folds(ids, 5, 7);
  std::map<std::int64_t, std::set<int>> seen;
  for (std::size_t i = 0; i < ids.size(); ++i) seen[ids[i]].insert(fold[i]);
  EXPECT_EQ(seen.size(), 23u);
  for (const auto& [id, f] : seen) EXPECT_EQ(f.size(), 1u);
  std::set<int> used(fold.begin(), fold.end());
  EXPECT_EQ(used.size(), 5u);
}

TEST(CrossValidation, LeaveOneTraderOutRuns) {
  features::FeatureMatrix data;
  data.schema = schema_of(2);
  Rng rng(8);
  const int traders = 6, per = 10;
  data.x.resize(traders * per, 2);
  data.label.resize(traders * per);
  data.pnl.resize(traders * per);
  data.margin = Vector::Ones(traders * per);
  for (int i = 0; i < traders * per; ++i) {
    data.x(i, 0) = uniform01(rng);
    data.x(i, 1) = uniform01(rng);
    data.label(i) = data.x(i, 0) > 0.5 ? 1 : -1;
    data.pnl(i) = data.label(i);
    data.trader_id.push_back(i / per);
    data.trade_seq.push_back(i % per + 1);
  }
  eval::CvConfig cv;
  cv.n_folds = traders;
  const auto r = eval::cross_validate(data, {baselines::default_factory("logit")}, cv);
  EXPECT_EQ(r.classifiers[0].folds.size(), static_cast<std::size_t>(traders));
  EXPECT_TRUE(r.classifiers[0].oof_scores.allFinite());
  EXPECT_NE(r.to_json().find("\"schema_version\": 1"), std::string::npos);
}

// ---------------------------------------------------------------- IFBSA

TEST(Ifbsa, NoiseFeatureRatioNearOne) {
  double total = 0.0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed)
    total += ifbsa::loo_importance(baselines::default_factory("logit"), signal_split(seed), 1, seed);
  EXPECT_NEAR(total / 5.0, 1.0, 0.05);
}

TEST(Ifbsa, LabelFeatureRatioExplodes) {
  auto s = signal_split(9);
  s.x_train.col(1) = s.y_train.cast<double>();
  s.x_valid.col(1) = s.y_valid.cast<double>();
  EXPECT_GT(ifbsa::loo_importance(baselines::default_factory("logit"), s, 1, 9), 100.0);
}

TEST(Ifbsa, DuplicatedFeatureMasksItself) {
  auto s = signal_split(10);
  s.x_train.conservativeResize(Eigen::NoChange, 3);
  s.x_valid.conservativeResize(Eigen::NoChange, 3);
  s.x_train.col(2) = s.x_train.col(0);
  s.x_valid.col(2) = s.x_valid.col(0);
  const auto f = baselines::default_factory("logit");
  EXPECT_NEAR(ifbsa::loo_importance(f, s, 0, 10), 1.0, 0.1);
  EXPECT_NEAR(ifbsa::loo_importance(f, s, 2, 10), 1.0, 0.1);
}

TEST(Ifbsa, ErrorRatioUsesFloor) {
  EXPECT_DOUBLE_EQ(ifbsa::error_ratio(0.8, 0.9), 2.0);
  EXPECT_DOUBLE_EQ(ifbsa::error_ratio(0.9, 1.0), 0.1 / ifbsa::kErrorFloor);
}

TEST(Ifbsa, NormalizeClipsBelowOneAndSumsToOne) {
  const Vector v = ifbsa::normalize_importance((Vector(4) << 0.9, 1.5, 1.0, 2.0).finished());
  EXPECT_NEAR(v.sum(), 1.0, 1e-15);
  EXPECT_EQ(v(0), 0.0);
  EXPECT_NEAR(v(3), 2.0 / 3.0, 1e-15);
  EXPECT_TRUE(ifbsa::normalize_importance(Vector::Constant(4, 0.7)).isApproxToConstant(0.25));
}

TEST(Ifbsa, FusionArithmetic) {
  ifbsa::ImportanceTable t;
  t.classifiers = {"a", "b"};
  t.auc = (Vector(2) << 0.8, 0.7).finished();
  t.normalized.resize(2, 2);
  t.normalized << 0.5, 0.5, 0.25, 0.75;
  t.groups = {features::FeatureGroup::Disposition, features::FeatureGroup::Discipline};
  ifbsa::fuse(t);
  EXPECT_NEAR(t.omega(0), 0.6, 1e-15);
  EXPECT_NEAR(t.fused(0), 0.4, 1e-15);
  EXPECT_NEAR(t.fused.sum(), 1.0, 1e-12);
}

TEST(Ifbsa, IdenticalClassifiersFuseToEitherRow) {
  ifbsa::ImportanceTable t;
  t.classifiers = {"a", "b"};
  t.auc = (Vector(2) << 0.75, 0.75).finished();
  t.normalized.resize(2, 3);
  t.normalized << 0.2, 0.3, 0.5, 0.2, 0.3, 0.5;
  t.groups.assign(3, features::FeatureGroup::Discipline);
  ifbsa::fuse(t);
  EXPECT_TRUE(t.fused.isApprox(t.normalized.row(0).transpose()));
}

TEST(Ifbsa, ChanceClassifierContributesNothing) {
  ifbsa::ImportanceTable t;
  t.classifiers = {"a", "b"};
  t.auc = (Vector(2) << 0.5, 0.9).finished();
  t.normalized.resize(2, 2);
  t.normalized << 1.0, 0.0, 0.3, 0.7;
  t.groups.assign(2, features::FeatureGroup::Discipline);
  ifbsa::fuse(t);
  EXPECT_EQ(t.omega(0), 0.0);
  EXPECT_TRUE(t.fused.isApprox(t.normalized.row(1).transpose()));
}

TEST(Ifbsa, AllChanceRejected) {
  ifbsa::ImportanceTable t;
  t.classifiers = {"a"};
  t.auc = (Vector(1) << 0.4).finished();
  t.normalized = Matrix::Constant(1, 2, 0.5);
  t.groups.assign(2, features::FeatureGroup::Discipline);
  EXPECT_THROW(ifbsa::fuse(t), NumericError);
}

TEST(Ifbsa, GroupTotals) {
  using G = features::FeatureGroup;
  EXPECT_NEAR(ifbsa::group_importance(Vector::Constant(3, 1.0 / 3), {G::Disposition, G::Disposition, G::Disposition})[3],
              1.0, 1e-15);
  std::vector<G> groups;
  for (int i = 0; i < 10; ++i) groups.push_back(i < 2 ? G::Demographics : (i < 5 ? G::MarketChannel : G::Discipline));
  const auto totals = ifbsa::group_importance(Vector::Constant(10, 0.1), groups);
  EXPECT_NEAR(totals[0], 0.2, 1e-15);
  EXPECT_NEAR(totals[2], 0.3, 1e-15);
  EXPECT_NEAR(totals[4], 0.5, 1e-15);
}

TEST(Ifbsa, AnalyzeProducesConvexWeights) {
  const auto split = signal_split(11, 300);
  const auto t = ifbsa::analyze(split, schema_of(2),
                                {baselines::default_factory("logit"), baselines::default_factory("cart")}, 11);
  EXPECT_NEAR(t.fused.sum(), 1.0, 1e-12);
  EXPECT_TRUE((t.fused.array() >= 0.0).all() && (t.fused.array() <= 1.0).all());
  EXPECT_GT(t.fused(0), t.fused(1));
}

// ---------------------------------------------------------------- hedging

TEST(Hedging, StxThreshold) {
  EXPECT_TRUE(hedging::stx_policy(context(6.0, 100.0, 20)));
  EXPECT_FALSE(hedging::stx_policy(context(5.0, 100.0, 20)));
  EXPECT_FALSE(hedging::stx_policy(context(0.0, 0.0, 0)));
}

TEST(Hedging, StxFlipsAfterOneLargeWin) {
  std::vector<synth::TradeRecord> trades;
  const auto t0 = io::make_timestamp(2024, 3, 1, 9);
  for (int i = 0; i < 12; ++i) {
    synth::TradeRecord t;
    t.trader_id = 4;
    t.trade_seq = i + 1;
    t.open_time = t0 + i * 3600;
    t.close_time = t.open_time + 600;
    t.stake = 1.0;
    t.margin = 10.0;
    t.pnl = i == 10 ? 50.0 : -0.1;
    trades.push_back(t);
  }
  const auto ctx = hedging::trade_contexts(trades, {4, 4}, {11, 12});
  EXPECT_FALSE(hedging::stx_policy(ctx[0]));
  EXPECT_TRUE(hedging::stx_policy(ctx[1]));
  EXPECT_EQ(ctx[1].history, 11);
}

TEST(Hedging, StrictInequalitiesAtPopulationMeans) {
  hedging::PopulationStats s{0.4, 10.0, 3.0, 60.0};
  hedging::TradeContext c = context(1.0, 10.0, 20);
  c.trailing.sharpe = 0.4;
  c.trailing.sharpe_defined = true;
  c.trailing.mean_stake = 10.0;
  c.trailing.trade_frequency = 3.0;
  c.trailing.mean_duration_minutes = 60.0;
  EXPECT_FALSE(hedging::custom1_policy(c, s));
  EXPECT_FALSE(hedging::custom2_policy(c, s, hedging::Combine::And));
  EXPECT_FALSE(hedging::custom2_policy(c, s, hedging::Combine::Or));
  c.trailing.mean_stake = 11.0;
  EXPECT_TRUE(hedging::custom2_policy(c, s, hedging::Combine::Or));
  EXPECT_FALSE(hedging::custom2_policy(c, s, hedging::Combine::And));
}

TEST(Hedging, Custom3PositiveTrackRecord) {
  EXPECT_TRUE(hedging::custom3_policy(context(1.0, 10.0, 5)));
  EXPECT_FALSE(hedging::custom3_policy(context(0.0, 10.0, 5)));
}

TEST(Hedging, EnsembleIsMajority) {
  for (int m = 0; m < 8; ++m) {
    const bool a = m & 1, b = m & 2, c = m & 4;
    EXPECT_EQ(hedging::ensemble_policy(a, b, c), a + b + c >= 2);
  }
}

TEST(Hedging, Ctree2RecoversThresholdSplit) {
  Rng rng(12);
  Matrix x(400, 3);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = uniform01(rng);
  const IntVector y = (x.col(2).array() > 0.3).cast<int>();
  hedging::Ctree2Policy p;
  p.fit(x, y, schema_of(3), 1);
  const auto& root = p.tree().nodes()[0];
  EXPECT_EQ(root.feature, 2);
  EXPECT_NEAR(root.threshold, 0.3, 0.01);
  long internal = 0;
  for (const auto& n : p.tree().nodes()) internal += n.feature >= 0;
  EXPECT_LE(internal, 3);
  EXPECT_LE(p.tree().depth(), 2);
  ASSERT_FALSE(p.split_features().empty());
  EXPECT_EQ(p.split_features()[0], "f2");
}

TEST(Hedging, OracleRanksFirstAndAllHedgeIsZero) {
  Rng rng(13);
  Vector pnl(200);
  for (int i = 0; i < 200; ++i) pnl(i) = 30.0 * (uniform01(rng) - 0.45);
  std::vector<bool> random(200);
  for (int i = 0; i < 200; ++i) random[i] = uniform01(rng) < 0.3;
  const auto r = hedging::compare_policies({{"no_hedge", std::vector<bool>(200, false)},
                                            {"all", std::vector<bool>(200, true)},
                                            {"random", random},
                                            {"oracle", hedging::oracle_decisions(pnl)}},
                                           pnl);
  EXPECT_EQ(r.front().policy, "oracle");
  for (const auto& p : r)
    if (p.policy == "all") EXPECT_EQ(p.mean_pnl, 0.0);
  for (std::size_t i = 1; i < r.size(); ++i) EXPECT_GE(r[i - 1].mean_pnl, r[i].mean_pnl);
}
