#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "dlrisk/baselines.hpp"
#include "dlrisk/eval.hpp"
#include "dlrisk/imbalance.hpp"
#include "dlrisk/sda.hpp"

using namespace dlrisk;

namespace {

/// Uniform features; class 1 iff exactly one of the first two exceeds 0.5.
std::pair<Matrix, IntVector> xor_data(int n, int p, std::uint64_t seed) {
  Rng rng(seed);
  Matrix x(n, p);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = uniform01(rng);
  IntVector y(n);
  for (int i = 0; i < n; ++i) y(i) = (x(i, 0) > 0.5) != (x(i, 1) > 0.5);
  return {x, y};
}

/// Class 1 iff the first feature exceeds `cut`.
std::pair<Matrix, IntVector> threshold_data(int n, int p, double cut, std::uint64_t seed) {
  Rng rng(seed);
  Matrix x(n, p);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = uniform01(rng);
  IntVector y = (x.col(0).array() > cut).cast<int>();
  return {x, y};
}

double accuracy(const Vector& p, const IntVector& y) {
  return ((p.array() > 0.5).cast<int>() == y.array()).cast<double>().mean();
}

sda::HyperParams small_hp() {
  sda::HyperParams hp;
  hp.hidden = {12, 12};
  hp.pretrain_epochs = 2;
  hp.finetune_epochs = 15;
  hp.dropout = 0.0;
  return hp;
}

}  // namespace

// ---------------------------------------------------------------- dA

TEST(Corrupt, ZeroRateIsIdentity) {
  Rng rng(1);
  const Matrix x = Matrix::Random(10, 6);
  EXPECT_EQ(sda::corrupt(x, 0.0, rng), x);
}

TEST(Corrupt, FractionConcentrates) {
  Rng rng(2);
  const Matrix out = sda::corrupt(Matrix::Ones(1, 10000), 0.3, rng);
  EXPECT_NEAR((out.array() == 0.0).cast<double>().mean(), 0.3, 0.02);
}

TEST(Corrupt, CorruptedOneBecomesZero) {
  Rng rng(3);
  const Matrix out = sda::corrupt(Matrix::Ones(50, 4), 0.5, rng);
  EXPECT_TRUE(((out.array() == 0.0) || (out.array() == 1.0)).all());
  EXPECT_GT((out.array() == 0.0).count(), 0);
}

TEST(Dae, DuplicatedRowsGiveSameLoss) {
  Rng rng(4);
  const auto da = sda::DenoisingAutoencoder::make(5, 3, nn::Activation::Sigmoid, 0.2, rng);
  const Matrix x = (Matrix::Random(8, 5).array() + 1.0) / 2.0;
  Matrix twice(16, 5);
  twice << x, x;
  EXPECT_NEAR(da.reconstruction_error(twice), da.reconstruction_error(x), 1e-12);
}

TEST(Dae, NoiseBarelyBeatsMeanReconstruction) {
  Rng rng(5);
  Matrix train(2000, 20), test(500, 20);
  for (Eigen::Index i = 0; i < train.size(); ++i) train.data()[i] = uniform01(rng);
  for (Eigen::Index i = 0; i < test.size(); ++i) test.data()[i] = uniform01(rng);
  auto da = sda::DenoisingAutoencoder::make(20, 1, nn::Activation::Sigmoid, 0.1, rng,
                                            sda::ReconstructionLoss::Mse);
  nn::OptimizerState<double> opt;
  opt.learning_rate = 0.05;
  sda::train_da(train, da, opt, {20, 32}, rng);
  const RowVector mean = train.colwise().mean();
  const double baseline = (test.rowwise() - mean).squaredNorm() / test.rows();
  EXPECT_GT(da.reconstruction_error(test), 0.95 * baseline);
}

TEST(Dae, LossDecreasesOnStructuredData) {
  Rng rng(6);
  Matrix x(400, 8);
  for (int i = 0; i < 400; ++i) {
    const double a = uniform01(rng);
    for (int j = 0; j < 8; ++j) x(i, j) = j % 2 ? a : 1.0 - a;
  }
  auto da = sda::DenoisingAutoencoder::make(8, 2, nn::Activation::Sigmoid, 0.1, rng);
  nn::OptimizerState<double> opt;
  const auto curve = sda::train_da(x, da, opt, {15, 32}, rng);
  EXPECT_LT(curve.back(), curve.front());
}

TEST(Stack, SingleLayerMatchesTrainDa) {
  const auto [x, y] = xor_data(200, 6, 7);
  sda::PretrainConfig pc;
  pc.layers = {{4, 0.1, nn::Activation::Sigmoid}};
  pc.schedule = {3, 16};
  Rng a(8), b(8);
  const auto stack = sda::stack_pretrain(x, pc, a);
  auto da = sda::DenoisingAutoencoder::make(6, 4, nn::Activation::Sigmoid, 0.1, b);
  nn::OptimizerState<double> opt;
  opt.learning_rate = pc.learning_rate;
  opt.momentum = pc.momentum;
  sda::train_da(x, da, opt, pc.schedule, b);
  EXPECT_EQ(stack.layers[0].encoder.W, da.encoder.W);
  EXPECT_EQ(stack.layers[0].encoder.b, da.encoder.b);
}

TEST(Stack, SecondLayerTrainsOnFirstLayerCodes) {
  const auto [x, y] = xor_data(200, 6, 9);
  sda::PretrainConfig pc;
  pc.layers = {{5, 0.1, nn::Activation::Sigmoid}, {3, 0.2, nn::Activation::Sigmoid}};
  pc.schedule = {2, 16};
  Rng a(10), b(10);
  const auto stack = sda::stack_pretrain(x, pc, a);

  sda::PretrainConfig first = pc;
  first.layers.resize(1);
  const auto one = sda::stack_pretrain(x, first, b);
  const Matrix codes = one.layers[0].encode(x);
  auto da = sda::DenoisingAutoencoder::make(5, 3, nn::Activation::Sigmoid, 0.2, b);
  nn::OptimizerState<double> opt;
  sda::train_da(codes, da, opt, pc.schedule, b);
  EXPECT_EQ(stack.layers[1].encoder.W, da.encoder.W);
  EXPECT_TRUE(stack.encode(x).isApprox(da.encode(codes)));
}

TEST(Stack, PretrainingSpeedsUpFineTuning) {
  int wins = 0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto [x, y] = xor_data(1200, 10, 100 + seed);
    const auto [train, valid] = sda::holdout_split(y, nullptr, 0.25, seed);
    const Matrix xt = take_rows(x, train), xv = take_rows(x, valid);
    const IntVector yt = take(y, train), yv = take(y, valid);
    sda::HyperParams hp;
    hp.hidden = {24, 24, 24};
    hp.batch_norm = false;
    hp.dropout = 0.0;
    hp.finetune_epochs = 25;
    hp.patience = 25;
    sda::PretrainConfig pc;
    for (int h : hp.hidden) pc.layers.push_back({h, 0.1, nn::Activation::Sigmoid});
    pc.schedule = {5, 32};
    pc.learning_rate = hp.learning_rate;
    Rng r1(seed), r2(seed);
    const auto stack = sda::stack_pretrain(xt, pc, r1);
    const auto pre = sda::fine_tune(sda::build_classifier_network(stack, xt, hp, r1), xt, yt, xv, yv, hp, r1);
    const auto raw = sda::fine_tune(sda::build_classifier_network({}, xt, hp, r2), xt, yt, xv, yv, hp, r2);
    const double target = std::max(*std::min_element(pre.validation_loss.begin(), pre.validation_loss.end()),
                                   *std::min_element(raw.validation_loss.begin(), raw.validation_loss.end()));
    auto first = [&](const std::vector<double>& v) {
      return std::find_if(v.begin(), v.end(), [&](double l) { return l <= target; }) - v.begin();
    };
    wins += first(pre.validation_loss) < first(raw.validation_loss);
  }
  EXPECT_GE(wins, 4);
}

// ---------------------------------------------------------------- SdA classifier

TEST(SdaClassifierTest, SeparableDataFitsExactly) {
  auto [x0, y0] = threshold_data(500, 4, 0.5, 11);
  std::vector<int> keep;
  for (int i = 0; i < 500; ++i)
    if (std::abs(x0(i, 0) - 0.5) > 0.1) keep.push_back(i);
  const Matrix x = take_rows(x0, keep);
  const IntVector y = take(y0, keep);
  sda::HyperParams hp = small_hp();
  hp.finetune_epochs = 60;
  hp.patience = 60;
  hp.validation_fraction = 0.0;
  sda::SdaClassifier m(hp);
  m.fit(x, y, {1});
  EXPECT_GE(accuracy(m.predict_proba(x), y), 0.99);
}

TEST(SdaClassifierTest, ZeroHeadGivesHalf) {
  const auto [x, y] = xor_data(100, 4, 12);
  sda::SdaClassifier m(small_hp());
  m.fit(x, y, {2});
  auto net = m.network();
  net.blocks.back().dense.W.setZero();
  net.blocks.back().dense.b.setZero();
  EXPECT_TRUE(sda::predict_proba(net, x).isApproxToConstant(0.5));
}

TEST(SdaClassifierTest, DuplicateRowsAndBatchInvariance) {
  const auto [x, y] = xor_data(120, 4, 13);
  sda::SdaClassifier m(small_hp());
  m.fit(x, y, {3});
  const Vector all = m.predict_proba(x);
  Matrix dup(2, 4);
  dup << x.row(5), x.row(5);
  const Vector d = m.predict_proba(dup);
  EXPECT_EQ(d(0), d(1));
  EXPECT_EQ(d(0), all(5));
  EXPECT_LT((m.predict_proba(x.topRows(7)) - all.head(7)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(SdaClassifierTest, ProbabilitiesAreSoftmaxOfLogits) {
  const auto [x, y] = xor_data(80, 4, 14);
  sda::SdaClassifier m(small_hp());
  m.fit(x, y, {4});
  nn::Network<double> net = m.network();
  nn::Cache<double> cache;
  nn::ForwardOptions<double> opt;
  nn::forward(net, x, opt, &cache);
  const Matrix soft = nn::softmax_rows(cache.blocks.back().pre);
  EXPECT_LT((soft.col(1) - m.predict_proba(x)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(SdaClassifierTest, SaveLoadRoundTrip) {
  const auto [x, y] = xor_data(80, 4, 15);
  sda::SdaClassifier m(small_hp());
  m.fit(x, y, {5});
  const auto path = std::filesystem::temp_directory_path() / "dlrisk_sda.ckpt";
  m.save(path);
  const auto back = sda::SdaClassifier::load(path);
  EXPECT_EQ(back.predict_proba(x), m.predict_proba(x));
  EXPECT_EQ(back.hyper_params(), m.hyper_params());
}

TEST(HyperParamsTest, JsonRoundTripAndValidation) {
  sda::HyperParams hp;
  hp.hidden = {7, 9};
  hp.activation = nn::Activation::Relu;
  EXPECT_EQ(sda::HyperParams::from_json(hp.to_json()), hp);
  hp.corruption = 1.0;
  EXPECT_THROW(hp.validate(), InvalidArgument);
}

TEST(RandomSearch, BudgetOneReturnsTheSample) {
  const auto [x, y] = xor_data(200, 4, 16);
  sda::SearchSpace space;
  space.topologies = {{8, 8}};
  const auto r = sda::random_search(x, y, nullptr, space, small_hp(), 1, 3);
  ASSERT_EQ(r.trials.size(), 1u);
  EXPECT_EQ(r.best, r.trials[0].params);
}

TEST(RandomSearch, FixedSeedSameTrials) {
  const auto [x, y] = xor_data(150, 4, 17);
  sda::SearchSpace space;
  space.topologies = {{6}, {6, 6}};
  const auto a = sda::random_search(x, y, nullptr, space, small_hp(), 3, 21);
  const auto b = sda::random_search(x, y, nullptr, space, small_hp(), 3, 21);
  ASSERT_EQ(a.trials.size(), b.trials.size());
  for (std::size_t i = 0; i < a.trials.size(); ++i) {
    EXPECT_EQ(a.trials[i].params, b.trials[i].params);
    EXPECT_EQ(a.trials[i].validation_auc, b.trials[i].validation_auc);
  }
}

TEST(RandomSearch, BestOfManyBeatsMedianSingle) {
  const auto [x, y] = xor_data(300, 4, 18);
  sda::SearchSpace space;
  space.topologies = {{8, 8}};
  sda::HyperParams base = small_hp();
  base.finetune_epochs = 8;
  const auto many = sda::random_search(x, y, nullptr, space, base, 20, 5);
  std::vector<double> singles;
  for (const auto& t : many.trials) singles.push_back(t.validation_auc);
  std::vector<double> sorted = singles;
  std::sort(sorted.begin(), sorted.end());
  const double median = sorted[sorted.size() / 2];
  EXPECT_GE(many.trials[static_cast<std::size_t>(many.best_index)].validation_auc, median);
  EXPECT_EQ(*std::max_element(singles.begin(), singles.end()),
            many.trials[static_cast<std::size_t>(many.best_index)].validation_auc);
}

// ---------------------------------------------------------------- inspection

TEST(Histogram, IdenticalClassInputsGiveIdenticalHistograms) {
  const auto [x0, y0] = xor_data(60, 4, 19);
  sda::SdaClassifier m(small_hp());
  m.fit(x0, y0, {6});
  Matrix x(120, 4);
  x << x0, x0;
  IntVector y(120);
  y << IntVector::Zero(60), IntVector::Ones(60);
  for (const auto& h : sda::activation_histogram(m.network(), x, y, 0, 10)) {
    EXPECT_EQ(h.counts_hedge, h.counts_no_hedge);
    EXPECT_NEAR(h.js_divergence, 0.0, 1e-15);
  }
}

TEST(Histogram, CountsSumToClassSizesAndPlantedNeuronSeparates) {
  const auto [x, y] = threshold_data(600, 5, 0.7, 20);
  sda::HyperParams hp = small_hp();
  hp.finetune_epochs = 30;
  sda::SdaClassifier m(hp);
  m.fit(x, y, {7});
  const auto hist = sda::activation_histogram(m.network(), x, y, 0, 20);
  const long pos = y.sum();
  double best = 0.0;
  for (const auto& h : hist) {
    EXPECT_EQ(std::accumulate(h.counts_hedge.begin(), h.counts_hedge.end(), 0L), pos);
    EXPECT_EQ(std::accumulate(h.counts_no_hedge.begin(), h.counts_no_hedge.end(), 0L), y.size() - pos);
    best = std::max(best, h.js_divergence);
  }
  EXPECT_GT(best, 0.1);
}

TEST(Stimuli, AllRowsRankedWhenNIsDatasetSize) {
  const auto [x, y] = threshold_data(50, 4, 0.5, 21);
  sda::SdaClassifier m(small_hp());
  m.fit(x, y, {8});
  const auto r = sda::top_stimuli(m.network(), x, y, Vector::Ones(50), 50, 20);
  EXPECT_EQ(r.rows.size(), 50u);
  EXPECT_TRUE(std::is_sorted(r.activation.rbegin(), r.activation.rend()));
}

TEST(Stimuli, ConstantNeuronSkipped) {
  const auto [x, y] = threshold_data(80, 3, 0.5, 22);
  sda::SdaClassifier m(small_hp());
  m.fit(x, y, {9});
  auto net = m.network();
  net.blocks[0].dense.W.row(0).setZero();  // neuron 0 becomes constant
  net.blocks[0].dense.W.row(1) *= 50.0;
  const auto r = sda::top_stimuli(net, x, y, Vector::Ones(80), 10, 20);
  EXPECT_NE(r.neuron, 0);
}

TEST(Stimuli, PlantedNeuronTopRowsAreProfitable) {
  auto [x, y] = threshold_data(800, 5, 0.8, 23);
  Rng rng(24);
  std::normal_distribution<double> noise;
  Vector pnl(800);
  for (int i = 0; i < 800; ++i) pnl(i) = y(i) ? 5.0 + 3.0 * noise(rng) : -1.0 + 5.0 * noise(rng);
  sda::HyperParams hp = small_hp();
  hp.finetune_epochs = 30;
  sda::SdaClassifier m(hp);
  m.fit(x, y, {10});
  const auto r = sda::top_stimuli(m.network(), x, y, pnl, 100, 20);
  EXPECT_GT(r.profit_fraction, r.base_profit_rate);
}

// ---------------------------------------------------------------- baselines

TEST(Logit, PerfectThresholdSeparation) {
  Matrix x(20, 1);
  IntVector y(20);
  for (int i = 0; i < 20; ++i) {
    x(i, 0) = i / 19.0;
    y(i) = i >= 10;
  }
  baselines::LogisticRegression m({0.0, 2000, 1e-10});
  m.fit(x, y, {});
  EXPECT_EQ(accuracy(m.predict_proba(x), y), 1.0);
}

TEST(Logit, ZeroCoefficientsGiveHalf) {
  const auto m = baselines::LogisticRegression::from_json(R"({"kind":"logit","lambda":0.001,"max_iter":500,"tol":1e-7,
    "weights":[0,0,0],"intercept":0})");
  EXPECT_TRUE(m.predict_proba(Matrix::Random(4, 3)).isApproxToConstant(0.5));
}

TEST(Cart, DepthTwoSolvesXorDepthOneCannot) {
  Matrix x(4, 2);
  x << 0, 0, 0, 1, 1, 0, 1, 1;
  IntVector y(4);
  y << 0, 1, 1, 0;
  baselines::DecisionTree two({2, 2, 1, 0}), one({1, 2, 1, 0});
  two.fit(x, y, {});
  one.fit(x, y, {});
  EXPECT_EQ(accuracy(two.predict_proba(x), y), 1.0);
  EXPECT_LE(accuracy(one.predict_proba(x), y), 0.75);
}

TEST(Forest, SingleFullTreeWithoutBootstrapEqualsTree) {
  const auto [x, y] = xor_data(200, 5, 25);
  baselines::RandomForest f({1, 6, -1, false});
  baselines::DecisionTree t({6, 2, 1, 0});
  f.fit(x, y, {1});
  t.fit(x, y, {1});
  EXPECT_EQ(f.predict_proba(x), t.predict_proba(x));
}

TEST(Forest, ProbabilityIsMeanOfTrees) {
  const auto [x, y] = xor_data(150, 4, 26);
  baselines::RandomForest f({3, 4, 2, true});
  f.fit(x, y, {2});
  Vector manual = Vector::Zero(x.rows());
  for (const auto& t : f.trees())
    for (Eigen::Index i = 0; i < x.rows(); ++i) manual(i) += t.predict_row(x.row(i)) / 3.0;
  EXPECT_LT((f.predict_proba(x) - manual).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(AdaBoostTest, LearnsThreshold) {
  const auto [x, y] = threshold_data(300, 3, 0.4, 27);
  baselines::AdaBoost m({30});
  m.fit(x, y, {});
  EXPECT_GE(accuracy(m.predict_proba(x), y), 0.98);
}

TEST(Svm, LearnsThresholdAndCalibrates) {
  const auto [x, y] = threshold_data(400, 3, 0.5, 28);
  baselines::LinearSvm m({10.0, 40, 32});
  m.fit(x, y, {3});
  const Vector p = m.predict_proba(x);
  EXPECT_GE(accuracy(p, y), 0.95);
  EXPECT_LT(m.platt_a(), 0.0);
}

TEST(Registry, CheckpointRoundTripForEveryFamily) {
  const auto [x, y] = xor_data(160, 4, 29);
  for (const std::string family : {"logit", "cart", "forest", "adaboost", "svm", "ann"}) {
    auto m = baselines::default_factory(family).make();
    m->fit(x, y, {4});
    const auto path = std::filesystem::temp_directory_path() / ("dlrisk_" + family + ".ckpt");
    baselines::save_model(*m, path);
    const auto back = baselines::load_model(path);
    EXPECT_EQ(back->kind(), family);
    EXPECT_LT((back->predict_proba(x) - m->predict_proba(x)).cwiseAbs().maxCoeff(), 1e-12) << family;
  }
}

TEST(Registry, SchemaMismatchRejected) {
  const auto [x, y] = xor_data(50, 3, 30);
  baselines::LogisticRegression m;
  m.set_schema("abc");
  m.fit(x, y, {});
  EXPECT_NO_THROW(m.score(x, "abc"));
  EXPECT_THROW(m.score(x, "abd"), InvalidArgument);
}

// ---------------------------------------------------------------- SMOTE

TEST(Smote, BalancedInputUnchanged) {
  const auto [x, y] = xor_data(40, 3, 31);
  IntVector yb(40);
  for (int i = 0; i < 40; ++i) yb(i) = i % 2;
  const auto r = imbalance::smote(x, yb, {5, 1.0, 1});
  EXPECT_EQ(r.x, x);
  EXPECT_EQ(r.y, yb);
  EXPECT_EQ(r.synthetic_count(), 0);
}

TEST(Smote, TwoPointMinorityLiesOnSegment) {
  Matrix x(7, 2);
  x << 0, 0, 1, 1, 5, 3, 6, 2, 7, 4, 8, 1, 9, 9;
  IntVector y(7);
  y << 1, 1, 0, 0, 0, 0, 0;
  const auto r = imbalance::smote(x, y, {1, 1.0, 2});
  EXPECT_EQ((r.y.array() == 1).count(), 5);
  for (Eigen::Index i = 7; i < r.x.rows(); ++i) {
    EXPECT_DOUBLE_EQ(r.x(i, 0), r.x(i, 1));
    EXPECT_GE(r.x(i, 0), 0.0);
    EXPECT_LE(r.x(i, 0), 1.0);
  }
}

TEST(Smote, ExactBalanceAndBetweenness) {
  auto [x, y] = threshold_data(300, 4, 0.9, 32);
  const auto r = imbalance::smote(x, y, {5, 1.0, 3});
  EXPECT_EQ((r.y.array() == 1).count(), (r.y.array() == 0).count());
  for (Eigen::Index i = 0; i < r.x.rows(); ++i) {
    if (!r.synthetic[static_cast<std::size_t>(i)]) continue;
    const auto [a, b] = r.parents[static_cast<std::size_t>(i - x.rows())];
    const RowVector lo = x.row(a).cwiseMin(x.row(b)), hi = x.row(a).cwiseMax(x.row(b));
    EXPECT_TRUE((r.x.row(i).array() >= lo.array()).all() && (r.x.row(i).array() <= hi.array()).all());
  }
}

TEST(Smote, TooFewMinorityRowsRejected) {
  Matrix x = Matrix::Random(10, 2);
  IntVector y = IntVector::Zero(10);
  y(0) = y(1) = 1;
  EXPECT_THROW(imbalance::smote(x, y, {5, 1.0, 1}), InvalidArgument);
}
