// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// non-zero when any fails. Pass criterion numbers as arguments to run a
// subset.

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "dlrisk/baselines.hpp"
#include "dlrisk/eval.hpp"
#include "dlrisk/features.hpp"
#include "dlrisk/hedging.hpp"
#include "dlrisk/ifbsa.hpp"
#include "dlrisk/imbalance.hpp"
#include "dlrisk/nn.hpp"
#include "dlrisk/pipeline.hpp"
#include "dlrisk/sda.hpp"
#include "dlrisk/synthgen.hpp"

using namespace dlrisk;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(double v, int digits = 4) {
  std::ostringstream s;
  s.setf(std::ios::fixed);
  s.precision(digits);
  s << v;
  return s.str();
}

fs::path scratch_dir(const std::string& name) {
  const fs::path p = fs::current_path() / "acceptance_runs" / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

Matrix uniform_matrix(Eigen::Index r, Eigen::Index c, Rng& rng) {
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = uniform01(rng);
  return m;
}

Matrix normal_matrix(Eigen::Index r, Eigen::Index c, Rng& rng) {
  std::normal_distribution<double> n;
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

// ---------------------------------------------------------------- 1

nn::Network<double> random_network(const std::vector<int>& sizes, nn::Activation hidden, nn::Activation out,
                                   bool bn, double dropout, Rng& rng) {
  nn::Network<double> net;
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    const bool last = l + 2 == sizes.size();
    nn::Block<double> b;
    b.dense = nn::make_dense<double>(sizes[l], sizes[l + 1], last ? out : hidden, rng);
    b.dense.b = 0.2 * (uniform_matrix(sizes[l + 1], 1, rng).array() - 0.5).matrix();
    if (bn && !last) {
      nn::BatchNormLayer<double> n;
      n.gamma = (Vector::Ones(sizes[l + 1]).array() + 0.2 * (uniform_matrix(sizes[l + 1], 1, rng).array() - 0.5)).matrix();
      n.beta = 0.2 * (uniform_matrix(sizes[l + 1], 1, rng).array() - 0.5).matrix();
      n.running_mean = Vector::Zero(sizes[l + 1]);
      n.running_var = Vector::Ones(sizes[l + 1]);
      n.initialised = true;
      b.bn = n;
    }
    if (!last) b.dropout = dropout;
    net.blocks.push_back(b);
  }
  return net;
}

Outcome gradient_check() {
  const auto t0 = Clock::now();
  Rng rng(101);
  std::uniform_int_distribution<int> width(2, 7), depth(1, 3);
  const std::vector<nn::LossKind> losses = {nn::LossKind::NllSoftmax, nn::LossKind::CrossEntropy, nn::LossKind::Mse};
  const std::vector<nn::Activation> hidden = {nn::Activation::Sigmoid, nn::Activation::Relu};
  int nets = 0;
  double worst = 0.0;
  std::string where;
  for (auto loss : losses)
    for (auto act : hidden)
      for (bool bn : {false, true})
        for (double dropout : {0.0, 0.3}) {
          const int inputs = width(rng);
          std::vector<int> sizes = {inputs};
          for (int d = depth(rng); d > 0; --d) sizes.push_back(width(rng));
          const Eigen::Index rows = 6 + nets % 5;
          const Matrix x = normal_matrix(rows, inputs, rng);
          nn::Target<double> target;
          nn::Activation out = nn::Activation::Softmax;
          if (loss == nn::LossKind::NllSoftmax) {
            sizes.push_back(2);
            IntVector y(rows);
            for (Eigen::Index i = 0; i < rows; ++i) y(i) = static_cast<int>(i % 2);
            target = y;
          } else {
            sizes.push_back(inputs);
            out = loss == nn::LossKind::CrossEntropy ? nn::Activation::Sigmoid : nn::Activation::Linear;
            target = Matrix(uniform_matrix(rows, inputs, rng));
          }
          auto net = random_network(sizes, act, out, bn, dropout, rng);
          const auto r = nn::gradient_check(net, x, target, loss, 0.01, nn::Mode::Train, rng);
          ++nets;
          if (r.max_relative_error >= worst) {
            worst = r.max_relative_error;
            where = "net " + std::to_string(nets) + " " + r.worst_parameter;
          }
        }
  const double sec = seconds_since(t0);
  return {nets >= 20 && worst < 1e-4 && sec < 60.0,
          std::to_string(nets) + " nets, max relative error " + fmt(worst * 1e6, 3) + "e-6 (" + where + "), " +
              fmt(sec, 1) + " s"};
}

// ---------------------------------------------------------------- 2

Outcome pca_equivalence() {
  Rng rng(202);
  const int n = 200, d = 10, k = 3;
  const Matrix basis = normal_matrix(k, d, rng);
  RowVector offset = uniform_matrix(1, d, rng);
  auto sample = [&](int rows) {
    Matrix z = normal_matrix(rows, k, rng);
    z.col(1) *= 0.7;
    z.col(2) *= 0.5;
    Matrix x = z * basis + 0.1 * normal_matrix(rows, d, rng);
    return Matrix(x.rowwise() + offset);
  };
  const Matrix train = sample(n);
  const Matrix test = sample(n);

  const RowVector mean = train.colwise().mean();
  const Matrix centred = train.rowwise() - mean;
  Eigen::SelfAdjointEigenSolver<Matrix> eig(centred.transpose() * centred);
  const Matrix top = eig.eigenvectors().rightCols(k);
  const Matrix test_centred = test.rowwise() - mean;
  const double pca_error = (test_centred - test_centred * top * top.transpose()).squaredNorm() / test.rows();

  auto da = sda::DenoisingAutoencoder::make(d, k, nn::Activation::Linear, 0.0, rng, sda::ReconstructionLoss::Mse);
  da.tied = true;
  nn::OptimizerState<double> opt;
  opt.learning_rate = 0.001;
  opt.momentum = 0.9;
  sda::train_da(train, da, opt, {1000, 20}, rng);
  const double da_error = da.reconstruction_error(test);
  const double gap = da_error / pca_error - 1.0;
  return {std::abs(gap) <= 0.02, "held-out error dA " + fmt(da_error) + " vs PCA " + fmt(pca_error) + " (" +
                                      fmt(100.0 * gap, 2) + "%)"};
}

// ---------------------------------------------------------------- 3

Outcome dropout_expectation() {
  Rng rng(303);
  nn::Network<double> net;
  nn::Block<double> b;
  b.dense = nn::make_dense<double>(6, 5, nn::Activation::Linear, rng);
  b.dense.b = Vector::Constant(5, 0.25);
  b.dropout = 0.3;
  net.blocks.push_back(b);
  const Matrix x = uniform_matrix(4, 6, rng);
  const Matrix expected = nn::predict(net, x);
  nn::ForwardOptions<double> opt;
  opt.mode = nn::Mode::Train;
  opt.rng = &rng;
  const int draws = 20000;
  Matrix sum = Matrix::Zero(expected.rows(), expected.cols());
  for (int i = 0; i < draws; ++i) sum += nn::forward(net, x, opt);
  const double rel = (sum / draws - expected).norm() / expected.norm();
  return {rel <= 0.01, std::to_string(draws) + " train-mode passes, relative deviation " + fmt(100.0 * rel, 3) + "%"};
}

// ---------------------------------------------------------------- 4

Outcome auc_oracle() {
  Rng rng(404);
  std::uniform_int_distribution<int> size(2, 200);
  double worst = 0.0;
  for (int s = 0; s < 50; ++s) {
    const int n = size(rng);
    Vector score(n);
    IntVector y(n);
    for (int i = 0; i < n; ++i) {
      score(i) = std::round(uniform01(rng) * (s % 2 ? 10.0 : 1e6));
      y(i) = uniform01(rng) < 0.3 ? 1 : 0;
    }
    y(0) = 1;
    y(1) = 0;
    double wins = 0.0;
    long pairs = 0;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        if (y(i) == 1 && y(j) == 0) {
          ++pairs;
          wins += score(i) > score(j) ? 1.0 : score(i) == score(j) ? 0.5 : 0.0;
        }
    worst = std::max(worst, std::abs(eval::auc(score, y) - wins / pairs));
  }
  return {worst <= 1e-12, "50 sets, max |AUC - brute force| = " + fmt(worst * 1e15, 2) + "e-15"};
}

// ---------------------------------------------------------------- 5

// Records what the cross-validation harness hands to a model.
struct SpyLog {
  long scored = 0;
  bool balanced = true;
};

class Spy : public Classifier {
 public:
  explicit Spy(SpyLog* log) : log_(log) {}
  std::string kind() const override { return "spy"; }
  void fit(const Matrix& x, const IntVector& y, const FitContext&) override {
    check_fit_input(x, y);
    const auto pos = (y.array() == 1).count();
    if (pos != y.size() - pos) log_->balanced = false;
  }
  Vector predict_proba(const Matrix& x) const override {
    log_->scored += x.rows();
    return x.col(0);
  }
  std::string to_json() const override { return "{}"; }

 private:
  SpyLog* log_;
};

features::FeatureMatrix dataset(int n_traders, std::uint64_t seed, int examples_per_trader = 10,
                                double prevalence = synth::GeneratorConfig{}.target_a_prevalence) {
  synth::GeneratorConfig g;
  g.n_traders = n_traders;
  g.seed = seed;
  g.target_a_prevalence = prevalence;
  const auto pop = synth::generate_population(g);
  features::FeatureConfig fc;
  fc.examples_per_trader = examples_per_trader;
  return features::build_dataset(pop.trades, pop.profiles, fc);
}

Outcome smote_invariants() {
  Rng rng(505);
  const Matrix x = uniform_matrix(300, 6, rng);
  IntVector y = IntVector::Zero(300);
  for (int i = 0; i < 300; i += 12) y(i) = 1;
  long worst_balance = 0;
  double worst_between = 0.0;
  for (double ratio : {1.0, 0.5}) {
    const auto s = imbalance::smote(x, y, imbalance::SmoteConfig{5, ratio, 9});
    const long majority = (s.y.array() == 0).count();
    const long minority = (s.y.array() == 1).count();
    worst_balance = std::max(worst_balance, std::abs(minority - std::lround(ratio * majority)));
    for (std::size_t k = 0; k < s.parents.size(); ++k) {
      const RowVector a = x.row(s.parents[k].first), b = x.row(s.parents[k].second);
      const RowVector r = s.x.row(x.rows() + static_cast<Eigen::Index>(k));
      const double u = (r - a).dot(b - a) / std::max((b - a).squaredNorm(), 1e-300);
      const double off = (r - (a + u * (b - a))).norm();
      const double outside = std::max({0.0, -u, u - 1.0});
      worst_between = std::max({worst_between, off, outside});
    }
  }

  const auto data = dataset(400, 5);
  SpyLog log;
  eval::CvConfig cv;
  cv.n_folds = 5;
  cv.seed = 5;
  cv.smote = imbalance::SmoteConfig{5, 1.0, 5};
  const auto report = eval::cross_validate(data, {{"spy", [&] { return std::make_unique<Spy>(&log); }}}, cv);
  long synthetic_test = 0, synthetic_train = 0;
  for (const auto& f : report.classifiers[0].folds) {
    synthetic_test += f.synthetic_test_rows;
    synthetic_train += f.synthetic_train_rows;
  }
  const bool pass = worst_balance == 0 && worst_between <= 1e-12 && log.balanced && synthetic_train > 0 &&
                    synthetic_test == 0 && log.scored == data.rows();
  return {pass, "balance off by " + std::to_string(worst_balance) + ", max off-segment " + fmt(worst_between * 1e15, 2) +
                    "e-15; 5-fold run: " + std::to_string(synthetic_train) + " synthetic training rows, " +
                    std::to_string(log.scored) + " rows scored of " + std::to_string(data.rows()) + ", " +
                    std::to_string(synthetic_test) + " synthetic validation rows"};
}

// ---------------------------------------------------------------- 6

Outcome monetary_oracles() {
  Rng rng(606);
  std::normal_distribution<double> n(0.0, 10.0);
  double worst_oracle = 0.0, worst_all = 0.0;
  for (int set = 0; set < 20; ++set) {
    Vector pnl(10);
    for (int i = 0; i < 10; ++i) pnl(i) = n(rng);
    for (double cost : {0.0, 2.5}) {
      const eval::MonetaryModel money{cost};
      double best = -1e300;
      for (int mask = 0; mask < 1024; ++mask) {
        std::vector<bool> h(10);
        for (int i = 0; i < 10; ++i) h[i] = (mask >> i) & 1;
        best = std::max(best, eval::pnl_per_trade(h, pnl, money));
      }
      worst_oracle =
          std::max(worst_oracle, std::abs(eval::pnl_per_trade(hedging::oracle_decisions(pnl, money), pnl, money) - best));
    }
    worst_all = std::max(worst_all, std::abs(eval::pnl_per_trade(std::vector<bool>(10, true), pnl)));
  }
  IntVector y(6);
  y << 1, 0, 0, 1, 0, 0;
  Vector pnl(6);
  pnl << 40, -5, 3, 12, -20, 1;
  std::vector<bool> perfect(6);
  for (int i = 0; i < 6; ++i) perfect[i] = y(i) == 1;
  const double amc = eval::amc(eval::confusion(perfect, y), y, pnl);
  return {worst_oracle <= 1e-12 && worst_all == 0.0 && amc == 0.0,
          "oracle vs 2^10 search max gap " + fmt(worst_oracle, 15) + ", all-hedge P&L " + fmt(worst_all, 1) +
              ", AMC(perfect) " + fmt(amc, 1)};
}

// ---------------------------------------------------------------- 7

Outcome sda_beats_logit() {
  const auto t0 = Clock::now();
  int wins = 0;
  std::string per_seed;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto data = dataset(2000, seed);
    eval::CvConfig cv;
    cv.seed = seed;
    const std::vector<NamedFactory> models = {
        {"logit", [] { return std::make_unique<baselines::LogisticRegression>(baselines::LogitParams{0.0}); }},
        {"sda", [] { return std::make_unique<sda::SdaClassifier>(); }}};
    const auto r = eval::cross_validate(data, models, cv);
    const double logit = r.at("logit").mean.auc, deep = r.at("sda").mean.auc;
    if (deep - logit >= 0.05 && deep > 0.70) ++wins;
    per_seed += (seed > 1 ? "; " : "") + std::string("seed ") + std::to_string(seed) + " " + fmt(deep, 3) + " vs " +
                fmt(logit, 3);
  }
  const double sec = seconds_since(t0);
  return {wins >= 4 && sec < 900.0, std::to_string(wins) + "/5 seeds (SdA vs logit AUC: " + per_seed + "), " +
                                        fmt(sec / 60.0, 1) + " min"};
}

// ---------------------------------------------------------------- 8

Outcome smote_raises_sensitivity() {
  const std::vector<std::string> families = {"logit", "cart", "forest", "adaboost", "svm", "ann", "sda"};
  std::vector<NamedFactory> models;
  for (const auto& f : families) models.push_back(baselines::default_factory(f));
  std::map<std::string, int> higher;
  double max_prevalence = 0.0;
  std::string worst;
  double worst_gain = 1e300;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    // Row prevalence scatters about 1pp around the target at this size, so
    // aim below 7% rather than at the default.
    const auto data = dataset(1000, seed, 6, 0.05);
    max_prevalence = std::max(max_prevalence, (data.label.array() == 1).cast<double>().mean());
    eval::CvConfig plain;
    plain.seed = seed;
    eval::CvConfig with = plain;
    with.smote = imbalance::SmoteConfig{5, 1.0, seed};
    const auto a = eval::cross_validate(data, models, plain);
    const auto b = eval::cross_validate(data, models, with);
    for (const auto& f : families) {
      const double gain = b.at(f).mean.metrics.sensitivity - a.at(f).mean.metrics.sensitivity;
      if (gain > 0.0) ++higher[f];
      if (gain < worst_gain) {
        worst_gain = gain;
        worst = f + " seed " + std::to_string(seed);
      }
    }
  }
  bool all = true;
  for (const auto& f : families) all = all && higher[f] == 5;
  return {all && max_prevalence <= 0.07, "prevalence <= " + fmt(100.0 * max_prevalence, 2) +
                                             "%, sensitivity higher with SMOTE for every classifier on " +
                                             (all ? "all" : "not all") + " 5 seeds (smallest gain " +
                                             fmt(worst_gain, 3) + ", " + worst + ")"};
}

// ---------------------------------------------------------------- 9

std::map<std::string, double> read_policies(const fs::path& csv) {
  std::ifstream in(csv);
  std::string line;
  std::getline(in, line);
  std::map<std::string, double> out;
  while (std::getline(in, line)) {
    std::istringstream row(line);
    std::string name, pnl;
    std::getline(row, name, ',');
    std::getline(row, pnl, ',');
    out[name] = std::stod(pnl);
  }
  return out;
}

Outcome policy_ordering() {
  int model_wins = 0;
  bool oracle_dominates = true, no_hedge_reported = true;
  std::string per_seed;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    pipeline::RunConfig c;
    c.seed = seed;
    c.generator.seed = seed;
    c.out = scratch_dir("hedge_" + std::to_string(seed));
    c.hedge_model = "sda";
    pipeline::run_generate(c);
    pipeline::run_featurize(c);
    pipeline::run_hedge(c);
    const auto p = read_policies(c.out / "policies.csv");
    if (p.at("model") >= p.at("stx")) ++model_wins;
    oracle_dominates = oracle_dominates && p.at("oracle") > p.at("model") && p.at("oracle") > p.at("stx");
    no_hedge_reported = no_hedge_reported && p.count("no_hedge") == 1;
    per_seed += (seed > 1 ? "; " : "") + std::string("seed ") + std::to_string(seed) + " dnn " + fmt(p.at("model"), 1) +
                " stx " + fmt(p.at("stx"), 1) + " oracle " + fmt(p.at("oracle"), 1) + " none " +
                fmt(p.at("no_hedge"), 1);
  }
  return {model_wins >= 4 && oracle_dominates && no_hedge_reported,
          std::to_string(model_wins) + "/5 seeds DNN >= STX, oracle dominates: " + (oracle_dominates ? "yes" : "no") +
              " (GBP per trade: " + per_seed + ")"};
}

// ---------------------------------------------------------------- 10

Outcome planted_importance() {
  const std::vector<NamedFactory> models = {baselines::default_factory("logit"), baselines::default_factory("cart")};
  int top = 0;
  double worst_sum = 0.0;
  bool convex = true;
  std::string per_seed;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto data = dataset(500, seed);
    auto split = ifbsa::make_split(data, 0.3, seed);
    // Relabel from two disposition columns only.
    const int a = data.schema.index_of("LogDurationGap20"), b = data.schema.index_of("AmountRate20");
    Rng rng(derive_seed(seed, "planted"));
    std::normal_distribution<double> noise(0.0, 0.02);
    auto signal = [&](const Matrix& x) {
      Vector s(x.rows());
      for (Eigen::Index i = 0; i < x.rows(); ++i) s(i) = x(i, a) - x(i, b) + noise(rng);
      return s;
    };
    const Vector s_train = signal(split.x_train), s_valid = signal(split.x_valid);
    std::vector<double> sorted(s_train.data(), s_train.data() + s_train.size());
    std::nth_element(sorted.begin(), sorted.begin() + sorted.size() * 7 / 10, sorted.end());
    const double cut = sorted[sorted.size() * 7 / 10];
    split.y_train = (s_train.array() > cut).cast<int>();
    split.y_valid = (s_valid.array() > cut).cast<int>();

    const auto table = ifbsa::analyze(split, data.schema, models, seed);
    worst_sum = std::max(worst_sum, std::abs(table.fused.sum() - 1.0));
    convex = convex && (table.fused.array() >= 0.0).all() && (table.fused.array() <= 1.0).all() &&
             (table.omega.array() >= 0.0).all() && std::abs(table.omega.sum() - 1.0) <= 1e-12;
    const auto& g = table.group_totals;
    const auto best = static_cast<int>(std::max_element(g.begin(), g.end()) - g.begin());
    if (best == static_cast<int>(features::FeatureGroup::Disposition)) ++top;
    per_seed += (seed > 1 ? "; " : "") + std::string("seed ") + std::to_string(seed) + " " +
                features::to_string(static_cast<features::FeatureGroup>(best)) + " " + fmt(g[best], 3);
  }
  return {top >= 4 && worst_sum <= 1e-12 && convex,
          "disposition ranked first on " + std::to_string(top) + "/5 seeds (" + per_seed + "), max |sum - 1| " +
              fmt(worst_sum * 1e15, 2) + "e-15, convex bounds " + (convex ? "hold" : "violated")};
}

// ---------------------------------------------------------------- 11

std::string run_small_pipeline(const fs::path& out) {
  auto c = pipeline::RunConfig::load(fs::path(DLRISK_SOURCE_DIR) / "configs" / "small.json");
  c.out = out;
  fs::remove_all(out);
  for (const auto& stage : pipeline::stage_names()) pipeline::run_stage(stage, c);
  std::ifstream in(out / "report.json", std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

Outcome report_determinism() {
  // Same output path both times: the report embeds the config, path included.
  const fs::path out = scratch_dir("determinism");
  const std::string first = run_small_pipeline(out);
  const std::string second = run_small_pipeline(out);
  return {!first.empty() && first == second,
          "report.json " + std::to_string(first.size()) + " bytes, identical across two runs: " +
              (first == second ? "yes" : "no")};
}

struct Criterion {
  int id;
  std::string name;
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> criteria = {
      {1, "gradient check", gradient_check},
      {2, "linear dA matches PCA", pca_equivalence},
      {3, "dropout expectation", dropout_expectation},
      {4, "AUC vs brute force", auc_oracle},
      {5, "SMOTE invariants", smote_invariants},
      {6, "monetary oracles", monetary_oracles},
      {7, "SdA beats linear logit", sda_beats_logit},
      {8, "SMOTE raises sensitivity", smote_raises_sensitivity},
      {9, "hedging policy ordering", policy_ordering},
      {10, "planted feature group", planted_importance},
      {11, "report determinism", report_determinism},
  };
  std::set<int> wanted;
  for (int i = 1; i < argc; ++i) wanted.insert(std::stoi(argv[i]));

  int failures = 0;
  for (const auto& c : criteria) {
    if (!wanted.empty() && !wanted.count(c.id)) continue;
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failures;
    std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << c.id << " (" << c.name << "): " << o.detail << " ["
              << fmt(seconds_since(t0), 1) << " s]" << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
