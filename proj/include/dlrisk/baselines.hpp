#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "dlrisk/classifier.hpp"
#include "dlrisk/core.hpp"
#include "dlrisk/sda.hpp"

/// Shallow comparison models. All take scaled features and class labels
/// (1 = hedge) and return P(hedge).
namespace dlrisk::baselines {

struct LogitParams {
  double lambda = 1e-3;
  int max_iter = 500;
  double tol = 1e-7;
};

/// L2-regularised logistic regression fitted by full-batch gradient descent
/// with backtracking: mean log-loss + lambda ||w||^2 (intercept unpenalised).
class LogisticRegression : public Classifier {
 public:
  using Params = LogitParams;

  explicit LogisticRegression(Params p = {}) : p_(p) {}
  std::string kind() const override { return "logit"; }
  void fit(const Matrix& x, const IntVector& y, const FitContext& ctx) override;
  Vector predict_proba(const Matrix& x) const override;
  std::string to_json() const override;
  static LogisticRegression from_json(const std::string& text);

  const Vector& weights() const { return w_; }
  double intercept() const { return b_; }
  const Params& params() const { return p_; }

 private:
  Params p_;
  Vector w_;
  double b_ = 0.0;
};

struct AnnParams {
  int hidden = 32;
  double lambda = 1e-4;
  double learning_rate = 0.1;
  double momentum = 0.9;
  int epochs = 40;
  int batch_size = 64;
  int patience = 5;
};

/// One sigmoid hidden layer and a softmax output, trained with the network core.
class NeuralNet : public Classifier {
 public:
  using Params = AnnParams;

  explicit NeuralNet(Params p = {}) : p_(p) {}
  std::string kind() const override { return "ann"; }
  void fit(const Matrix& x, const IntVector& y, const FitContext& ctx) override;
  Vector predict_proba(const Matrix& x) const override;
  std::string to_json() const override;

  sda::HyperParams hyper_params() const;
  const nn::Network<double>& network() const { return network_; }
  void set_network(nn::Network<double> net) { network_ = std::move(net); }

 private:
  Params p_;
  nn::Network<double> network_;
};

struct TreeNode {
  int feature = -1;  ///< -1 for a leaf
  double threshold = 0.0;
  int left = -1;  ///< x[feature] <= threshold
  int right = -1;
  /// Weighted share of class 1 among the training rows reaching the node.
  double value = 0.0;

  friend bool operator==(const TreeNode&, const TreeNode&) = default;
};

struct TreeParams {
  int max_depth = 8;  ///< -1 = unlimited
  int min_samples_split = 2;
  int min_samples_leaf = 1;
  /// Features drawn per split; 0 = all, considered in column order.
  int max_features = 0;
};

/// CART with the Gini criterion.
class DecisionTree : public Classifier {
 public:
  using Params = TreeParams;

  explicit DecisionTree(Params p = {}) : p_(p) {}
  std::string kind() const override { return "cart"; }
  void fit(const Matrix& x, const IntVector& y, const FitContext& ctx) override;
  /// Weighted fit on a subset of rows (duplicates allowed).
  void fit_weighted(const Matrix& x, const IntVector& y, const Vector& w, const std::vector<int>& rows, Rng& rng);
  Vector predict_proba(const Matrix& x) const override;
  std::string to_json() const override;
  static DecisionTree from_json(const std::string& text);

  const std::vector<TreeNode>& nodes() const { return nodes_; }
  int depth() const;
  /// Features used by internal nodes, in preorder without repeats.
  std::vector<int> split_features() const;
  double predict_row(const Eigen::Ref<const RowVector>& row) const;

 private:
  int grow(const Matrix& x, const IntVector& y, const Vector& w, std::vector<int>& rows, int depth, Rng& rng);

  Params p_;
  std::vector<TreeNode> nodes_;
};

struct ForestParams {
  int n_trees = 200;
  int max_depth = 8;
  /// 0 = floor(sqrt(features)); -1 = all features.
  int max_features = 0;
  bool bootstrap = true;
};

/// Bagged CART trees with per-split feature subsets; probabilities are averaged.
class RandomForest : public Classifier {
 public:
  using Params = ForestParams;

  explicit RandomForest(Params p = {}) : p_(p) {}
  std::string kind() const override { return "forest"; }
  void fit(const Matrix& x, const IntVector& y, const FitContext& ctx) override;
  Vector predict_proba(const Matrix& x) const override;
  std::string to_json() const override;
  static RandomForest from_json(const std::string& text);

  const std::vector<DecisionTree>& trees() const { return trees_; }

 private:
  Params p_;
  std::vector<DecisionTree> trees_;
};

struct AdaBoostParams {
  int n_estimators = 100;
};

/// Discrete AdaBoost over depth-1 trees. Boosting halts when a stump's
/// weighted error reaches 0.5. P(hedge) = sigmoid(2 F(x)).
class AdaBoost : public Classifier {
 public:
  using Params = AdaBoostParams;

  explicit AdaBoost(Params p = {}) : p_(p) {}
  std::string kind() const override { return "adaboost"; }
  void fit(const Matrix& x, const IntVector& y, const FitContext& ctx) override;
  Vector predict_proba(const Matrix& x) const override;
  Vector decision_function(const Matrix& x) const;
  std::string to_json() const override;
  static AdaBoost from_json(const std::string& text);

  const std::vector<double>& alphas() const { return alphas_; }
  const std::vector<DecisionTree>& stumps() const { return stumps_; }

 private:
  Params p_;
  std::vector<DecisionTree> stumps_;
  std::vector<double> alphas_;
  /// Used when not even the first stump beats chance.
  double prior_ = 0.5;
};

struct SvmParams {
  double c = 1.0;
  int epochs = 30;
  int batch_size = 32;
};

/// Linear SVM: 0.5 ||w||^2 + C sum hinge, minimised by stochastic
/// subgradient steps of size 1 / (lambda t) with lambda = 1 / (C n) and
/// iterate averaging; probabilities from a Platt sigmoid on decision values.
class LinearSvm : public Classifier {
 public:
  using Params = SvmParams;

  explicit LinearSvm(Params p = {}) : p_(p) {}
  std::string kind() const override { return "svm"; }
  void fit(const Matrix& x, const IntVector& y, const FitContext& ctx) override;
  Vector predict_proba(const Matrix& x) const override;
  Vector decision_function(const Matrix& x) const;
  std::string to_json() const override;
  static LinearSvm from_json(const std::string& text);

  double platt_a() const { return platt_a_; }
  double platt_b() const { return platt_b_; }

 private:
  Params p_;
  Vector w_;
  double b_ = 0.0;
  double platt_a_ = -1.0;
  double platt_b_ = 0.0;
};

/// Platt scaling: fits P(y=1|f) = 1 / (1 + exp(A f + B)) with the smoothed
/// targets (N+ + 1)/(N+ + 2) and 1/(N- + 2) by Newton's method.
std::pair<double, double> platt_fit(const Vector& decision, const IntVector& y);

/// Hyper-parameter grids of every model family.
std::vector<NamedFactory> grid(const std::string& family);

/// Factory for a family with its default parameters: logit, ann, cart,
/// forest, adaboost, svm or sda.
NamedFactory default_factory(const std::string& family);

/// Picks the grid point with the highest AUC on an internal trader-grouped
/// holdout of the training rows.
NamedFactory select_by_holdout(const std::vector<NamedFactory>& candidates, const Matrix& x, const IntVector& y,
                               const std::vector<std::int64_t>* groups, double fraction, std::uint64_t seed);

/// Rebuilds a fitted classifier from `Classifier::to_json` output (networks
/// excluded; those use checkpoints).
std::unique_ptr<Classifier> classifier_from_json(const std::string& text);

/// Factory of unfitted models with the hyper-parameters recorded in a model's
/// JSON (any family, networks included).
NamedFactory factory_from_json(const std::string& name, const std::string& model_json);

/// Writes any fitted model as a checkpoint: the model JSON as header and the
/// network parameters (empty for shallow models) as payload.
void save_model(const Classifier& model, const std::filesystem::path& path);
std::unique_ptr<Classifier> load_model(const std::filesystem::path& path);

}  // namespace dlrisk::baselines
