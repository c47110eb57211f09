#include "dlrisk/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

#include "dlrisk/eval.hpp"
#include "dlrisk/nn/checkpoint.hpp"

namespace dlrisk::baselines {

namespace {

using nlohmann::json;

Vector sigmoid(const Vector& z) { return (1.0 + (-z.array()).exp()).inverse().matrix(); }

json parse_model(const std::string& text, const char* kind) {
  try {
    json j = json::parse(text);
    if (j.value("kind", "") != kind) throw SchemaError(std::string("expected a '") + kind + "' model");
    return j;
  } catch (const json::exception& e) {
    throw SchemaError(std::string(kind) + " model: " + e.what());
  }
}

Vector to_vector(const json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

std::vector<double> to_std(const Vector& v) { return {v.data(), v.data() + v.size()}; }

void check_width(Eigen::Index expected, const Matrix& x, const std::string& who) {
  if (expected == 0) throw InvalidArgument(who + ": model is not fitted");
  if (x.cols() != expected)
    throw InvalidArgument(who + ": input has " + std::to_string(x.cols()) + " columns, model expects " +
                          std::to_string(expected));
}

std::string fmt(double v) {
  std::ostringstream s;
  s << v;
  return s.str();
}

json tree_json(const std::vector<TreeNode>& nodes) {
  json a = json::array();
  for (const auto& n : nodes) a.push_back({n.feature, n.threshold, n.left, n.right, n.value});
  return a;
}

std::vector<TreeNode> tree_nodes(const json& a) {
  std::vector<TreeNode> nodes;
  for (const auto& e : a) nodes.push_back({e.at(0).get<int>(), e.at(1).get<double>(), e.at(2).get<int>(),
                                           e.at(3).get<int>(), e.at(4).get<double>()});
  const int n = static_cast<int>(nodes.size());
  for (const auto& t : nodes)
    if (t.feature >= 0 && (t.left <= 0 || t.left >= n || t.right <= 0 || t.right >= n))
      throw SchemaError("tree: child index out of range");
  return nodes;
}

}  // namespace

// ---------------------------------------------------------------- logit

void LogisticRegression::fit(const Matrix& x, const IntVector& y, const FitContext&) {
  check_fit_input(x, y);
  require(p_.lambda >= 0.0 && p_.max_iter >= 1, "logit: invalid parameters");
  const double n = static_cast<double>(x.rows());
  const Vector yd = y.cast<double>();
  auto loss = [&](const Vector& w, double b) {
    const Vector z = (x * w).array() + b;
    // log(1 + e^z) - y z, computed stably
    const double ll = (z.array().max(0.0) + (-z.array().abs()).exp().log1p() - yd.array() * z.array()).sum();
    return ll / n + p_.lambda * w.squaredNorm();
  };
  w_ = Vector::Zero(x.cols());
  const double prior = yd.mean();
  b_ = std::log(prior / (1.0 - prior));
  double f = loss(w_, b_);
  double step = 1.0;
  for (int it = 0; it < p_.max_iter; ++it) {
    const Vector r = sigmoid((x * w_).array() + b_) - yd;
    const Vector gw = x.transpose() * r / n + 2.0 * p_.lambda * w_;
    const double gb = r.mean();
    const double g2 = gw.squaredNorm() + gb * gb;
    if (std::sqrt(g2) < p_.tol) break;
    // Armijo backtracking
    for (;;) {
      const Vector w_new = w_ - step * gw;
      const double b_new = b_ - step * gb;
      const double f_new = loss(w_new, b_new);
      if (f_new <= f - 0.5 * step * g2) {
        w_ = w_new;
        b_ = b_new;
        f = f_new;
        step *= 2.0;
        break;
      }
      step *= 0.5;
      if (step < 1e-12) return;
    }
  }
}

Vector LogisticRegression::predict_proba(const Matrix& x) const {
  check_width(w_.size(), x, kind());
  return sigmoid((x * w_).array() + b_);
}

std::string LogisticRegression::to_json() const {
  return json{{"kind", kind()}, {"schema", schema()}, {"lambda", p_.lambda}, {"max_iter", p_.max_iter},
              {"tol", p_.tol},  {"weights", to_std(w_)}, {"intercept", b_}}
      .dump();
}

LogisticRegression LogisticRegression::from_json(const std::string& text) {
  const json j = parse_model(text, "logit");
  try {
    LogisticRegression m({j.at("lambda").get<double>(), j.at("max_iter").get<int>(), j.at("tol").get<double>()});
    m.w_ = to_vector(j.at("weights"));
    m.b_ = j.at("intercept").get<double>();
    m.set_schema(j.value("schema", ""));
    return m;
  } catch (const json::exception& e) {
    throw SchemaError(std::string("logit model: ") + e.what());
  }
}

// ---------------------------------------------------------------- ann

sda::HyperParams NeuralNet::hyper_params() const {
  sda::HyperParams hp;
  hp.hidden = {p_.hidden};
  hp.corruption = 0.0;
  hp.dropout = 0.0;
  hp.lambda = p_.lambda;
  hp.learning_rate = p_.learning_rate;
  hp.decay = 0.0;
  hp.momentum = p_.momentum;
  hp.batch_size = p_.batch_size;
  hp.pretrain_epochs = 0;
  hp.finetune_epochs = p_.epochs;
  hp.patience = p_.patience;
  hp.batch_norm = false;
  hp.pretrain = false;
  return hp;
}

void NeuralNet::fit(const Matrix& x, const IntVector& y, const FitContext& ctx) {
  check_fit_input(x, y);
  const sda::HyperParams hp = hyper_params();
  hp.validate();
  Rng rng(derive_seed(ctx.seed, "ann"));
  const auto [train, valid] = sda::holdout_split(y, ctx.groups, hp.validation_fraction, derive_seed(ctx.seed, "split"));
  const Matrix xt = take_rows(x, train);
  auto net = sda::build_classifier_network({}, xt, hp, rng);
  network_ = sda::fine_tune(std::move(net), xt, take(y, train), take_rows(x, valid), take(y, valid), hp, rng).network;
}

Vector NeuralNet::predict_proba(const Matrix& x) const {
  check_width(network_.inputs(), x, kind());
  return sda::predict_proba(network_, x);
}

std::string NeuralNet::to_json() const {
  return json{{"kind", kind()},
              {"schema", schema()},
              {"hidden", p_.hidden},
              {"lambda", p_.lambda},
              {"learning_rate", p_.learning_rate},
              {"momentum", p_.momentum},
              {"epochs", p_.epochs},
              {"batch_size", p_.batch_size},
              {"patience", p_.patience}}
      .dump();
}

// ---------------------------------------------------------------- cart

void DecisionTree::fit(const Matrix& x, const IntVector& y, const FitContext& ctx) {
  check_fit_input(x, y);
  std::vector<int> rows(static_cast<std::size_t>(x.rows()));
  std::iota(rows.begin(), rows.end(), 0);
  Rng rng(derive_seed(ctx.seed, "cart"));
  fit_weighted(x, y, Vector::Ones(x.rows()), rows, rng);
}

void DecisionTree::fit_weighted(const Matrix& x, const IntVector& y, const Vector& w, const std::vector<int>& rows,
                                Rng& rng) {
  require(p_.max_depth >= -1 && p_.min_samples_split >= 2 && p_.min_samples_leaf >= 1 && p_.max_features >= 0,
          "cart: invalid parameters");
  require(!rows.empty(), "cart: no training rows");
  require(w.size() == x.rows() && y.size() == x.rows(), "cart: size mismatch");
  nodes_.clear();
  std::vector<int> work = rows;
  grow(x, y, w, work, 0, rng);
}

int DecisionTree::grow(const Matrix& x, const IntVector& y, const Vector& w, std::vector<int>& rows, int depth,
                       Rng& rng) {
  const int id = static_cast<int>(nodes_.size());
  nodes_.push_back({});
  double wsum = 0.0, wpos = 0.0;
  for (int r : rows) {
    wsum += w(r);
    if (y(r) == 1) wpos += w(r);
  }
  nodes_[id].value = wsum > 0 ? wpos / wsum : 0.0;
  const auto gini = [](double wt, double wp) { return wt > 0 ? 2.0 * wp * (wt - wp) / wt : 0.0; };
  const double parent = gini(wsum, wpos);
  const auto n = static_cast<int>(rows.size());
  if ((p_.max_depth >= 0 && depth >= p_.max_depth) || n < p_.min_samples_split || parent <= 1e-14) return id;

  const int p = static_cast<int>(x.cols());
  std::vector<int> features(static_cast<std::size_t>(p));
  std::iota(features.begin(), features.end(), 0);
  if (p_.max_features > 0 && p_.max_features < p) {
    for (int i = 0; i < p_.max_features; ++i) {
      std::uniform_int_distribution<int> pick(i, p - 1);
      std::swap(features[static_cast<std::size_t>(i)], features[static_cast<std::size_t>(pick(rng))]);
    }
    features.resize(static_cast<std::size_t>(p_.max_features));
    std::sort(features.begin(), features.end());
  }

  // splits without impurity gain are allowed, otherwise a pure interaction (XOR) never starts
  double best = parent + 1e-12;
  int best_feature = -1;
  double best_threshold = 0.0;
  std::vector<std::pair<double, int>> sorted(rows.size());
  for (int f : features) {
    for (std::size_t i = 0; i < rows.size(); ++i) sorted[i] = {x(rows[i], f), rows[i]};
    std::sort(sorted.begin(), sorted.end());
    if (sorted.front().first == sorted.back().first) continue;
    double wl = 0.0, wlp = 0.0;
    for (int i = 0; i + 1 < n; ++i) {
      const int r = sorted[static_cast<std::size_t>(i)].second;
      wl += w(r);
      if (y(r) == 1) wlp += w(r);
      const double v = sorted[static_cast<std::size_t>(i)].first;
      const double next = sorted[static_cast<std::size_t>(i) + 1].first;
      if (v == next || i + 1 < p_.min_samples_leaf || n - i - 1 < p_.min_samples_leaf) continue;
      const double g = gini(wl, wlp) + gini(wsum - wl, wpos - wlp);
      if (g < best) {
        best = g;
        best_feature = f;
        best_threshold = 0.5 * (v + next);
        if (!(best_threshold > v && best_threshold <= next)) best_threshold = v;
      }
    }
  }
  if (best_feature < 0) return id;

  std::vector<int> left, right;
  for (int r : rows) (x(r, best_feature) <= best_threshold ? left : right).push_back(r);
  rows.clear();
  rows.shrink_to_fit();
  nodes_[id].feature = best_feature;
  nodes_[id].threshold = best_threshold;
  const int l = grow(x, y, w, left, depth + 1, rng);
  nodes_[id].left = l;
  const int r = grow(x, y, w, right, depth + 1, rng);
  nodes_[id].right = r;
  return id;
}

double DecisionTree::predict_row(const Eigen::Ref<const RowVector>& row) const {
  int k = 0;
  while (nodes_[static_cast<std::size_t>(k)].feature >= 0) {
    const auto& n = nodes_[static_cast<std::size_t>(k)];
    k = row(n.feature) <= n.threshold ? n.left : n.right;
  }
  return nodes_[static_cast<std::size_t>(k)].value;
}

Vector DecisionTree::predict_proba(const Matrix& x) const {
  if (nodes_.empty()) throw InvalidArgument("cart: model is not fitted");
  int max_feature = -1;
  for (const auto& n : nodes_) max_feature = std::max(max_feature, n.feature);
  require(max_feature < x.cols(), "cart: input has too few columns");
  Vector p(x.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i) p(i) = predict_row(x.row(i));
  return p;
}

int DecisionTree::depth() const {
  if (nodes_.empty()) return 0;
  std::vector<int> d(nodes_.size(), 0);
  int deepest = 0;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    deepest = std::max(deepest, d[i]);
    if (nodes_[i].feature >= 0) {
      d[static_cast<std::size_t>(nodes_[i].left)] = d[i] + 1;
      d[static_cast<std::size_t>(nodes_[i].right)] = d[i] + 1;
    }
  }
  return deepest;
}

std::vector<int> DecisionTree::split_features() const {
  std::vector<int> out;
  for (const auto& n : nodes_)
    if (n.feature >= 0 && std::find(out.begin(), out.end(), n.feature) == out.end()) out.push_back(n.feature);
  return out;
}

std::string DecisionTree::to_json() const {
  return json{{"kind", kind()},
              {"schema", schema()},
              {"max_depth", p_.max_depth},
              {"min_samples_split", p_.min_samples_split},
              {"min_samples_leaf", p_.min_samples_leaf},
              {"max_features", p_.max_features},
              {"nodes", tree_json(nodes_)}}
      .dump();
}

DecisionTree DecisionTree::from_json(const std::string& text) {
  const json j = parse_model(text, "cart");
  try {
    DecisionTree t({j.at("max_depth").get<int>(), j.at("min_samples_split").get<int>(),
                    j.at("min_samples_leaf").get<int>(), j.at("max_features").get<int>()});
    t.nodes_ = tree_nodes(j.at("nodes"));
    t.set_schema(j.value("schema", ""));
    return t;
  } catch (const json::exception& e) {
    throw SchemaError(std::string("cart model: ") + e.what());
  }
}

// ---------------------------------------------------------------- forest

void RandomForest::fit(const Matrix& x, const IntVector& y, const FitContext& ctx) {
  check_fit_input(x, y);
  require(p_.n_trees >= 1 && p_.max_depth >= -1 && p_.max_features >= -1, "forest: invalid parameters");
  const int p = static_cast<int>(x.cols());
  int m = p_.max_features;
  if (m == 0) m = std::max(1, static_cast<int>(std::floor(std::sqrt(static_cast<double>(p)))));
  if (m < 0 || m >= p) m = 0;
  const Vector w = Vector::Ones(x.rows());
  trees_.clear();
  for (int t = 0; t < p_.n_trees; ++t) {
    Rng rng(derive_seed(derive_seed(ctx.seed, "forest"), static_cast<std::uint64_t>(t)));
    std::vector<int> rows(static_cast<std::size_t>(x.rows()));
    if (p_.bootstrap) {
      std::uniform_int_distribution<int> pick(0, static_cast<int>(x.rows()) - 1);
      for (auto& r : rows) r = pick(rng);
    } else {
      std::iota(rows.begin(), rows.end(), 0);
    }
    DecisionTree tree({p_.max_depth, 2, 1, m});
    tree.fit_weighted(x, y, w, rows, rng);
    trees_.push_back(std::move(tree));
  }
}

Vector RandomForest::predict_proba(const Matrix& x) const {
  if (trees_.empty()) throw InvalidArgument("forest: model is not fitted");
  Vector p = Vector::Zero(x.rows());
  for (const auto& t : trees_) p += t.predict_proba(x);
  return p / static_cast<double>(trees_.size());
}

std::string RandomForest::to_json() const {
  json trees = json::array();
  for (const auto& t : trees_) trees.push_back(tree_json(t.nodes()));
  return json{{"kind", kind()},
              {"schema", schema()},
              {"n_trees", p_.n_trees},
              {"max_depth", p_.max_depth},
              {"max_features", p_.max_features},
              {"bootstrap", p_.bootstrap},
              {"trees", trees}}
      .dump();
}

RandomForest RandomForest::from_json(const std::string& text) {
  const json j = parse_model(text, "forest");
  try {
    RandomForest f({j.at("n_trees").get<int>(), j.at("max_depth").get<int>(), j.at("max_features").get<int>(),
                    j.at("bootstrap").get<bool>()});
    for (const auto& t : j.at("trees")) {
      json one{{"kind", "cart"}, {"max_depth", f.p_.max_depth}, {"min_samples_split", 2}, {"min_samples_leaf", 1},
               {"max_features", 0}, {"nodes", t}};
      f.trees_.push_back(DecisionTree::from_json(one.dump()));
    }
    f.set_schema(j.value("schema", ""));
    return f;
  } catch (const json::exception& e) {
    throw SchemaError(std::string("forest model: ") + e.what());
  }
}

// ---------------------------------------------------------------- adaboost

void AdaBoost::fit(const Matrix& x, const IntVector& y, const FitContext& ctx) {
  check_fit_input(x, y);
  require(p_.n_estimators >= 1, "adaboost: n_estimators must be >= 1");
  const auto n = x.rows();
  Vector w = Vector::Constant(n, 1.0 / static_cast<double>(n));
  std::vector<int> rows(static_cast<std::size_t>(n));
  std::iota(rows.begin(), rows.end(), 0);
  stumps_.clear();
  alphas_.clear();
  prior_ = y.cast<double>().mean();
  Rng rng(derive_seed(ctx.seed, "adaboost"));
  for (int m = 0; m < p_.n_estimators; ++m) {
    DecisionTree stump({1, 2, 1, 0});
    stump.fit_weighted(x, y, w, rows, rng);
    const Vector p = stump.predict_proba(x);
    double err = 0.0;
    for (Eigen::Index i = 0; i < n; ++i)
      if ((p(i) > 0.5) != (y(i) == 1)) err += w(i);
    if (err >= 0.5) break;
    const double alpha = 0.5 * std::log((1.0 - err) / std::max(err, 1e-10));
    stumps_.push_back(std::move(stump));
    alphas_.push_back(alpha);
    if (err <= 0.0) break;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double h = p(i) > 0.5 ? 1.0 : -1.0;
      w(i) *= std::exp(-alpha * (y(i) == 1 ? 1.0 : -1.0) * h);
    }
    w /= w.sum();
  }
}

Vector AdaBoost::decision_function(const Matrix& x) const {
  Vector f = Vector::Zero(x.rows());
  for (std::size_t m = 0; m < stumps_.size(); ++m) {
    const Vector p = stumps_[m].predict_proba(x);
    f += alphas_[m] * (p.array() > 0.5).select(Vector::Ones(x.rows()), -Vector::Ones(x.rows()));
  }
  return f;
}

Vector AdaBoost::predict_proba(const Matrix& x) const {
  if (stumps_.empty()) return Vector::Constant(x.rows(), prior_);
  return sigmoid(2.0 * decision_function(x));
}

std::string AdaBoost::to_json() const {
  json stumps = json::array();
  for (const auto& s : stumps_) stumps.push_back(tree_json(s.nodes()));
  return json{{"kind", kind()},     {"schema", schema()}, {"n_estimators", p_.n_estimators},
              {"alphas", alphas_},  {"stumps", stumps},   {"prior", prior_}}
      .dump();
}

AdaBoost AdaBoost::from_json(const std::string& text) {
  const json j = parse_model(text, "adaboost");
  try {
    AdaBoost a({j.at("n_estimators").get<int>()});
    a.alphas_ = j.at("alphas").get<std::vector<double>>();
    for (const auto& t : j.at("stumps")) {
      json one{{"kind", "cart"}, {"max_depth", 1}, {"min_samples_split", 2}, {"min_samples_leaf", 1},
               {"max_features", 0}, {"nodes", t}};
      a.stumps_.push_back(DecisionTree::from_json(one.dump()));
    }
    if (a.alphas_.size() != a.stumps_.size()) throw SchemaError("adaboost model: alpha count mismatch");
    a.prior_ = j.at("prior").get<double>();
    a.set_schema(j.value("schema", ""));
    return a;
  } catch (const json::exception& e) {
    throw SchemaError(std::string("adaboost model: ") + e.what());
  }
}

// ---------------------------------------------------------------- svm

std::pair<double, double> platt_fit(const Vector& f, const IntVector& y) {
  require(f.size() == y.size() && f.size() > 0, "platt_fit: size mismatch");
  const double n_pos = static_cast<double>((y.array() == 1).count());
  const double n_neg = static_cast<double>(y.size()) - n_pos;
  const double hi = (n_pos + 1.0) / (n_pos + 2.0), lo = 1.0 / (n_neg + 2.0);
  Vector t(y.size());
  for (Eigen::Index i = 0; i < y.size(); ++i) t(i) = y(i) == 1 ? hi : lo;
  auto objective = [&](double a, double b) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < f.size(); ++i) {
      const double z = a * f(i) + b;
      // -[t log p + (1 - t) log(1 - p)] with p = 1 / (1 + e^z)
      s += z >= 0 ? t(i) * z + std::log1p(std::exp(-z)) : (t(i) - 1.0) * z + std::log1p(std::exp(z));
    }
    return s;
  };
  double a = 0.0, b = std::log((n_neg + 1.0) / (n_pos + 1.0));
  double obj = objective(a, b);
  for (int it = 0; it < 100; ++it) {
    double h11 = 1e-12, h22 = 1e-12, h21 = 0.0, g1 = 0.0, g2 = 0.0;
    for (Eigen::Index i = 0; i < f.size(); ++i) {
      const double z = a * f(i) + b;
      const double p = z >= 0 ? std::exp(-z) / (1.0 + std::exp(-z)) : 1.0 / (1.0 + std::exp(z));
      const double q = 1.0 - p;
      const double d2 = p * q;
      h11 += f(i) * f(i) * d2;
      h22 += d2;
      h21 += f(i) * d2;
      const double d1 = t(i) - p;
      g1 += f(i) * d1;
      g2 += d1;
    }
    if (std::abs(g1) < 1e-9 && std::abs(g2) < 1e-9) break;
    const double det = h11 * h22 - h21 * h21;
    const double da = -(h22 * g1 - h21 * g2) / det;
    const double db = -(-h21 * g1 + h11 * g2) / det;
    const double gd = g1 * da + g2 * db;
    double step = 1.0;
    while (step >= 1e-10) {
      const double na = a + step * da, nb = b + step * db;
      const double nobj = objective(na, nb);
      if (nobj < obj + 1e-4 * step * gd) {
        a = na;
        b = nb;
        obj = nobj;
        break;
      }
      step *= 0.5;
    }
    if (step < 1e-10) break;
  }
  return {a, b};
}

void LinearSvm::fit(const Matrix& x, const IntVector& y, const FitContext& ctx) {
  check_fit_input(x, y);
  require(p_.c > 0.0 && p_.epochs >= 1 && p_.batch_size >= 1, "svm: invalid parameters");
  const auto n = x.rows();
  const double lambda = 1.0 / (p_.c * static_cast<double>(n));
  // the intercept is a constant feature so the projection bounds it too
  Matrix xa(n, x.cols() + 1);
  xa << x, Vector::Ones(n);
  const Vector ys = (2 * y.array() - 1).cast<double>();
  Vector w = Vector::Zero(xa.cols()), avg = Vector::Zero(xa.cols());
  long averaged = 0;
  Rng rng(derive_seed(ctx.seed, "svm"));
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  long t = 0;
  const double radius = 1.0 / std::sqrt(lambda);
  for (int epoch = 0; epoch < p_.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t s = 0; s < order.size(); s += static_cast<std::size_t>(p_.batch_size)) {
      ++t;
      const double eta = 1.0 / (lambda * static_cast<double>(t));
      const auto end = std::min(order.size(), s + static_cast<std::size_t>(p_.batch_size));
      Vector g = Vector::Zero(xa.cols());
      for (std::size_t k = s; k < end; ++k) {
        const int i = order[k];
        if (ys(i) * xa.row(i).dot(w) < 1.0) g += ys(i) * xa.row(i).transpose();
      }
      w = (1.0 - eta * lambda) * w + (eta / static_cast<double>(end - s)) * g;
      const double norm = w.norm();
      if (norm > radius) w *= radius / norm;
      if (epoch >= p_.epochs / 2) {
        avg += w;
        ++averaged;
      }
    }
  }
  avg /= static_cast<double>(std::max(averaged, 1L));
  w_ = avg.head(x.cols());
  b_ = avg(x.cols());
  std::tie(platt_a_, platt_b_) = platt_fit(decision_function(x), y);
}

Vector LinearSvm::decision_function(const Matrix& x) const {
  check_width(w_.size(), x, kind());
  return (x * w_).array() + b_;
}

Vector LinearSvm::predict_proba(const Matrix& x) const {
  return sigmoid(-(platt_a_ * decision_function(x).array() + platt_b_).matrix());
}

std::string LinearSvm::to_json() const {
  return json{{"kind", kind()},       {"schema", schema()}, {"c", p_.c},           {"epochs", p_.epochs},
              {"batch_size", p_.batch_size}, {"weights", to_std(w_)}, {"intercept", b_}, {"platt_a", platt_a_},
              {"platt_b", platt_b_}}
      .dump();
}

LinearSvm LinearSvm::from_json(const std::string& text) {
  const json j = parse_model(text, "svm");
  try {
    LinearSvm m({j.at("c").get<double>(), j.at("epochs").get<int>(), j.at("batch_size").get<int>()});
    m.w_ = to_vector(j.at("weights"));
    m.b_ = j.at("intercept").get<double>();
    m.platt_a_ = j.at("platt_a").get<double>();
    m.platt_b_ = j.at("platt_b").get<double>();
    m.set_schema(j.value("schema", ""));
    return m;
  } catch (const json::exception& e) {
    throw SchemaError(std::string("svm model: ") + e.what());
  }
}

// ---------------------------------------------------------------- registry

std::vector<NamedFactory> grid(const std::string& family) {
  std::vector<NamedFactory> out;
  if (family == "logit") {
    for (double l : {1e-4, 1e-3, 1e-2, 1e-1, 1.0})
      out.push_back({"logit(lambda=" + fmt(l) + ")", [l] {
                       LogisticRegression::Params p;
                       p.lambda = l;
                       return std::make_unique<LogisticRegression>(p);
                     }});
  } else if (family == "cart") {
    for (int d : {4, 8, -1})
      out.push_back({"cart(depth=" + std::to_string(d) + ")", [d] {
                       DecisionTree::Params p;
                       p.max_depth = d;
                       return std::make_unique<DecisionTree>(p);
                     }});
  } else if (family == "forest") {
    for (int t : {50, 200})
      for (int d : {4, 8, -1})
        out.push_back({"forest(trees=" + std::to_string(t) + ",depth=" + std::to_string(d) + ")", [t, d] {
                         RandomForest::Params p;
                         p.n_trees = t;
                         p.max_depth = d;
                         return std::make_unique<RandomForest>(p);
                       }});
  } else if (family == "adaboost") {
    for (int m : {50, 200})
      out.push_back({"adaboost(n=" + std::to_string(m) + ")", [m] {
                       return std::make_unique<AdaBoost>(AdaBoost::Params{m});
                     }});
  } else if (family == "svm") {
    for (double c : {0.1, 1.0, 10.0})
      out.push_back({"svm(C=" + fmt(c) + ")", [c] {
                       LinearSvm::Params p;
                       p.c = c;
                       return std::make_unique<LinearSvm>(p);
                     }});
  } else if (family == "ann") {
    for (int h : {16, 32, 64})
      out.push_back({"ann(hidden=" + std::to_string(h) + ")", [h] {
                       NeuralNet::Params p;
                       p.hidden = h;
                       return std::make_unique<NeuralNet>(p);
                     }});
  } else if (family == "sda") {
    out.push_back(default_factory("sda"));
  } else {
    throw InvalidArgument("unknown classifier family '" + family + "'");
  }
  return out;
}

NamedFactory default_factory(const std::string& family) {
  if (family == "logit") return {family, [] { return std::make_unique<LogisticRegression>(); }};
  if (family == "ann") return {family, [] { return std::make_unique<NeuralNet>(); }};
  if (family == "cart") return {family, [] { return std::make_unique<DecisionTree>(); }};
  if (family == "forest") return {family, [] { return std::make_unique<RandomForest>(); }};
  if (family == "adaboost") return {family, [] { return std::make_unique<AdaBoost>(); }};
  if (family == "svm") return {family, [] { return std::make_unique<LinearSvm>(); }};
  if (family == "sda") return {family, [] { return std::make_unique<sda::SdaClassifier>(); }};
  throw InvalidArgument("unknown classifier family '" + family + "'");
}

NamedFactory select_by_holdout(const std::vector<NamedFactory>& candidates, const Matrix& x, const IntVector& y,
                               const std::vector<std::int64_t>* groups, double fraction, std::uint64_t seed) {
  require(!candidates.empty(), "select_by_holdout: no candidates");
  if (candidates.size() == 1) return candidates.front();
  const auto [train, valid] = sda::holdout_split(y, groups, fraction, derive_seed(seed, "grid"));
  const IntVector yv = take(y, valid);
  require((yv.array() == 1).any() && (yv.array() == 0).any(), "select_by_holdout: held-out rows lack a class");
  const Matrix xt = take_rows(x, train);
  const IntVector yt = take(y, train);
  std::vector<std::int64_t> gt;
  if (groups)
    for (int r : train) gt.push_back((*groups)[static_cast<std::size_t>(r)]);
  const Matrix xv = take_rows(x, valid);
  std::size_t best = 0;
  double best_auc = -1.0;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    auto model = candidates[i].make();
    model->fit(xt, yt, FitContext{derive_seed(seed, candidates[i].name), groups ? &gt : nullptr});
    const double a = eval::auc(model->predict_proba(xv), yv);
    if (a > best_auc) {
      best_auc = a;
      best = i;
    }
  }
  return candidates[best];
}

std::unique_ptr<Classifier> classifier_from_json(const std::string& text) {
  std::string kind;
  try {
    kind = json::parse(text).value("kind", "");
  } catch (const json::exception& e) {
    throw SchemaError(std::string("model: ") + e.what());
  }
  if (kind == "logit") return std::make_unique<LogisticRegression>(LogisticRegression::from_json(text));
  if (kind == "cart") return std::make_unique<DecisionTree>(DecisionTree::from_json(text));
  if (kind == "forest") return std::make_unique<RandomForest>(RandomForest::from_json(text));
  if (kind == "adaboost") return std::make_unique<AdaBoost>(AdaBoost::from_json(text));
  if (kind == "svm") return std::make_unique<LinearSvm>(LinearSvm::from_json(text));
  throw SchemaError("model kind '" + kind + "' cannot be restored from JSON alone");
}

NamedFactory factory_from_json(const std::string& name, const std::string& model_json) {
  try {
    const json j = json::parse(model_json);
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "logit") {
      const LogitParams p{j.at("lambda").get<double>(), j.at("max_iter").get<int>(), j.at("tol").get<double>()};
      return {name, [p] { return std::make_unique<LogisticRegression>(p); }};
    }
    if (kind == "cart") {
      const TreeParams p{j.at("max_depth").get<int>(), j.at("min_samples_split").get<int>(),
                         j.at("min_samples_leaf").get<int>(), j.at("max_features").get<int>()};
      return {name, [p] { return std::make_unique<DecisionTree>(p); }};
    }
    if (kind == "forest") {
      const ForestParams p{j.at("n_trees").get<int>(), j.at("max_depth").get<int>(), j.at("max_features").get<int>(),
                           j.at("bootstrap").get<bool>()};
      return {name, [p] { return std::make_unique<RandomForest>(p); }};
    }
    if (kind == "adaboost") {
      const AdaBoostParams p{j.at("n_estimators").get<int>()};
      return {name, [p] { return std::make_unique<AdaBoost>(p); }};
    }
    if (kind == "svm") {
      const SvmParams p{j.at("c").get<double>(), j.at("epochs").get<int>(), j.at("batch_size").get<int>()};
      return {name, [p] { return std::make_unique<LinearSvm>(p); }};
    }
    if (kind == "ann") {
      const AnnParams p{j.at("hidden").get<int>(),   j.at("lambda").get<double>(),   j.at("learning_rate").get<double>(),
                        j.at("momentum").get<double>(), j.at("epochs").get<int>(), j.at("batch_size").get<int>(),
                        j.at("patience").get<int>()};
      return {name, [p] { return std::make_unique<NeuralNet>(p); }};
    }
    if (kind == "sda") {
      const auto hp = sda::HyperParams::from_json(j.at("hyper_params").dump());
      return {name, [hp] { return std::make_unique<sda::SdaClassifier>(hp); }};
    }
    throw SchemaError("unknown model kind '" + kind + "'");
  } catch (const json::exception& e) {
    throw SchemaError("model parameters: " + std::string(e.what()));
  }
}

void save_model(const Classifier& model, const std::filesystem::path& path) {
  nn::CheckpointData data;
  json header{{"model", json::parse(model.to_json())}};
  const nn::Network<double>* net = nullptr;
  if (const auto* s = dynamic_cast<const sda::SdaClassifier*>(&model)) net = &s->network();
  if (const auto* a = dynamic_cast<const NeuralNet*>(&model)) net = &a->network();
  if (net) {
    if (net->blocks.empty()) throw InvalidArgument(model.kind() + ": cannot save an unfitted model");
    header["layers"] = json::parse(nn::network_topology(*net));
    nn::append_parameters(*net, data.params);
  }
  data.header = header.dump();
  nn::write_checkpoint(path, data);
}

std::unique_ptr<Classifier> load_model(const std::filesystem::path& path) {
  const nn::CheckpointData data = nn::read_checkpoint(path);
  try {
    const json header = json::parse(data.header);
    const json& m = header.at("model");
    const std::string kind = m.at("kind").get<std::string>();
    if (kind != "sda" && kind != "ann") return classifier_from_json(m.dump());
    std::size_t offset = 0;
    nn::Network<double> net = nn::network_from(header.at("layers").dump(), data.params, offset);
    if (offset != data.params.size()) throw SchemaError(path.string() + ": trailing parameters");
    std::unique_ptr<Classifier> out;
    if (kind == "sda") {
      auto s = std::make_unique<sda::SdaClassifier>(sda::HyperParams::from_json(m.at("hyper_params").dump()));
      s->set_network(std::move(net));
      out = std::move(s);
    } else {
      NeuralNet::Params p{m.at("hidden").get<int>(),     m.at("lambda").get<double>(),
                          m.at("learning_rate").get<double>(), m.at("momentum").get<double>(),
                          m.at("epochs").get<int>(),     m.at("batch_size").get<int>(),
                          m.at("patience").get<int>()};
      auto a = std::make_unique<NeuralNet>(p);
      a->set_network(std::move(net));
      out = std::move(a);
    }
    out->set_schema(m.value("schema", ""));
    return out;
  } catch (const json::exception& e) {
    throw SchemaError(path.string() + ": " + e.what());
  }
}

}  // namespace dlrisk::baselines
