#include "dlrisk/sda.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <set>

#include <nlohmann/json.hpp>

#include "dlrisk/eval.hpp"
#include "dlrisk/nn/gradcheck.hpp"

namespace dlrisk::sda {

namespace {

using nlohmann::json;

std::vector<int> shuffled(Eigen::Index n, Rng& rng) {
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  return order;
}

/// Minibatches over a shuffled order; a trailing batch of one row is folded
/// into the previous batch so batch statistics stay defined.
std::vector<std::vector<int>> minibatches(const std::vector<int>& order, int batch_size) {
  std::vector<std::vector<int>> out;
  for (std::size_t i = 0; i < order.size(); i += static_cast<std::size_t>(batch_size)) {
    const auto end = std::min(order.size(), i + static_cast<std::size_t>(batch_size));
    out.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(i), order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  if (out.size() > 1 && out.back().size() == 1) {
    out[out.size() - 2].push_back(out.back().front());
    out.pop_back();
  }
  return out;
}

nn::Network<double> as_network(const DenoisingAutoencoder& da) {
  nn::Network<double> net;
  net.blocks.push_back({da.encoder, std::nullopt, 0.0});
  net.blocks.push_back({da.decoder, std::nullopt, 0.0});
  if (da.tied) net.blocks[1].dense.W = da.encoder.W.transpose();
  return net;
}

double mean_nll(const nn::Network<double>& net, const Matrix& x, const IntVector& y) {
  nn::Cache<double> cache;
  nn::forward(const_cast<nn::Network<double>&>(net), x, nn::ForwardOptions<double>{}, &cache);
  return nn::loss_nll_softmax<double>(cache.blocks.back().pre, y) / static_cast<double>(x.rows());
}

}  // namespace

Matrix corrupt(const Matrix& x, double q, Rng& rng, CorruptionMode mode) {
  require(q >= 0.0 && q < 1.0, "corruption rate must lie in [0, 1)");
  Matrix out = x;
  if (q == 0.0) return out;
  std::bernoulli_distribution hit(q);
  for (Eigen::Index j = 0; j < out.cols(); ++j)
    for (Eigen::Index i = 0; i < out.rows(); ++i)
      if (hit(rng)) out(i, j) = mode == CorruptionMode::Mask ? 0.0 : 1.0 - out(i, j);
  return out;
}

DenoisingAutoencoder DenoisingAutoencoder::make(Eigen::Index inputs, Eigen::Index hidden,
                                                nn::Activation encoder_activation, double corruption, Rng& rng,
                                                ReconstructionLoss loss) {
  require(corruption >= 0.0 && corruption < 1.0, "corruption rate must lie in [0, 1)");
  DenoisingAutoencoder da;
  da.encoder = nn::make_dense<double>(inputs, hidden, encoder_activation, rng);
  da.decoder = nn::make_dense<double>(
      hidden, inputs, loss == ReconstructionLoss::CrossEntropy ? nn::Activation::Sigmoid : nn::Activation::Linear,
      rng);
  da.corruption = corruption;
  da.loss = loss;
  return da;
}

Matrix DenoisingAutoencoder::encode(const Matrix& x) const {
  nn::Network<double> net;
  net.blocks.push_back({encoder, std::nullopt, 0.0});
  return nn::predict(net, x);
}

Matrix DenoisingAutoencoder::reconstruct(const Matrix& x) const { return nn::predict(as_network(*this), x); }

double DenoisingAutoencoder::reconstruction_error(const Matrix& x) const {
  const Matrix z = reconstruct(x);
  return loss == ReconstructionLoss::CrossEntropy ? nn::loss_cross_entropy_l2<double>(z, x, {}, 0.0)
                                                  : nn::loss_mse<double>(z, x);
}

std::vector<double> train_da(const Matrix& data, DenoisingAutoencoder& da, nn::OptimizerState<double>& opt,
                             const TrainSchedule& schedule, Rng& rng) {
  opt.validate();
  require(schedule.epochs >= 0 && schedule.batch_size >= 1, "invalid pretraining schedule");
  require(data.cols() == da.inputs(), "dA input width does not match the data");
  require(data.rows() > 0, "dA training needs data");
  if (da.loss == ReconstructionLoss::CrossEntropy)
    require(data.minCoeff() >= 0.0 && data.maxCoeff() <= 1.0, "cross-entropy reconstruction needs inputs in [0, 1]");
  const auto kind = da.loss == ReconstructionLoss::CrossEntropy ? nn::LossKind::CrossEntropy : nn::LossKind::Mse;

  nn::Network<double> net = as_network(da);
  std::vector<double> curve;
  nn::Cache<double> cache;
  for (int epoch = 0; epoch < schedule.epochs; ++epoch) {
    double total = 0.0;
    for (const auto& batch : minibatches(shuffled(data.rows(), rng), schedule.batch_size)) {
      const Matrix clean = take_rows(data, batch);
      const Matrix noisy = corrupt(clean, da.corruption, rng, da.corruption_mode);
      if (da.tied) net.blocks[1].dense.W = net.blocks[0].dense.W.transpose();
      const nn::Target<double> target = clean;
      total += nn::objective(net, noisy, target, kind, opt.lambda, nn::Mode::Train, cache) *
               static_cast<double>(batch.size());
      nn::Gradients<double> g = nn::objective_gradient(net, cache, target, kind, opt.lambda);
      if (da.tied) {
        g.blocks[0].dW += g.blocks[1].dW.transpose();
        g.blocks[1].dW.setZero();
      }
      nn::sgd_step(net, g, opt, epoch);
    }
    curve.push_back(total / static_cast<double>(data.rows()));
  }
  da.encoder = net.blocks[0].dense;
  da.decoder = net.blocks[1].dense;
  if (da.tied) da.decoder.W = da.encoder.W.transpose();
  return curve;
}

Matrix StackedNetwork::encode(const Matrix& x) const {
  Matrix h = x;
  for (const auto& da : layers) h = da.encode(h);
  return h;
}

StackedNetwork stack_pretrain(const Matrix& data, const PretrainConfig& config, Rng& rng) {
  StackedNetwork stack;
  Matrix h = data;
  bool unit_range = data.size() > 0 && data.minCoeff() >= 0.0 && data.maxCoeff() <= 1.0;
  for (const auto& spec : config.layers) {
    require(spec.hidden >= 1, "hidden layer sizes must be positive");
    // codes outside [0, 1] (non-sigmoid layers) are reconstructed under squared error
    const auto loss = unit_range ? ReconstructionLoss::CrossEntropy : ReconstructionLoss::Mse;
    auto da = DenoisingAutoencoder::make(h.cols(), spec.hidden, spec.activation, spec.corruption, rng, loss);
    nn::OptimizerState<double> opt;
    opt.learning_rate = config.learning_rate;
    opt.decay = config.decay;
    opt.momentum = config.momentum;
    opt.lambda = config.lambda;
    stack.loss_curves.push_back(train_da(h, da, opt, config.schedule, rng));
    h = da.encode(h);
    unit_range = spec.activation == nn::Activation::Sigmoid;
    stack.layers.push_back(std::move(da));
  }
  return stack;
}

void HyperParams::validate() const {
  require(!hidden.empty(), "sda: at least one hidden layer is required");
  for (int h : hidden) require(h >= 1, "sda: hidden layer sizes must be positive");
  require(corruption >= 0.0 && corruption < 1.0, "sda: corruption must lie in [0, 1)");
  require(dropout >= 0.0 && dropout < 1.0, "sda: dropout must lie in [0, 1)");
  require(lambda >= 0.0, "sda: lambda must be non-negative");
  require(learning_rate > 0.0, "sda: learning rate must be positive");
  require(decay >= 0.0, "sda: decay must be non-negative");
  require(momentum >= 0.0 && momentum < 1.0, "sda: momentum must lie in [0, 1)");
  require(batch_size >= 2, "sda: batch size must be >= 2");
  require(pretrain_epochs >= 0 && finetune_epochs >= 1, "sda: invalid epoch counts");
  require(patience >= 1, "sda: patience must be >= 1");
  require(activation != nn::Activation::Softmax, "sda: softmax is reserved for the output layer");
  require(validation_fraction >= 0.0 && validation_fraction < 1.0, "sda: validation_fraction must lie in [0, 1)");
}

std::string HyperParams::to_json() const {
  return json{{"hidden", hidden},
              {"corruption", corruption},
              {"dropout", dropout},
              {"lambda", lambda},
              {"learning_rate", learning_rate},
              {"decay", decay},
              {"momentum", momentum},
              {"batch_size", batch_size},
              {"pretrain_epochs", pretrain_epochs},
              {"finetune_epochs", finetune_epochs},
              {"patience", patience},
              {"batch_norm", batch_norm},
              {"pretrain", pretrain},
              {"activation", nn::to_string(activation)},
              {"validation_fraction", validation_fraction}}
      .dump();
}

HyperParams HyperParams::from_json(const std::string& text) {
  HyperParams hp;
  try {
    const json j = json::parse(text);
    const auto get = [&](const char* key, auto& field) {
      if (j.contains(key)) j.at(key).get_to(field);
    };
    get("hidden", hp.hidden);
    get("corruption", hp.corruption);
    get("dropout", hp.dropout);
    get("lambda", hp.lambda);
    get("learning_rate", hp.learning_rate);
    get("decay", hp.decay);
    get("momentum", hp.momentum);
    get("batch_size", hp.batch_size);
    get("pretrain_epochs", hp.pretrain_epochs);
    get("finetune_epochs", hp.finetune_epochs);
    get("patience", hp.patience);
    get("batch_norm", hp.batch_norm);
    get("pretrain", hp.pretrain);
    get("validation_fraction", hp.validation_fraction);
    if (j.contains("activation")) hp.activation = nn::parse_activation(j.at("activation").get<std::string>());
  } catch (const json::exception& e) {
    throw SchemaError(std::string("sda hyper-parameters: ") + e.what());
  }
  hp.validate();
  return hp;
}

std::pair<std::vector<int>, std::vector<int>> holdout_split(const IntVector& y, const std::vector<std::int64_t>* groups,
                                                            double fraction, std::uint64_t seed) {
  require(fraction >= 0.0 && fraction < 1.0, "holdout fraction must lie in [0, 1)");
  const auto n = static_cast<std::size_t>(y.size());
  if (groups) require(groups->size() == n, "holdout_split: group count does not match rows");
  std::vector<int> train, valid;
  if (fraction == 0.0 || n < 2) {
    train.resize(n);
    std::iota(train.begin(), train.end(), 0);
    return {train, valid};
  }
  // units are groups (or single rows); stratified on whether a unit has a positive row
  std::map<std::int64_t, std::vector<int>> units;
  for (std::size_t i = 0; i < n; ++i) units[groups ? (*groups)[i] : static_cast<std::int64_t>(i)].push_back(static_cast<int>(i));
  std::vector<const std::vector<int>*> strata[2];
  for (const auto& [key, rows] : units) {
    const bool pos = std::any_of(rows.begin(), rows.end(), [&](int r) { return y(r) == 1; });
    strata[pos ? 1 : 0].push_back(&rows);
  }
  Rng rng(derive_seed(seed, "holdout"));
  std::vector<bool> in_valid(n, false);
  for (auto& s : strata) {
    std::shuffle(s.begin(), s.end(), rng);
    std::size_t rows_in_stratum = 0;
    for (const auto* u : s) rows_in_stratum += u->size();
    const double want = fraction * static_cast<double>(rows_in_stratum);
    std::size_t taken = 0;
    for (std::size_t k = 0; k + 1 < s.size() && static_cast<double>(taken) < want; ++k) {
      for (int r : *s[k]) in_valid[static_cast<std::size_t>(r)] = true;
      taken += s[k]->size();
    }
  }
  for (std::size_t i = 0; i < n; ++i) (in_valid[i] ? valid : train).push_back(static_cast<int>(i));
  return {train, valid};
}

nn::Network<double> build_classifier_network(const StackedNetwork& stack, const Matrix& x, const HyperParams& hp,
                                             Rng& rng) {
  hp.validate();
  nn::Network<double> net;
  if (!stack.layers.empty()) {
    require(stack.layers.size() == hp.hidden.size(), "pre-trained stack does not match the topology");
    require(stack.layers.front().inputs() == x.cols(), "pre-trained stack does not match the input width");
  }
  Matrix h = x;
  Eigen::Index width = x.cols();
  for (std::size_t l = 0; l < hp.hidden.size(); ++l) {
    nn::Block<double> b;
    b.dense = stack.layers.empty() ? nn::make_dense<double>(width, hp.hidden[l], hp.activation, rng)
                                   : stack.layers[l].encoder;
    b.dense.activation = hp.activation;
    b.dropout = hp.dropout;
    const Matrix z = (h * b.dense.W.transpose()).rowwise() + b.dense.b.transpose();
    if (hp.batch_norm) {
      auto bn = nn::BatchNormLayer<double>::identity(b.dense.outputs());
      const RowVector mu = z.colwise().mean();
      const RowVector var = (z.rowwise() - mu).array().square().colwise().mean();
      bn.running_mean = mu.transpose();
      bn.running_var = var.transpose();
      bn.gamma = (var.array() + bn.epsilon).sqrt().transpose();
      bn.beta = mu.transpose();
      bn.initialised = true;
      b.bn = std::move(bn);
    }
    h = nn::activate<double>(z, hp.activation);
    width = b.dense.outputs();
    net.blocks.push_back(std::move(b));
  }
  net.blocks.push_back({nn::make_dense<double>(width, 2, nn::Activation::Softmax, rng), std::nullopt, 0.0});
  return net;
}

FineTuneResult fine_tune(nn::Network<double> network, const Matrix& x_train, const IntVector& y_train,
                         const Matrix& x_valid, const IntVector& y_valid, const HyperParams& hp, Rng& rng) {
  hp.validate();
  require(x_train.rows() == y_train.size() && x_valid.rows() == y_valid.size(), "fine_tune: label count mismatch");
  require(x_train.rows() >= 2, "fine_tune: too few training rows");
  nn::OptimizerState<double> opt;
  opt.learning_rate = hp.learning_rate;
  opt.decay = hp.decay;
  opt.momentum = hp.momentum;
  opt.lambda = hp.lambda;

  FineTuneResult result;
  nn::EarlyStopping stopper(hp.patience);
  nn::Network<double> best = network;
  nn::Cache<double> cache;
  nn::ForwardOptions<double> fwd;
  fwd.mode = nn::Mode::Train;
  fwd.rng = &rng;
  for (int epoch = 0; epoch < hp.finetune_epochs; ++epoch) {
    double total = 0.0;
    for (const auto& batch : minibatches(shuffled(x_train.rows(), rng), hp.batch_size)) {
      const Matrix xb = take_rows(x_train, batch);
      const IntVector yb = take(y_train, batch);
      nn::forward(network, xb, fwd, &cache);
      const Matrix& logits = cache.blocks.back().pre;
      total += nn::loss_nll_softmax<double>(logits, yb);
      const auto g = nn::backward(network, cache, nn::nll_softmax_grad<double>(logits, yb),
                                  nn::GradientAt::PreActivation, hp.lambda);
      nn::sgd_step(network, g, opt, epoch);
    }
    result.train_loss.push_back(total / static_cast<double>(x_train.rows()));
    if (x_valid.rows() == 0) {
      best = network;
      result.best_epoch = epoch;
      continue;
    }
    const double v = mean_nll(network, x_valid, y_valid);
    result.validation_loss.push_back(v);
    const bool stop = stopper.update(v);
    if (stopper.improved()) {
      best = network;
      result.best_epoch = epoch;
    }
    if (stop) break;
  }
  result.network = std::move(best);
  return result;
}

Vector predict_proba(const nn::Network<double>& network, const Matrix& x) {
  require(network.outputs() == 2, "classifier network must end in two softmax units");
  return nn::predict(network, x).col(1);
}

void SdaClassifier::fit(const Matrix& x, const IntVector& y, const FitContext& ctx) {
  check_fit_input(x, y);
  Rng rng(derive_seed(ctx.seed, "sda"));
  const auto [train, valid] = holdout_split(y, ctx.groups, hp_.validation_fraction, derive_seed(ctx.seed, "split"));
  const Matrix xt = take_rows(x, train);
  const IntVector yt = take(y, train);
  StackedNetwork stack;
  if (hp_.pretrain && hp_.pretrain_epochs > 0) {
    PretrainConfig pc;
    for (int h : hp_.hidden) pc.layers.push_back({h, hp_.corruption, hp_.activation});
    pc.schedule = {hp_.pretrain_epochs, hp_.batch_size};
    pc.learning_rate = hp_.learning_rate;
    pc.decay = hp_.decay;
    pc.momentum = hp_.momentum;
    pc.lambda = hp_.lambda;
    stack = stack_pretrain(xt, pc, rng);
  }
  auto net = build_classifier_network(stack, xt, hp_, rng);
  history_ = fine_tune(std::move(net), xt, yt, take_rows(x, valid), take(y, valid), hp_, rng);
  network_ = history_.network;
}

Vector SdaClassifier::predict_proba(const Matrix& x) const {
  if (network_.blocks.empty()) throw InvalidArgument("sda: model is not fitted");
  return sda::predict_proba(network_, x);
}

std::string SdaClassifier::to_json() const {
  return json{{"kind", kind()},
              {"hyper_params", json::parse(hp_.to_json())},
              {"schema", schema()},
              {"best_epoch", history_.best_epoch},
              {"layers", network_.blocks.empty() ? json::array() : json::parse(nn::network_topology(network_))}}
      .dump();
}

void SdaClassifier::save(const std::filesystem::path& path) const {
  if (network_.blocks.empty()) throw InvalidArgument("sda: cannot save an unfitted model");
  nn::save_network(path, network_,
                   json{{"kind", kind()}, {"hyper_params", json::parse(hp_.to_json())}, {"schema", schema()}}.dump());
}

SdaClassifier SdaClassifier::load(const std::filesystem::path& path) {
  std::string extra;
  nn::Network<double> net = nn::load_network(path, &extra);
  try {
    const json j = json::parse(extra);
    if (j.value("kind", "") != "sda") throw SchemaError(path.string() + ": not an sda checkpoint");
    SdaClassifier model(HyperParams::from_json(j.at("hyper_params").dump()));
    model.set_schema(j.value("schema", ""));
    model.network_ = std::move(net);
    return model;
  } catch (const json::exception& e) {
    throw SchemaError(path.string() + ": " + e.what());
  }
}

void SearchSpace::validate() const {
  const auto ordered = [](const std::pair<double, double>& r) { return r.first <= r.second; };
  require(ordered(corruption) && corruption.first >= 0.0 && corruption.second < 1.0, "search: bad corruption range");
  require(ordered(dropout) && dropout.first >= 0.0 && dropout.second < 1.0, "search: bad dropout range");
  require(ordered(lambda) && lambda.first > 0.0, "search: lambda range must be positive (log scale)");
  require(ordered(learning_rate) && learning_rate.first > 0.0, "search: learning-rate range must be positive");
  require(ordered(decay) && decay.first >= 0.0, "search: bad decay range");
  require(ordered(momentum) && momentum.first >= 0.0 && momentum.second < 1.0, "search: bad momentum range");
  require(!batch_sizes.empty() && !topologies.empty(), "search: empty discrete options");
}

SearchResult random_search(const Matrix& x, const IntVector& y, const std::vector<std::int64_t>* groups,
                           const SearchSpace& space, const HyperParams& base, int budget, std::uint64_t seed) {
  space.validate();
  base.validate();
  require(budget >= 1, "search: budget must be >= 1");
  const double fraction = base.validation_fraction > 0.0 ? base.validation_fraction : 0.2;
  const auto [train, valid] = holdout_split(y, groups, fraction, derive_seed(seed, "search-split"));
  const IntVector yv = take(y, valid);
  require((yv.array() == 1).any() && (yv.array() == 0).any(), "search: held-out rows lack a class");
  const Matrix xt = take_rows(x, train);
  const Matrix xv = take_rows(x, valid);
  const IntVector yt = take(y, train);
  std::vector<std::int64_t> gt;
  if (groups)
    for (int r : train) gt.push_back((*groups)[static_cast<std::size_t>(r)]);

  Rng rng(derive_seed(seed, "search"));
  const auto uni = [&](const std::pair<double, double>& r) {
    return r.first + (r.second - r.first) * uniform01(rng);
  };
  const auto loguni = [&](const std::pair<double, double>& r) {
    return std::exp(std::log(r.first) + (std::log(r.second) - std::log(r.first)) * uniform01(rng));
  };
  const auto pick = [&](const auto& options) {
    return options[std::uniform_int_distribution<std::size_t>(0, options.size() - 1)(rng)];
  };

  SearchResult result;
  double best_auc = -1.0;
  for (int t = 0; t < budget; ++t) {
    Trial trial;
    trial.index = t;
    trial.params = base;
    trial.params.corruption = uni(space.corruption);
    trial.params.dropout = uni(space.dropout);
    trial.params.lambda = loguni(space.lambda);
    trial.params.learning_rate = loguni(space.learning_rate);
    trial.params.decay = uni(space.decay);
    trial.params.momentum = uni(space.momentum);
    trial.params.batch_size = pick(space.batch_sizes);
    trial.params.hidden = pick(space.topologies);
    trial.seed = derive_seed(seed, static_cast<std::uint64_t>(t));
    SdaClassifier model(trial.params);
    model.fit(xt, yt, FitContext{trial.seed, groups ? &gt : nullptr});
    trial.validation_auc = eval::auc(model.predict_proba(xv), yv);
    trial.best_epoch = model.history().best_epoch;
    if (trial.validation_auc > best_auc) {
      best_auc = trial.validation_auc;
      result.best = trial.params;
      result.best_index = t;
    }
    result.trials.push_back(std::move(trial));
  }
  return result;
}

void write_trial_log(const SearchResult& result, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  for (const auto& t : result.trials)
    out << json{{"trial", t.index},
                {"seed", t.seed},
                {"params", json::parse(t.params.to_json())},
                {"validation_auc", t.validation_auc},
                {"best_epoch", t.best_epoch},
                {"selected", t.index == result.best_index}}
               .dump()
        << '\n';
}

Matrix hidden_activations(const nn::Network<double>& network, const Matrix& x, std::size_t layer) {
  require(layer + 1 < network.blocks.size(), "hidden_activations: no such hidden layer");
  nn::Network<double> head;
  head.blocks.assign(network.blocks.begin(), network.blocks.begin() + static_cast<std::ptrdiff_t>(layer + 1));
  head.blocks.back().dropout = 0.0;
  return nn::predict(head, x);
}

double js_divergence(const std::vector<int>& a, const std::vector<int>& b) {
  require(a.size() == b.size() && !a.empty(), "js_divergence: histograms differ in size");
  const double sa = std::accumulate(a.begin(), a.end(), 0.0);
  const double sb = std::accumulate(b.begin(), b.end(), 0.0);
  require(sa > 0 && sb > 0, "js_divergence: empty histogram");
  double js = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double p = a[i] / sa, q = b[i] / sb, m = 0.5 * (p + q);
    if (p > 0) js += 0.5 * p * std::log2(p / m);
    if (q > 0) js += 0.5 * q * std::log2(q / m);
  }
  return js;
}

std::vector<NeuronHistogram> activation_histogram(const nn::Network<double>& network, const Matrix& x,
                                                  const IntVector& y, std::size_t layer, int bins) {
  require(bins >= 1, "activation_histogram: bins must be >= 1");
  require(x.rows() == y.size(), "activation_histogram: label count mismatch");
  const Matrix a = hidden_activations(network, x, layer);
  std::vector<NeuronHistogram> out;
  for (Eigen::Index j = 0; j < a.cols(); ++j) {
    NeuronHistogram h;
    h.neuron = static_cast<int>(j);
    const double lo = a.col(j).minCoeff(), hi = a.col(j).maxCoeff();
    const double width = (hi - lo) / bins;
    for (int k = 0; k <= bins; ++k) h.edges.push_back(lo + width * k);
    h.counts_hedge.assign(static_cast<std::size_t>(bins), 0);
    h.counts_no_hedge.assign(static_cast<std::size_t>(bins), 0);
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
      int k = width > 0 ? static_cast<int>((a(i, j) - lo) / width) : 0;
      k = std::clamp(k, 0, bins - 1);
      (y(i) == 1 ? h.counts_hedge : h.counts_no_hedge)[static_cast<std::size_t>(k)]++;
    }
    const bool both = (y.array() == 1).any() && (y.array() == 0).any();
    h.js_divergence = both ? js_divergence(h.counts_hedge, h.counts_no_hedge) : 0.0;
    out.push_back(std::move(h));
  }
  return out;
}

StimulusReport top_stimuli(const nn::Network<double>& network, const Matrix& x, const IntVector& y, const Vector& pnl,
                           int n, int thresholds) {
  require(x.rows() == y.size() && x.rows() == pnl.size(), "top_stimuli: row count mismatch");
  require(n >= 1 && n <= x.rows(), "top_stimuli: n must lie in [1, rows]");
  require(thresholds >= 1, "top_stimuli: thresholds must be >= 1");
  const Matrix a = hidden_activations(network, x, 0);
  StimulusReport r;
  r.purity = -1.0;
  for (Eigen::Index j = 0; j < a.cols(); ++j) {
    const double lo = a.col(j).minCoeff(), hi = a.col(j).maxCoeff();
    if (!(hi > lo)) continue;
    for (int t = 0; t < thresholds; ++t) {
      const double thr = lo + (hi - lo) * t / thresholds;
      long above = 0, pos = 0;
      for (Eigen::Index i = 0; i < a.rows(); ++i)
        if (a(i, j) >= thr) {
          ++above;
          pos += y(i) == 1;
        }
      if (above < n) continue;
      const double purity = static_cast<double>(pos) / static_cast<double>(above);
      if (purity > r.purity) {
        r.purity = purity;
        r.neuron = static_cast<int>(j);
        r.threshold = thr;
        r.majority_class = purity >= 0.5 ? 1 : 0;
      }
    }
  }
  if (r.neuron < 0) throw InvalidArgument("top_stimuli: every first-layer neuron is constant");
  std::vector<int> order(static_cast<std::size_t>(a.rows()));
  std::iota(order.begin(), order.end(), 0);
  const auto col = a.col(r.neuron);
  std::stable_sort(order.begin(), order.end(), [&](int p, int q) { return col(p) > col(q); });
  order.resize(static_cast<std::size_t>(n));
  long profitable = 0;
  for (int i : order) {
    r.rows.push_back(i);
    r.activation.push_back(col(i));
    r.pnl.push_back(pnl(i));
    profitable += pnl(i) > 0;
  }
  r.profit_fraction = static_cast<double>(profitable) / n;
  r.base_profit_rate = static_cast<double>((pnl.array() > 0).count()) / static_cast<double>(pnl.size());
  return r;
}

}  // namespace dlrisk::sda
