#pragma once

#include <limits>
#include <optional>
#include <vector>

#include "dlrisk/nn/layers.hpp"

namespace dlrisk::nn {

/// SGD with momentum and inverse-time learning-rate decay:
/// v <- mu v - eta(epoch) g, theta <- theta + v, eta(epoch) = eta0 / (1 + decay epoch).
template <typename Scalar>
struct OptimizerState {
  Scalar learning_rate = Scalar(0.1);
  Scalar decay = 0;
  Scalar momentum = Scalar(0.9);
  /// Weight-decay coefficient; its gradient is added by `backward`.
  Scalar lambda = 0;
  /// One velocity per parameter tensor, laid out like Gradients.
  std::vector<BlockGrad<Scalar>> velocity;

  void validate() const {
    require(learning_rate > 0, "learning rate must be positive");
    require(momentum >= 0 && momentum < 1, "momentum must lie in [0, 1)");
    require(lambda >= 0, "lambda must be non-negative");
    require(decay >= 0, "decay must be non-negative");
  }

  Scalar rate(int epoch) const { return learning_rate / (Scalar(1) + decay * static_cast<Scalar>(epoch)); }
};

namespace detail {

template <typename Scalar, typename Param, typename Grad, typename Vel>
void momentum_update(Param& theta, const Grad& g, Vel& v, Scalar mu, Scalar eta) {
  if (v.size() != g.size()) v = Vel::Zero(g.rows(), g.cols());
  v = mu * v - eta * g;
  theta += v;
}

}  // namespace detail

template <typename Scalar>
void sgd_step(Network<Scalar>& net, const Gradients<Scalar>& grads, OptimizerState<Scalar>& state, int epoch) {
  require(grads.blocks.size() == net.blocks.size(), "gradients do not match network");
  if (state.velocity.size() != net.blocks.size()) state.velocity.assign(net.blocks.size(), {});
  const Scalar eta = state.rate(epoch);
  const Scalar mu = state.momentum;
  for (std::size_t l = 0; l < net.blocks.size(); ++l) {
    auto& blk = net.blocks[l];
    const auto& g = grads.blocks[l];
    auto& v = state.velocity[l];
    require(g.dW.rows() == blk.dense.W.rows() && g.dW.cols() == blk.dense.W.cols(), "gradient shape mismatch");
    detail::momentum_update(blk.dense.W, g.dW, v.dW, mu, eta);
    detail::momentum_update(blk.dense.b, g.db, v.db, mu, eta);
    if (blk.bn && g.dgamma.size()) {
      detail::momentum_update(blk.bn->gamma, g.dgamma, v.dgamma, mu, eta);
      detail::momentum_update(blk.bn->beta, g.dbeta, v.dbeta, mu, eta);
    }
  }
}

/// Tracks a validation metric (lower is better) and signals a stop once it
/// has failed to improve for `patience` consecutive evaluations.
class EarlyStopping {
 public:
  explicit EarlyStopping(int patience) : patience_(patience) { require(patience >= 1, "patience must be >= 1"); }

  /// Records one evaluation; returns true when training should stop.
  bool update(double value) {
    ++evaluations_;
    if (value < best_) {
      best_ = value;
      best_index_ = evaluations_ - 1;
      since_best_ = 0;
      improved_ = true;
    } else {
      ++since_best_;
      improved_ = false;
    }
    return since_best_ >= patience_;
  }

  /// Whether the last update set a new best (the caller keeps a checkpoint).
  bool improved() const { return improved_; }
  double best() const { return best_; }
  /// Zero-based index of the best evaluation, -1 before the first update.
  int best_index() const { return best_index_; }
  int evaluations() const { return evaluations_; }

 private:
  int patience_;
  double best_ = std::numeric_limits<double>::infinity();
  int best_index_ = -1;
  int since_best_ = 0;
  int evaluations_ = 0;
  bool improved_ = false;
};

/// Scans a full history the way `EarlyStopping` would and returns the index
/// of the evaluation at which training stops (history size when it never does)
/// together with the best index.
inline std::pair<int, int> early_stopping_scan(const std::vector<double>& history, int patience) {
  require(!history.empty(), "early stopping needs a nonempty history");
  EarlyStopping es(patience);
  for (std::size_t i = 0; i < history.size(); ++i)
    if (es.update(history[i])) return {static_cast<int>(i), es.best_index()};
  return {static_cast<int>(history.size()), es.best_index()};
}

}  // namespace dlrisk::nn
