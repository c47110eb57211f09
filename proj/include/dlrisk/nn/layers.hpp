#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dlrisk/core.hpp"

/// Fully connected networks with manual backpropagation. Samples are rows:
/// a batch is n x in, a dense layer maps it to n x out through W (out x in).
namespace dlrisk::nn {

enum class Activation { Sigmoid, Relu, Linear, Softmax };
enum class Mode { Train, Predict };

const char* to_string(Activation a);
Activation parse_activation(std::string_view s);

template <typename Scalar>
struct DenseLayer {
  MatrixX<Scalar> W;  ///< out x in
  VectorX<Scalar> b;
  Activation activation = Activation::Sigmoid;
  /// Negative-side slope of Relu; 0 is the plain rectifier.
  Scalar leak = 0;

  Eigen::Index inputs() const { return W.cols(); }
  Eigen::Index outputs() const { return W.rows(); }
};

template <typename Scalar>
struct BatchNormLayer {
  VectorX<Scalar> gamma;
  VectorX<Scalar> beta;
  VectorX<Scalar> running_mean;
  VectorX<Scalar> running_var;
  Scalar momentum = Scalar(0.1);
  Scalar epsilon = Scalar(1e-8);
  /// Running statistics start from the first training batch.
  bool initialised = false;

  static BatchNormLayer identity(Eigen::Index units) {
    BatchNormLayer bn;
    bn.gamma = VectorX<Scalar>::Ones(units);
    bn.beta = VectorX<Scalar>::Zero(units);
    bn.running_mean = VectorX<Scalar>::Zero(units);
    bn.running_var = VectorX<Scalar>::Ones(units);
    return bn;
  }
};

/// Dense -> (batch norm) -> activation -> (dropout). In predict mode dropout
/// scales activations by the keep probability 1 - rate.
template <typename Scalar>
struct Block {
  DenseLayer<Scalar> dense;
  std::optional<BatchNormLayer<Scalar>> bn;
  Scalar dropout = 0;
};

template <typename Scalar>
struct Network {
  std::vector<Block<Scalar>> blocks;

  Eigen::Index inputs() const { return blocks.empty() ? 0 : blocks.front().dense.inputs(); }
  Eigen::Index outputs() const { return blocks.empty() ? 0 : blocks.back().dense.outputs(); }
  std::size_t size() const { return blocks.size(); }
};

/// Uniform in +-sqrt(6 / (rows + cols)).
template <typename Scalar = double>
MatrixX<Scalar> xavier_init(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  require(rows > 0 && cols > 0, "xavier_init needs positive dimensions");
  const double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
  std::uniform_real_distribution<double> u(-bound, bound);
  MatrixX<Scalar> w(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) w(i, j) = static_cast<Scalar>(u(rng));
  return w;
}

template <typename Scalar>
DenseLayer<Scalar> make_dense(Eigen::Index in, Eigen::Index out, Activation act, Rng& rng) {
  return {xavier_init<Scalar>(out, in, rng), VectorX<Scalar>::Zero(out), act, Scalar(0)};
}

template <typename Derived>
MatrixX<typename Derived::Scalar> softmax_rows(const Eigen::MatrixBase<Derived>& z) {
  using Scalar = typename Derived::Scalar;
  const VectorX<Scalar> shift = z.rowwise().maxCoeff();
  MatrixX<Scalar> e = (z.colwise() - shift).array().exp();
  const VectorX<Scalar> sum = e.rowwise().sum();
  e.array().colwise() /= sum.array();
  return e;
}

template <typename Scalar>
MatrixX<Scalar> activate(const MatrixX<Scalar>& z, Activation act, Scalar leak = 0) {
  switch (act) {
    case Activation::Sigmoid:
      return (Scalar(1) + (-z.array()).exp()).inverse().matrix();
    case Activation::Relu:
      return z.array().max(leak * z.array()).matrix();
    case Activation::Linear:
      return z;
    case Activation::Softmax:
      return softmax_rows(z);
  }
  return z;
}

/// Gradient with respect to the pre-activation given the gradient with
/// respect to the activation output `a` (computed from `z`).
template <typename Scalar>
MatrixX<Scalar> activation_backward(const MatrixX<Scalar>& z, const MatrixX<Scalar>& a, const MatrixX<Scalar>& da,
                                    Activation act, Scalar leak = 0) {
  switch (act) {
    case Activation::Sigmoid:
      return (da.array() * a.array() * (Scalar(1) - a.array())).matrix();
    case Activation::Relu:
      return (z.array() > Scalar(0)).select(da.array(), leak * da.array()).matrix();
    case Activation::Linear:
      return da;
    case Activation::Softmax: {
      const VectorX<Scalar> dot = (da.array() * a.array()).rowwise().sum();
      return (a.array() * (da.colwise() - dot).array()).matrix();
    }
  }
  return da;
}

/// Values kept by a forward pass for the backward pass.
template <typename Scalar>
struct BlockCache {
  MatrixX<Scalar> input;
  MatrixX<Scalar> z;       ///< dense output
  MatrixX<Scalar> xhat;    ///< normalised z (batch norm only)
  VectorX<Scalar> inv_std; ///< batch norm only
  MatrixX<Scalar> pre;     ///< activation input
  MatrixX<Scalar> act;     ///< activation output
  MatrixX<Scalar> mask;    ///< dropout keep mask (train mode only)
};

template <typename Scalar>
struct Cache {
  std::vector<BlockCache<Scalar>> blocks;
  Mode mode = Mode::Predict;
  bool valid = false;
};

template <typename Scalar>
struct ForwardOptions {
  Mode mode = Mode::Predict;
  /// Needed in train mode when any block has dropout.
  Rng* rng = nullptr;
  /// Keep the dropout masks already stored in the cache (gradient checks).
  bool reuse_masks = false;
  /// Train mode only: move batch-norm running statistics.
  bool update_running = true;
};

namespace detail {

template <typename Scalar>
void check_finite(const MatrixX<Scalar>& m, std::size_t layer) {
  if (!m.allFinite()) throw NumericError("non-finite activation in layer " + std::to_string(layer));
}

}  // namespace detail

/// Runs a batch through the network and returns the last block's output.
/// When `cache` is given it receives everything backward needs.
template <typename Scalar>
MatrixX<Scalar> forward(Network<Scalar>& net, const MatrixX<Scalar>& x, const ForwardOptions<Scalar>& opt,
                        Cache<Scalar>* cache = nullptr) {
  require(!net.blocks.empty(), "network has no layers");
  if (x.cols() != net.inputs())
    throw InvalidArgument("input width " + std::to_string(x.cols()) + " does not match network input " +
                          std::to_string(net.inputs()));
  if (cache) {
    if (!opt.reuse_masks) cache->blocks.assign(net.blocks.size(), {});
    require(cache->blocks.size() == net.blocks.size(), "cache does not match network");
    cache->mode = opt.mode;
  }
  const bool train = opt.mode == Mode::Train;
  MatrixX<Scalar> h = x;
  for (std::size_t l = 0; l < net.blocks.size(); ++l) {
    auto& blk = net.blocks[l];
    BlockCache<Scalar> scratch;
    BlockCache<Scalar>& c = cache ? cache->blocks[l] : scratch;
    if (h.cols() != blk.dense.inputs()) throw InvalidArgument("layer " + std::to_string(l) + " width mismatch");
    c.input = h;
    c.z = (h * blk.dense.W.transpose()).rowwise() + blk.dense.b.transpose();
    if (blk.bn) {
      auto& bn = *blk.bn;
      if (train) {
        const RowVectorX<Scalar> mu = c.z.colwise().mean();
        const MatrixX<Scalar> centred = c.z.rowwise() - mu;
        const RowVectorX<Scalar> var = centred.array().square().colwise().mean();
        c.inv_std = (var.array() + bn.epsilon).rsqrt().transpose();
        c.xhat = centred.array().rowwise() * c.inv_std.transpose().array();
        if (opt.update_running) {
          const Scalar n = static_cast<Scalar>(c.z.rows());
          const RowVectorX<Scalar> unbiased = n > 1 ? RowVectorX<Scalar>(var * (n / (n - 1))) : var;
          if (!bn.initialised) {
            bn.running_mean = mu.transpose();
            bn.running_var = unbiased.transpose();
            bn.initialised = true;
          } else {
            bn.running_mean = (Scalar(1) - bn.momentum) * bn.running_mean + bn.momentum * mu.transpose();
            bn.running_var = (Scalar(1) - bn.momentum) * bn.running_var + bn.momentum * unbiased.transpose();
          }
        }
      } else {
        c.inv_std = (bn.running_var.array() + bn.epsilon).rsqrt();
        c.xhat = (c.z.rowwise() - bn.running_mean.transpose()).array().rowwise() * c.inv_std.transpose().array();
      }
      c.pre = (c.xhat.array().rowwise() * bn.gamma.transpose().array()).matrix().rowwise() + bn.beta.transpose();
    } else {
      c.pre = c.z;
    }
    c.act = activate(c.pre, blk.dense.activation, blk.dense.leak);
    h = c.act;
    if (blk.dropout > Scalar(0)) {
      if (train) {
        if (!opt.reuse_masks || c.mask.rows() != h.rows() || c.mask.cols() != h.cols()) {
          require(opt.rng != nullptr, "train-mode dropout needs a random engine");
          c.mask.resize(h.rows(), h.cols());
          std::bernoulli_distribution keep(1.0 - static_cast<double>(blk.dropout));
          for (Eigen::Index j = 0; j < h.cols(); ++j)
            for (Eigen::Index i = 0; i < h.rows(); ++i) c.mask(i, j) = keep(*opt.rng) ? Scalar(1) : Scalar(0);
        }
        h = h.cwiseProduct(c.mask);
      } else {
        h *= Scalar(1) - blk.dropout;
      }
    }
    detail::check_finite(h, l);
  }
  if (cache) cache->valid = true;
  return h;
}

template <typename Scalar>
MatrixX<Scalar> predict(const Network<Scalar>& net, const MatrixX<Scalar>& x) {
  // predict mode never mutates the network
  return forward(const_cast<Network<Scalar>&>(net), x, ForwardOptions<Scalar>{});
}

template <typename Scalar>
struct BlockGrad {
  MatrixX<Scalar> dW;
  VectorX<Scalar> db;
  VectorX<Scalar> dgamma;
  VectorX<Scalar> dbeta;
};

template <typename Scalar>
struct Gradients {
  std::vector<BlockGrad<Scalar>> blocks;
  /// Gradient with respect to the network input.
  MatrixX<Scalar> input;

  Scalar squared_norm() const {
    Scalar s = 0;
    for (const auto& g : blocks) {
      s += g.dW.squaredNorm() + g.db.squaredNorm();
      if (g.dgamma.size()) s += g.dgamma.squaredNorm() + g.dbeta.squaredNorm();
    }
    return s;
  }
};

/// Where the gradient handed to `backward` is taken.
enum class GradientAt {
  Output,        ///< d loss / d (network output)
  PreActivation  ///< d loss / d (last block's activation input), e.g. softmax + NLL
};

/// Backpropagates through a train- or predict-mode cache. `lambda` adds the
/// weight-decay gradient 2 lambda W (weights only, not biases or batch-norm
/// parameters).
template <typename Scalar>
Gradients<Scalar> backward(const Network<Scalar>& net, const Cache<Scalar>& cache, const MatrixX<Scalar>& grad,
                           GradientAt at = GradientAt::Output, Scalar lambda = 0) {
  if (!cache.valid || cache.blocks.size() != net.blocks.size())
    throw InvalidArgument("backward called without a matching forward cache");
  Gradients<Scalar> g;
  g.blocks.resize(net.blocks.size());
  MatrixX<Scalar> d = grad;
  const bool train = cache.mode == Mode::Train;
  for (std::size_t k = net.blocks.size(); k-- > 0;) {
    const auto& blk = net.blocks[k];
    const auto& c = cache.blocks[k];
    auto& out = g.blocks[k];
    MatrixX<Scalar> dpre;
    if (k + 1 == net.blocks.size() && at == GradientAt::PreActivation) {
      dpre = d;
    } else {
      if (blk.dropout > Scalar(0)) d = train ? MatrixX<Scalar>(d.cwiseProduct(c.mask)) : MatrixX<Scalar>(d * (Scalar(1) - blk.dropout));
      dpre = activation_backward(c.pre, c.act, d, blk.dense.activation, blk.dense.leak);
    }
    MatrixX<Scalar> dz;
    if (blk.bn) {
      const auto& bn = *blk.bn;
      out.dgamma = (dpre.array() * c.xhat.array()).colwise().sum().transpose();
      out.dbeta = dpre.colwise().sum().transpose();
      const MatrixX<Scalar> dxhat = dpre.array().rowwise() * bn.gamma.transpose().array();
      if (train) {
        const Scalar n = static_cast<Scalar>(dxhat.rows());
        const RowVectorX<Scalar> sum_d = dxhat.colwise().sum();
        const RowVectorX<Scalar> sum_dx = (dxhat.array() * c.xhat.array()).colwise().sum();
        MatrixX<Scalar> t = (n * dxhat).rowwise() - sum_d;
        t -= (c.xhat.array().rowwise() * sum_dx.array()).matrix();
        dz = (t.array().rowwise() * (c.inv_std.transpose().array() / n)).matrix();
      } else {
        dz = dxhat.array().rowwise() * c.inv_std.transpose().array();
      }
    } else {
      dz = dpre;
    }
    out.dW = dz.transpose() * c.input;
    if (lambda != Scalar(0)) out.dW += Scalar(2) * lambda * blk.dense.W;
    out.db = dz.colwise().sum().transpose();
    d = dz * blk.dense.W;
  }
  g.input = std::move(d);
  return g;
}

}  // namespace dlrisk::nn
