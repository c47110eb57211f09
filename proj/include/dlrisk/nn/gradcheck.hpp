#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <variant>

#include "dlrisk/nn/layers.hpp"
#include "dlrisk/nn/loss.hpp"

namespace dlrisk::nn {

enum class LossKind {
  NllSoftmax,    ///< mean NLL of a softmax head (labels are class indices)
  CrossEntropy,  ///< reconstruction cross entropy of a sigmoid output
  Mse            ///< mean squared reconstruction error
};

/// Class labels for NllSoftmax, target matrix otherwise.
template <typename Scalar>
using Target = std::variant<IntVector, MatrixX<Scalar>>;

/// Training objective: data term plus lambda * sum ||W||^2. Dropout masks in
/// `cache` are reused when `reuse_masks` is set, so repeated evaluations see
/// the same thinned network.
template <typename Scalar>
Scalar objective(Network<Scalar>& net, const MatrixX<Scalar>& x, const Target<Scalar>& target, LossKind kind,
                 Scalar lambda, Mode mode, Cache<Scalar>& cache, Rng* rng = nullptr, bool reuse_masks = false) {
  ForwardOptions<Scalar> opt;
  opt.mode = mode;
  opt.rng = rng;
  opt.reuse_masks = reuse_masks;
  opt.update_running = false;
  const MatrixX<Scalar> out = forward(net, x, opt, &cache);
  Scalar data = 0;
  switch (kind) {
    case LossKind::NllSoftmax: {
      const auto& y = std::get<IntVector>(target);
      data = loss_nll_softmax<Scalar>(cache.blocks.back().pre, y) / static_cast<Scalar>(x.rows());
      break;
    }
    case LossKind::CrossEntropy:
      data = loss_cross_entropy_l2<Scalar>(out, std::get<MatrixX<Scalar>>(target), {}, Scalar(0));
      break;
    case LossKind::Mse:
      data = loss_mse<Scalar>(out, std::get<MatrixX<Scalar>>(target));
      break;
  }
  return data + lambda * weight_penalty(net);
}

/// Analytic gradient of `objective` from a cache filled by it.
template <typename Scalar>
Gradients<Scalar> objective_gradient(const Network<Scalar>& net, const Cache<Scalar>& cache,
                                     const Target<Scalar>& target, LossKind kind, Scalar lambda) {
  if (kind == LossKind::NllSoftmax)
    return backward(net, cache, nll_softmax_grad<Scalar>(cache.blocks.back().pre, std::get<IntVector>(target)),
                    GradientAt::PreActivation, lambda);
  const auto& last = cache.blocks.back();
  const auto& blk = net.blocks.back();
  const auto& x = std::get<MatrixX<Scalar>>(target);
  if (kind == LossKind::CrossEntropy && blk.dense.activation == Activation::Sigmoid && blk.dropout == Scalar(0)) {
    // sigmoid and cross entropy combine to (z - x) / N
    return backward(net, cache, MatrixX<Scalar>((last.act - x) / static_cast<Scalar>(x.rows())),
                    GradientAt::PreActivation, lambda);
  }
  MatrixX<Scalar> out = last.act;
  if (blk.dropout > Scalar(0))
    out = cache.mode == Mode::Train ? MatrixX<Scalar>(out.cwiseProduct(last.mask))
                                    : MatrixX<Scalar>(out * (Scalar(1) - blk.dropout));
  const MatrixX<Scalar> d = kind == LossKind::Mse ? mse_grad<Scalar>(out, x) : cross_entropy_grad<Scalar>(out, x);
  return backward(net, cache, d, GradientAt::Output, lambda);
}

struct GradCheckResult {
  /// Largest per-tensor relative error ||a - n|| / max(||a|| + ||n||, 1e-4).
  /// The floor keeps tensors whose true gradient is zero (a bias followed by
  /// batch norm) from dividing round-off by round-off.
  double max_relative_error = 0.0;
  std::string worst_parameter;
  int tensors = 0;
};

namespace detail {

inline double relative_error(const Eigen::MatrixXd& a, const Eigen::MatrixXd& n) {
  return (a - n).norm() / std::max(a.norm() + n.norm(), 1e-4);
}

}  // namespace detail

/// Compares analytic gradients with central differences of step h for every
/// parameter tensor (weights, biases, batch-norm scale and shift).
inline GradCheckResult gradient_check(Network<double> net, const Eigen::MatrixXd& x, const Target<double>& target,
                                      LossKind kind, double lambda, Mode mode, Rng& rng, double h = 1e-5) {
  Cache<double> cache;
  objective(net, x, target, kind, lambda, mode, cache, &rng, false);
  const Gradients<double> analytic = objective_gradient(net, cache, target, kind, lambda);

  auto numeric = [&](auto& param) {
    Eigen::MatrixXd g(param.rows(), param.cols());
    for (Eigen::Index j = 0; j < param.cols(); ++j) {
      for (Eigen::Index i = 0; i < param.rows(); ++i) {
        const double keep = param(i, j);
        param(i, j) = keep + h;
        const double up = objective(net, x, target, kind, lambda, mode, cache, &rng, true);
        param(i, j) = keep - h;
        const double down = objective(net, x, target, kind, lambda, mode, cache, &rng, true);
        param(i, j) = keep;
        g(i, j) = (up - down) / (2.0 * h);
      }
    }
    return g;
  };

  GradCheckResult result;
  auto record = [&](const Eigen::MatrixXd& a, const Eigen::MatrixXd& n, const std::string& name) {
    const double err = detail::relative_error(a, n);
    ++result.tensors;
    if (err >= result.max_relative_error) {
      result.max_relative_error = err;
      result.worst_parameter = name;
    }
  };
  for (std::size_t l = 0; l < net.blocks.size(); ++l) {
    auto& blk = net.blocks[l];
    const auto& a = analytic.blocks[l];
    const std::string tag = "layer " + std::to_string(l);
    record(a.dW, numeric(blk.dense.W), tag + " W");
    record(a.db, numeric(blk.dense.b), tag + " b");
    if (blk.bn) {
      record(a.dgamma, numeric(blk.bn->gamma), tag + " gamma");
      record(a.dbeta, numeric(blk.bn->beta), tag + " beta");
    }
  }
  return result;
}

}  // namespace dlrisk::nn
