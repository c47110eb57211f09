#pragma once

#include <cmath>
#include <vector>

#include "dlrisk/nn/layers.hpp"

namespace dlrisk::nn {

/// Clamp applied to probabilities inside logarithms.
inline constexpr double kProbEpsilon = 1e-12;

/// Sum of squared Frobenius norms of the dense weights (biases and batch-norm
/// parameters excluded).
template <typename Scalar>
Scalar weight_penalty(const Network<Scalar>& net) {
  Scalar s = 0;
  for (const auto& b : net.blocks) s += b.dense.W.squaredNorm();
  return s;
}

/// Reconstruction cross entropy averaged over rows plus lambda * sum ||W||^2:
/// -(1/N) sum_i sum_k [x log z + (1 - x) log(1 - z)] + lambda sum ||W||^2.
template <typename Scalar>
Scalar loss_cross_entropy_l2(const MatrixX<Scalar>& z, const MatrixX<Scalar>& x,
                             const std::vector<const MatrixX<Scalar>*>& weights, Scalar lambda) {
  if (z.rows() != x.rows() || z.cols() != x.cols()) throw InvalidArgument("cross entropy: shape mismatch");
  const Scalar eps = static_cast<Scalar>(kProbEpsilon);
  const auto zc = z.array().max(eps).min(Scalar(1) - eps);
  const Scalar ce = -(x.array() * zc.log() + (Scalar(1) - x.array()) * (Scalar(1) - zc).log()).sum();
  Scalar penalty = 0;
  for (const auto* w : weights) penalty += w->squaredNorm();
  return ce / static_cast<Scalar>(std::max<Eigen::Index>(z.rows(), 1)) + lambda * penalty;
}

/// d/dz of the data term of `loss_cross_entropy_l2`.
template <typename Scalar>
MatrixX<Scalar> cross_entropy_grad(const MatrixX<Scalar>& z, const MatrixX<Scalar>& x) {
  const Scalar eps = static_cast<Scalar>(kProbEpsilon);
  const auto zc = z.array().max(eps).min(Scalar(1) - eps);
  const Scalar n = static_cast<Scalar>(std::max<Eigen::Index>(z.rows(), 1));
  return ((zc - x.array()) / (zc * (Scalar(1) - zc)) / n).matrix();
}

/// Squared reconstruction error averaged over rows: (1/N) sum ||z - x||^2.
template <typename Scalar>
Scalar loss_mse(const MatrixX<Scalar>& z, const MatrixX<Scalar>& x) {
  if (z.rows() != x.rows() || z.cols() != x.cols()) throw InvalidArgument("mse: shape mismatch");
  return (z - x).squaredNorm() / static_cast<Scalar>(std::max<Eigen::Index>(z.rows(), 1));
}

template <typename Scalar>
MatrixX<Scalar> mse_grad(const MatrixX<Scalar>& z, const MatrixX<Scalar>& x) {
  return Scalar(2) * (z - x) / static_cast<Scalar>(std::max<Eigen::Index>(z.rows(), 1));
}

/// Negative log-likelihood of the softmax of `logits` summed over rows.
template <typename Scalar>
Scalar loss_nll_softmax(const MatrixX<Scalar>& logits, const IntVector& labels) {
  if (logits.rows() != labels.size()) throw InvalidArgument("nll: label count does not match rows");
  Scalar total = 0;
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const int y = labels(i);
    if (y < 0 || y >= logits.cols()) throw InvalidArgument("nll: label out of range");
    const Scalar m = logits.row(i).maxCoeff();
    const Scalar lse = m + std::log((logits.row(i).array() - m).exp().sum());
    total += lse - logits(i, y);
  }
  return total;
}

/// Gradient of the mean NLL, (softmax - onehot) / N, with respect to logits.
template <typename Scalar>
MatrixX<Scalar> nll_softmax_grad(const MatrixX<Scalar>& logits, const IntVector& labels) {
  MatrixX<Scalar> g = softmax_rows(logits);
  for (Eigen::Index i = 0; i < g.rows(); ++i) g(i, labels(i)) -= Scalar(1);
  return g / static_cast<Scalar>(std::max<Eigen::Index>(g.rows(), 1));
}

}  // namespace dlrisk::nn
