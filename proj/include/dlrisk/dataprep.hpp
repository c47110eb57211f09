#pragma once

#include <cmath>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "dlrisk/core.hpp"

/// Cleansing applied before modelling: EM imputation, Chebyshev clipping and
/// min/max scaling. Missing cells are NaN. Everything is fitted on training
/// rows only and replayed on other rows from frozen statistics.
namespace dlrisk::prep {

/// Per-column statistics of a training matrix. mean/std describe the imputed
/// data (they drive clipping); min/max describe the clipped data (they drive
/// scaling); `missing` counts NaN cells before imputation.
struct PrepStats {
  Vector mean;
  Vector std;
  Vector min;
  Vector max;
  IntVector missing;

  Eigen::Index cols() const { return mean.size(); }
  std::string to_json() const;
  static PrepStats from_json(const std::string& text);

  friend bool operator==(const PrepStats& a, const PrepStats& b) {
    return a.mean == b.mean && a.std == b.std && a.min == b.min && a.max == b.max && a.missing == b.missing;
  }
};

/// Mean and covariance of the multivariate Gaussian fitted by `impute_em`.
template <typename Scalar>
struct Gaussian {
  VectorX<Scalar> mean;
  MatrixX<Scalar> cov;
};

template <typename Derived>
Eigen::Index count_missing(const Eigen::MatrixBase<Derived>& x) {
  return x.array().isNaN().count();
}

/// Column means, ignoring NaN. Throws when a column has no observed value.
template <typename Derived>
VectorX<typename Derived::Scalar> observed_means(const Eigen::MatrixBase<Derived>& x) {
  using Scalar = typename Derived::Scalar;
  VectorX<Scalar> mu(x.cols());
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    Scalar sum = 0;
    Eigen::Index n = 0;
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      if (std::isnan(x(i, j))) continue;
      sum += x(i, j);
      ++n;
    }
    if (n == 0) throw InvalidArgument("column " + std::to_string(j) + " has no observed value");
    mu(j) = sum / static_cast<Scalar>(n);
  }
  return mu;
}

namespace detail {

/// Fills the missing cells of every row from the Gaussian's conditional mean
/// given the observed cells. Rows sharing a missingness pattern share one
/// factorisation.
template <typename Scalar>
void conditional_fill(MatrixX<Scalar>& out, const std::vector<std::vector<bool>>& missing_mask,
                      const Gaussian<Scalar>& g) {
  const Eigen::Index p = out.cols();
  std::map<std::vector<bool>, std::vector<Eigen::Index>> patterns;
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    const auto& m = missing_mask[static_cast<std::size_t>(i)];
    bool any = false;
    for (bool b : m) any = any || b;
    if (any) patterns[m].push_back(i);
  }
  const Scalar jitter = std::max<Scalar>(g.cov.diagonal().mean(), Scalar(1)) * Scalar(1e-10);
  for (const auto& [mask, rows] : patterns) {
    std::vector<Eigen::Index> mis, obs;
    for (Eigen::Index j = 0; j < p; ++j) (mask[static_cast<std::size_t>(j)] ? mis : obs).push_back(j);
    const auto nm = static_cast<Eigen::Index>(mis.size());
    const auto no = static_cast<Eigen::Index>(obs.size());
    if (no == 0) {
      for (Eigen::Index i : rows)
        for (Eigen::Index a = 0; a < nm; ++a) out(i, mis[a]) = g.mean(mis[a]);
      continue;
    }
    MatrixX<Scalar> soo(no, no), smo(nm, no);
    for (Eigen::Index a = 0; a < no; ++a)
      for (Eigen::Index b = 0; b < no; ++b) soo(a, b) = g.cov(obs[a], obs[b]);
    for (Eigen::Index a = 0; a < nm; ++a)
      for (Eigen::Index b = 0; b < no; ++b) smo(a, b) = g.cov(mis[a], obs[b]);
    soo.diagonal().array() += jitter;
    // regression coefficients of the missing block on the observed block
    const MatrixX<Scalar> beta = soo.ldlt().solve(smo.transpose()).transpose();
    VectorX<Scalar> dev(no);
    for (Eigen::Index i : rows) {
      for (Eigen::Index b = 0; b < no; ++b) dev(b) = out(i, obs[b]) - g.mean(obs[b]);
      const VectorX<Scalar> fill = beta * dev;
      for (Eigen::Index a = 0; a < nm; ++a) out(i, mis[a]) = g.mean(mis[a]) + fill(a);
    }
  }
}

template <typename Derived>
std::vector<std::vector<bool>> missing_mask(const Eigen::MatrixBase<Derived>& x) {
  std::vector<std::vector<bool>> mask(static_cast<std::size_t>(x.rows()), std::vector<bool>(x.cols()));
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    for (Eigen::Index j = 0; j < x.cols(); ++j) mask[i][j] = std::isnan(x(i, j));
  return mask;
}

}  // namespace detail

/// EM imputation under a multivariate Gaussian: starts from column means and
/// alternates (mean, covariance) estimation with conditional-mean fills until
/// the change in imputed cells has norm below `tol` or `max_iter` is reached.
/// The fitted Gaussian is written to `fitted` when given.
template <typename Derived>
MatrixX<typename Derived::Scalar> impute_em(const Eigen::MatrixBase<Derived>& x, int max_iter = 50,
                                            double tol = 1e-6,
                                            Gaussian<typename Derived::Scalar>* fitted = nullptr) {
  using Scalar = typename Derived::Scalar;
  require(max_iter >= 0, "max_iter must be non-negative");
  MatrixX<Scalar> out = x;
  const VectorX<Scalar> start = observed_means(x);
  Gaussian<Scalar> g;
  if (count_missing(x) == 0) {
    if (fitted) {
      g.mean = out.colwise().mean().transpose();
      const MatrixX<Scalar> c = out.rowwise() - g.mean.transpose();
      g.cov = (c.transpose() * c) / static_cast<Scalar>(std::max<Eigen::Index>(out.rows(), 1));
      *fitted = std::move(g);
    }
    return out;
  }
  const auto mask = detail::missing_mask(x);
  for (Eigen::Index i = 0; i < out.rows(); ++i)
    for (Eigen::Index j = 0; j < out.cols(); ++j)
      if (mask[i][j]) out(i, j) = start(j);

  for (int iter = 0; iter < max_iter; ++iter) {
    g.mean = out.colwise().mean().transpose();
    const MatrixX<Scalar> c = out.rowwise() - g.mean.transpose();
    g.cov = (c.transpose() * c) / static_cast<Scalar>(out.rows());
    const MatrixX<Scalar> before = out;
    detail::conditional_fill(out, mask, g);
    if (!out.allFinite()) throw NumericError("EM imputation produced non-finite values");
    if ((out - before).norm() < tol) break;
  }
  if (fitted) *fitted = std::move(g);
  return out;
}

/// Fills missing cells of new rows from a Gaussian fitted on training rows.
template <typename Derived>
MatrixX<typename Derived::Scalar> impute_conditional(const Eigen::MatrixBase<Derived>& x,
                                                     const Gaussian<typename Derived::Scalar>& g) {
  require(g.mean.size() == x.cols(), "imputation model has the wrong number of columns");
  MatrixX<typename Derived::Scalar> out = x;
  if (count_missing(x) > 0) detail::conditional_fill(out, detail::missing_mask(x), g);
  return out;
}

/// Clamps every column to [lo, hi] bounds given per column.
template <typename Derived, typename Lo, typename Hi>
MatrixX<typename Derived::Scalar> clamp_columns(const Eigen::MatrixBase<Derived>& x, const Eigen::MatrixBase<Lo>& lo,
                                                const Eigen::MatrixBase<Hi>& hi) {
  return x.array().max(lo.transpose().replicate(x.rows(), 1).array()).min(hi.transpose().replicate(x.rows(), 1).array());
}

/// Clamps each column to mean +- k std, using frozen statistics. Zero-std
/// columns pass through unchanged.
template <typename Derived>
MatrixX<typename Derived::Scalar> clip_chebyshev(const Eigen::MatrixBase<Derived>& x, const PrepStats& stats,
                                                 double k) {
  using Scalar = typename Derived::Scalar;
  require(k > 0.0, "chebyshev k must be positive");
  require(stats.cols() == x.cols(), "stats have the wrong number of columns");
  VectorX<Scalar> lo(x.cols()), hi(x.cols());
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    const bool flat = !(stats.std(j) > 0.0);
    lo(j) = flat ? -std::numeric_limits<Scalar>::infinity() : static_cast<Scalar>(stats.mean(j) - k * stats.std(j));
    hi(j) = flat ? std::numeric_limits<Scalar>::infinity() : static_cast<Scalar>(stats.mean(j) + k * stats.std(j));
  }
  return clamp_columns(x, lo, hi);
}

/// Population mean / standard deviation / min / max / NaN count per column;
/// NaN cells are skipped.
template <typename Derived>
PrepStats column_stats(const Eigen::MatrixBase<Derived>& x) {
  PrepStats s;
  const Eigen::Index p = x.cols();
  s.mean.resize(p);
  s.std.resize(p);
  s.min.resize(p);
  s.max.resize(p);
  s.missing.resize(p);
  for (Eigen::Index j = 0; j < p; ++j) {
    double sum = 0.0, lo = std::numeric_limits<double>::infinity(), hi = -lo;
    int n = 0;
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      const double v = static_cast<double>(x(i, j));
      if (std::isnan(v)) continue;
      sum += v;
      lo = std::min(lo, v);
      hi = std::max(hi, v);
      ++n;
    }
    const double mu = n ? sum / n : 0.0;
    double ss = 0.0;
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      const double v = static_cast<double>(x(i, j));
      if (!std::isnan(v)) ss += (v - mu) * (v - mu);
    }
    s.mean(j) = mu;
    s.std(j) = n ? std::sqrt(ss / n) : 0.0;
    s.min(j) = n ? lo : 0.0;
    s.max(j) = n ? hi : 0.0;
    s.missing(j) = static_cast<int>(x.rows()) - n;
  }
  return s;
}

/// One-shot clipping with the matrix's own statistics.
template <typename Derived>
MatrixX<typename Derived::Scalar> clip_chebyshev(const Eigen::MatrixBase<Derived>& x, double k) {
  return clip_chebyshev(x, column_stats(x), k);
}

/// Maps columns to [0,1] with frozen min/max; constant columns map to 0.5 and
/// out-of-range values clamp to the interval.
template <typename Derived>
MatrixX<typename Derived::Scalar> minmax_apply(const Eigen::MatrixBase<Derived>& x, const PrepStats& stats) {
  using Scalar = typename Derived::Scalar;
  require(stats.cols() == x.cols(), "stats have the wrong number of columns");
  MatrixX<Scalar> out(x.rows(), x.cols());
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    const double range = stats.max(j) - stats.min(j);
    if (!(range > 0.0)) {
      out.col(j).setConstant(Scalar(0.5));
      continue;
    }
    out.col(j) = ((x.col(j).array() - static_cast<Scalar>(stats.min(j))) / static_cast<Scalar>(range))
                     .max(Scalar(0))
                     .min(Scalar(1));
  }
  return out;
}

template <typename Derived>
MatrixX<typename Derived::Scalar> minmax_fit_transform(const Eigen::MatrixBase<Derived>& train, PrepStats& stats) {
  stats = column_stats(train);
  return minmax_apply(train, stats);
}

/// The full cleansing chain: impute, clip, scale. Fitted on training rows and
/// replayed unchanged on validation and test rows.
class Preprocessor {
 public:
  struct Options {
    double chebyshev_k = 3.0;
    int em_max_iter = 50;
    double em_tol = 1e-6;
  };

  Preprocessor() = default;
  explicit Preprocessor(Options options) : options_(options) {}

  Matrix fit_transform(const Matrix& train);
  Matrix transform(const Matrix& x) const;

  bool fitted() const { return fitted_; }
  const PrepStats& stats() const { return stats_; }
  const Options& options() const { return options_; }

  std::string to_json() const;
  static Preprocessor from_json(const std::string& text);

 private:
  Options options_;
  bool fitted_ = false;
  PrepStats stats_;
  Gaussian<double> gaussian_;
};

}  // namespace dlrisk::prep
