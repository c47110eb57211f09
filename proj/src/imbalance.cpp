#include "dlrisk/imbalance.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace dlrisk::imbalance {

void SmoteConfig::validate() const {
  require(k_neighbors >= 1, "smote: k_neighbors must be >= 1");
  require(target_ratio > 0.0 && target_ratio <= 1.0, "smote: target_ratio must lie in (0, 1]");
}

long SmoteResult::synthetic_count() const { return std::count(synthetic.begin(), synthetic.end(), true); }

std::vector<std::vector<int>> nearest_neighbours(const Matrix& x, int k) {
  const Eigen::Index n = x.rows();
  require(k >= 1 && k < n, "nearest_neighbours: k must lie in [1, rows)");
  const Vector sq = x.rowwise().squaredNorm();
  std::vector<std::vector<int>> out(static_cast<std::size_t>(n));
  std::vector<int> order(static_cast<std::size_t>(n));
  Vector d(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    d = (sq.array() + sq(i)).matrix() - 2.0 * (x * x.row(i).transpose());
    d(i) = std::numeric_limits<double>::infinity();
    std::iota(order.begin(), order.end(), 0);
    // ties broken by index so the result does not depend on the sort
    std::partial_sort(order.begin(), order.begin() + k, order.end(),
                      [&](int a, int b) { return d(a) < d(b) || (d(a) == d(b) && a < b); });
    out[static_cast<std::size_t>(i)].assign(order.begin(), order.begin() + k);
  }
  return out;
}

SmoteResult smote(const Matrix& x, const IntVector& y, const SmoteConfig& config) {
  config.validate();
  require(x.rows() == y.size(), "smote: row count does not match label count");
  require(x.allFinite(), "smote: non-finite features");
  const long ones = (y.array() == 1).count();
  const long zeros = (y.array() == 0).count();
  require(ones + zeros == y.size(), "smote: labels must be 0 or 1");

  SmoteResult r;
  r.minority_class = ones <= zeros ? 1 : 0;
  const long majority = std::max(ones, zeros);
  const long minority = std::min(ones, zeros);
  const long target = std::lround(config.target_ratio * static_cast<double>(majority));
  const long needed = std::max(0L, target - minority);
  r.x = x;
  r.y = y;
  r.synthetic.assign(static_cast<std::size_t>(x.rows()), false);
  if (needed == 0) return r;
  if (minority < config.k_neighbors + 1)
    throw InvalidArgument("smote: minority class has " + std::to_string(minority) + " rows, needs at least k + 1 = " +
                          std::to_string(config.k_neighbors + 1));

  std::vector<int> members;
  for (Eigen::Index i = 0; i < y.size(); ++i)
    if (y(i) == r.minority_class) members.push_back(static_cast<int>(i));
  const Matrix xm = take_rows(x, members);
  const auto nn = nearest_neighbours(xm, config.k_neighbors);

  Rng rng(derive_seed(config.seed, "smote"));
  std::vector<int> order(members.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  std::uniform_int_distribution<int> pick(0, config.k_neighbors - 1);

  r.x.conservativeResize(x.rows() + needed, Eigen::NoChange);
  r.y.conservativeResize(y.size() + needed);
  for (long s = 0; s < needed; ++s) {
    const int a = order[static_cast<std::size_t>(s) % order.size()];
    const int b = nn[static_cast<std::size_t>(a)][static_cast<std::size_t>(pick(rng))];
    const double u = uniform01(rng);
    const Eigen::Index row = x.rows() + s;
    r.x.row(row) = xm.row(a) + u * (xm.row(b) - xm.row(a));
    r.y(row) = r.minority_class;
    r.synthetic.push_back(true);
    r.parents.emplace_back(members[static_cast<std::size_t>(a)], members[static_cast<std::size_t>(b)]);
  }
  return r;
}

}  // namespace dlrisk::imbalance
