#include "dlrisk/ifbsa.hpp"

#include <algorithm>
#include <numeric>

#include "dlrisk/eval.hpp"
#include "dlrisk/io.hpp"
#include "dlrisk/sda.hpp"

namespace dlrisk::ifbsa {

namespace {

Matrix take_cols(const Matrix& x, const std::vector<int>& cols) {
  Matrix out(x.rows(), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t j = 0; j < cols.size(); ++j) out.col(static_cast<Eigen::Index>(j)) = x.col(cols[j]);
  return out;
}

std::vector<int> all_columns(Eigen::Index n) {
  std::vector<int> c(static_cast<std::size_t>(n));
  std::iota(c.begin(), c.end(), 0);
  return c;
}

}  // namespace

Split make_split(const features::FeatureMatrix& data, double validation_fraction, std::uint64_t seed,
                 const prep::Preprocessor::Options& prep_options) {
  require(validation_fraction > 0.0 && validation_fraction < 1.0, "ifbsa: validation fraction must lie in (0, 1)");
  const IntVector y = data.classes();
  const auto [train, valid] = sda::holdout_split(y, &data.trader_id, validation_fraction, derive_seed(seed, "ifbsa"));
  Split s;
  prep::Preprocessor prep(prep_options);
  s.x_train = prep.fit_transform(take_rows(data.x, train));
  s.x_valid = prep.transform(take_rows(data.x, valid));
  s.y_train = take(y, train);
  s.y_valid = take(y, valid);
  for (int r : train) s.groups_train.push_back(data.trader_id[static_cast<std::size_t>(r)]);
  const auto both = [](const IntVector& v) { return (v.array() == 1).any() && (v.array() == 0).any(); };
  require(both(s.y_train) && both(s.y_valid), "ifbsa: split lacks a class");
  return s;
}

double error_ratio(double auc_without, double auc_with) {
  return std::max(1.0 - auc_without, kErrorFloor) / std::max(1.0 - auc_with, kErrorFloor);
}

double validation_auc(const NamedFactory& factory, const Split& split, const std::vector<int>& columns,
                      std::uint64_t seed) {
  auto model = factory.make();
  model->fit(take_cols(split.x_train, columns), split.y_train, FitContext{seed, &split.groups_train});
  return eval::auc(model->predict_proba(take_cols(split.x_valid, columns)), split.y_valid);
}

double loo_importance(const NamedFactory& factory, const Split& split, int feature, std::uint64_t seed) {
  const Eigen::Index p = split.x_train.cols();
  require(feature >= 0 && feature < p, "ifbsa: feature index out of range");
  require(p >= 2, "ifbsa: leave-one-out needs at least two features");
  auto rest = all_columns(p);
  rest.erase(rest.begin() + feature);
  return error_ratio(validation_auc(factory, split, rest, seed), validation_auc(factory, split, all_columns(p), seed));
}

Vector normalize_importance(const Vector& raw) {
  require(raw.size() > 0, "ifbsa: empty importance vector");
  Vector v = (raw.array() - 1.0).max(0.0);
  const double s = v.sum();
  if (!(s > 0.0)) return Vector::Constant(raw.size(), 1.0 / static_cast<double>(raw.size()));
  return v / s;
}

void fuse(ImportanceTable& t) {
  const auto n = static_cast<Eigen::Index>(t.classifiers.size());
  require(t.normalized.rows() == n && t.auc.size() == n, "ifbsa: table dimensions do not match");
  const Vector perf = (t.auc.array() - 0.5).max(0.0);
  const double total = perf.sum();
  if (!(total > 0.0)) throw NumericError("ifbsa: no classifier performs better than chance");
  t.omega = perf / total;
  t.fused = t.normalized.transpose() * t.omega;
  if (!t.groups.empty()) t.group_totals = group_importance(t.fused, t.groups);
}

std::array<double, features::kFeatureGroups> group_importance(const Vector& fused,
                                                               const std::vector<features::FeatureGroup>& groups) {
  require(static_cast<Eigen::Index>(groups.size()) == fused.size(), "ifbsa: every feature needs a group");
  std::array<double, features::kFeatureGroups> out{};
  for (std::size_t k = 0; k < groups.size(); ++k) {
    const int g = static_cast<int>(groups[k]);
    require(g >= 0 && g < features::kFeatureGroups, "ifbsa: unmapped feature group");
    out[static_cast<std::size_t>(g)] += fused(static_cast<Eigen::Index>(k));
  }
  return out;
}

ImportanceTable analyze(const Split& split, const features::FeatureSchema& schema,
                        const std::vector<NamedFactory>& classifiers, std::uint64_t seed) {
  require(!classifiers.empty(), "ifbsa: no classifiers");
  const Eigen::Index p = split.x_train.cols();
  require(schema.size() == p, "ifbsa: schema does not match the data");
  ImportanceTable t;
  t.features = schema.names;
  t.groups = schema.groups;
  const auto n = static_cast<Eigen::Index>(classifiers.size());
  t.raw.resize(n, p);
  t.normalized.resize(n, p);
  t.auc.resize(n);
  const auto all = all_columns(p);
  for (Eigen::Index c = 0; c < n; ++c) {
    const auto& f = classifiers[static_cast<std::size_t>(c)];
    t.classifiers.push_back(f.name);
    const std::uint64_t s = derive_seed(seed, f.name);
    t.auc(c) = validation_auc(f, split, all, s);
    for (Eigen::Index k = 0; k < p; ++k) {
      auto rest = all;
      rest.erase(rest.begin() + k);
      t.raw(c, k) = error_ratio(validation_auc(f, split, rest, s), t.auc(c));
    }
    t.normalized.row(c) = normalize_importance(t.raw.row(c).transpose()).transpose();
  }
  fuse(t);
  return t;
}

void write_importance_csv(const ImportanceTable& t, const std::filesystem::path& path) {
  std::string out = "classifier,feature,raw,normalized\n";
  for (Eigen::Index c = 0; c < t.raw.rows(); ++c)
    for (Eigen::Index k = 0; k < t.raw.cols(); ++k)
      out += t.classifiers[static_cast<std::size_t>(c)] + "," + t.features[static_cast<std::size_t>(k)] + "," +
             io::format_double(t.raw(c, k)) + "," + io::format_double(t.normalized(c, k)) + "\n";
  io::write_text(path, out);
}

void write_fused_csv(const ImportanceTable& t, const std::filesystem::path& path) {
  std::string out = "feature,group,fused_weight\n";
  for (std::size_t k = 0; k < t.features.size(); ++k)
    out += t.features[k] + "," + features::to_string(t.groups[k]) + "," +
           io::format_double(t.fused(static_cast<Eigen::Index>(k))) + "\n";
  io::write_text(path, out);
}

}  // namespace dlrisk::ifbsa
