#include "dlrisk/dataprep.hpp"

#include <nlohmann/json.hpp>

namespace dlrisk::prep {

namespace {

using nlohmann::json;

json to_array(const Vector& v) { return json(std::vector<double>(v.data(), v.data() + v.size())); }

Vector from_array(const json& j) {
  const auto values = j.get<std::vector<double>>();
  return Eigen::Map<const Vector>(values.data(), static_cast<Eigen::Index>(values.size()));
}

json stats_json(const PrepStats& s) {
  return {{"mean", to_array(s.mean)},
          {"std", to_array(s.std)},
          {"min", to_array(s.min)},
          {"max", to_array(s.max)},
          {"missing", std::vector<int>(s.missing.data(), s.missing.data() + s.missing.size())}};
}

PrepStats stats_from(const json& j) {
  PrepStats s;
  s.mean = from_array(j.at("mean"));
  s.std = from_array(j.at("std"));
  s.min = from_array(j.at("min"));
  s.max = from_array(j.at("max"));
  const auto missing = j.at("missing").get<std::vector<int>>();
  s.missing = Eigen::Map<const IntVector>(missing.data(), static_cast<Eigen::Index>(missing.size()));
  const auto p = s.mean.size();
  if (s.std.size() != p || s.min.size() != p || s.max.size() != p || s.missing.size() != p)
    throw SchemaError("prep stats: column counts disagree");
  if ((s.min.array() > s.max.array()).any() || (s.std.array() < 0.0).any())
    throw SchemaError("prep stats: min > max or negative std");
  return s;
}

}  // namespace

std::string PrepStats::to_json() const { return stats_json(*this).dump(2); }

PrepStats PrepStats::from_json(const std::string& text) {
  try {
    return stats_from(json::parse(text));
  } catch (const json::exception& e) {
    throw SchemaError(std::string("prep stats: ") + e.what());
  }
}

Matrix Preprocessor::fit_transform(const Matrix& train) {
  require(train.rows() > 0, "cannot fit preprocessing on an empty matrix");
  const PrepStats raw = column_stats(train);
  const Matrix imputed = impute_em(train, options_.em_max_iter, options_.em_tol, &gaussian_);
  const PrepStats centre = column_stats(imputed);
  const Matrix clipped = clip_chebyshev(imputed, centre, options_.chebyshev_k);
  const PrepStats range = column_stats(clipped);
  stats_.mean = centre.mean;
  stats_.std = centre.std;
  stats_.min = range.min;
  stats_.max = range.max;
  stats_.missing = raw.missing;
  fitted_ = true;
  return minmax_apply(clipped, stats_);
}

Matrix Preprocessor::transform(const Matrix& x) const {
  require(fitted_, "preprocessor used before fit");
  const Matrix imputed = impute_conditional(x, gaussian_);
  return minmax_apply(clip_chebyshev(imputed, stats_, options_.chebyshev_k), stats_);
}

std::string Preprocessor::to_json() const {
  require(fitted_, "preprocessor used before fit");
  const auto p = gaussian_.mean.size();
  json j = {{"chebyshev_k", options_.chebyshev_k},
            {"em_max_iter", options_.em_max_iter},
            {"em_tol", options_.em_tol},
            {"stats", stats_json(stats_)},
            {"em_mean", to_array(gaussian_.mean)},
            {"em_cov", to_array(gaussian_.cov.reshaped())},
            {"columns", p}};
  return j.dump();
}

Preprocessor Preprocessor::from_json(const std::string& text) {
  try {
    const json j = json::parse(text);
    Options o;
    o.chebyshev_k = j.at("chebyshev_k").get<double>();
    o.em_max_iter = j.at("em_max_iter").get<int>();
    o.em_tol = j.at("em_tol").get<double>();
    Preprocessor pre(o);
    pre.stats_ = stats_from(j.at("stats"));
    const auto p = j.at("columns").get<Eigen::Index>();
    pre.gaussian_.mean = from_array(j.at("em_mean"));
    const Vector cov = from_array(j.at("em_cov"));
    if (pre.gaussian_.mean.size() != p || cov.size() != p * p || pre.stats_.cols() != p)
      throw SchemaError("preprocessor: column counts disagree");
    pre.gaussian_.cov = cov.reshaped(p, p);
    pre.fitted_ = true;
    return pre;
  } catch (const json::exception& e) {
    throw SchemaError(std::string("preprocessor: ") + e.what());
  }
}

}  // namespace dlrisk::prep
