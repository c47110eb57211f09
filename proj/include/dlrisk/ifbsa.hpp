#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "dlrisk/classifier.hpp"
#include "dlrisk/core.hpp"
#include "dlrisk/dataprep.hpp"
#include "dlrisk/features.hpp"

/// Leave-one-feature-out sensitivity analysis fused across classifiers with
/// performance-based weights.
namespace dlrisk::ifbsa {

/// Floor applied to 1 - AUC before taking error ratios.
inline constexpr double kErrorFloor = 1e-6;

/// A fixed (train, validation) split of already preprocessed rows.
struct Split {
  Matrix x_train;
  IntVector y_train;
  Matrix x_valid;
  IntVector y_valid;
  std::vector<std::int64_t> groups_train;
};

/// Trader-grouped split; preprocessing is fitted on the training part only.
Split make_split(const features::FeatureMatrix& data, double validation_fraction, std::uint64_t seed,
                 const prep::Preprocessor::Options& prep = {});

/// error(without k) / error(with k) with error = 1 - validation AUC.
double error_ratio(double auc_without, double auc_with);

/// Validation AUC of a classifier trained on the given columns of the split.
double validation_auc(const NamedFactory& factory, const Split& split, const std::vector<int>& columns,
                      std::uint64_t seed);

/// Raw leave-one-out ratio of one feature (retraining without it).
double loo_importance(const NamedFactory& factory, const Split& split, int feature, std::uint64_t seed);

/// Normalised weights: max(raw - 1, 0) / sum, uniform when no feature
/// raises the error when removed. Rows sum to 1.
Vector normalize_importance(const Vector& raw);

struct ImportanceTable {
  std::vector<std::string> classifiers;
  std::vector<std::string> features;
  std::vector<features::FeatureGroup> groups;
  Matrix raw;            ///< classifiers x features
  Matrix normalized;     ///< V
  Vector auc;            ///< validation AUC with every feature
  Vector omega;          ///< classifier weights
  Vector fused;          ///< per feature
  std::array<double, features::kFeatureGroups> group_totals{};
};

/// omega_t = (AUC_t - 0.5)+ / sum; fused_k = sum_t omega_t V_tk.
/// Throws when no classifier beats chance.
void fuse(ImportanceTable& table);

/// Sums of fused weights per group.
std::array<double, features::kFeatureGroups> group_importance(const Vector& fused,
                                                               const std::vector<features::FeatureGroup>& groups);

/// Full analysis: base fits, one retraining per (classifier, feature), fusion
/// and group totals.
ImportanceTable analyze(const Split& split, const features::FeatureSchema& schema,
                        const std::vector<NamedFactory>& classifiers, std::uint64_t seed);

/// importance.csv: classifier,feature,raw,normalized
void write_importance_csv(const ImportanceTable& table, const std::filesystem::path& path);
/// fused.csv: feature,group,fused_weight
void write_fused_csv(const ImportanceTable& table, const std::filesystem::path& path);

}  // namespace dlrisk::ifbsa
