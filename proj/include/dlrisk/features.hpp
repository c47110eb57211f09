#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dlrisk/core.hpp"
#include "dlrisk/synthgen.hpp"

namespace dlrisk::features {

enum class FeatureGroup { Demographics = 0, PastPerformance = 1, MarketChannel = 2, Disposition = 3, Discipline = 4 };
inline constexpr int kFeatureGroups = 5;

enum class FeatureKind { Numeric, Dummy };

const char* to_string(FeatureGroup g);
FeatureGroup parse_group(std::string_view s);

struct FeatureSchema {
  std::vector<std::string> names;
  std::vector<FeatureGroup> groups;
  std::vector<FeatureKind> kinds;

  Eigen::Index size() const { return static_cast<Eigen::Index>(names.size()); }
  void add(std::string name, FeatureGroup group, FeatureKind kind = FeatureKind::Numeric);
  /// Index of a column; throws InvalidArgument when absent.
  int index_of(std::string_view name) const;
  bool contains(std::string_view name) const;
  /// Stable hash of names and groups, used to reject mismatched inputs.
  std::string fingerprint() const;
  /// Columns belonging to a group.
  std::vector<int> columns_of(FeatureGroup g) const;
  /// Schema with the listed columns removed.
  FeatureSchema without(int column) const;

  std::string to_json() const;
  static FeatureSchema from_json(const std::string& text);

  friend bool operator==(const FeatureSchema&, const FeatureSchema&) = default;
};

struct FeatureConfig {
  int window = 20;
  int horizon = 100;
  /// Number of future trades skipped before the label window starts.
  int label_offset = 0;
  double threshold = 0.05;
  int min_future = 20;
  /// Labelled rows kept per trader, evenly spaced over the trader's history;
  /// 0 keeps all.
  int examples_per_trader = 10;
  /// Extra pairwise products, appended after the built-in columns.
  std::vector<std::pair<std::string, std::string>> interactions;
};

/// Per-trade feature rows plus the bookkeeping needed for monetary evaluation.
/// Missing cells are NaN.
struct FeatureMatrix {
  FeatureSchema schema;
  Matrix x;
  /// +1 hedge, -1 no hedge, 0 unlabelled.
  IntVector label;
  std::vector<std::int64_t> trader_id;
  std::vector<int> trade_seq;
  Vector pnl;
  Vector margin;

  Eigen::Index rows() const { return x.rows(); }
  /// Class indices (1 = hedge); requires every row labelled.
  IntVector classes() const;
  FeatureMatrix subset(const std::vector<int>& rows) const;
  /// Drops a column (used by leave-one-feature-out importance).
  FeatureMatrix without_column(int column) const;
};

/// Statistics of a set of consecutive closed trades.
struct WindowSummary {
  int count = 0;
  double sum_pnl = 0.0;
  double sum_margin = 0.0;
  double mean_return = 0.0;
  double std_return = 0.0;
  /// Mean / st.dev. of per-trade returns; 0 when the st.dev. vanishes.
  double sharpe = 0.0;
  bool sharpe_defined = false;
  double mean_stake = 0.0;
  double mean_duration_minutes = 0.0;
  /// Trades per day over the window's span.
  double trade_frequency = 0.0;
};

WindowSummary summarize(std::span<const synth::TradeRecord> trades);

/// Builds one row per trade from the trades strictly before it. Trades must be
/// grouped by trader and ordered by trade_seq. Labels are filled in.
FeatureMatrix build_features(const std::vector<synth::TradeRecord>& trades,
                             const std::vector<synth::TraderProfile>& profiles, const FeatureConfig& config = {});

/// Forward-looking labels (+1/-1, 0 when fewer than min_future future trades
/// or a non-positive margin sum).
IntVector label_trades(const std::vector<synth::TradeRecord>& trades, const FeatureConfig& config = {});

/// Labelled rows, subsampled per trader as configured.
FeatureMatrix labelled_rows(const FeatureMatrix& all, int examples_per_trader);

/// Feature matrix ready for modelling: build, label, subsample.
FeatureMatrix build_dataset(const std::vector<synth::TradeRecord>& trades,
                            const std::vector<synth::TraderProfile>& profiles, const FeatureConfig& config = {});

struct FisherScore {
  int column = 0;
  double score = 0.0;
};

/// (mu_A - mu_B)^2 / (var_A + var_B) per column, descending. Columns
/// separating perfectly with zero within-class variance score +infinity.
std::vector<FisherScore> fisher_scores(const Matrix& x, const IntVector& signed_labels);

/// features.csv: trader_id,trade_seq,pnl,margin,<features...>,label
void write_features_csv(const FeatureMatrix& fm, const std::filesystem::path& path);
FeatureMatrix read_features_csv(const std::filesystem::path& csv, const std::filesystem::path& schema_json);
void write_schema_json(const FeatureSchema& schema, const std::filesystem::path& path);

}  // namespace dlrisk::features
