#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "dlrisk/baselines.hpp"
#include "dlrisk/eval.hpp"
#include "dlrisk/features.hpp"
#include "dlrisk/synthgen.hpp"

/// Hedging policies and their P&L comparison. Every decision about a trade
/// uses only the trader's earlier trades.
namespace dlrisk::hedging {

/// What a policy may know about a focal trade.
struct TradeContext {
  std::int64_t trader_id = 0;
  int trade_seq = 0;
  /// Up to `window` trades immediately before the focal trade.
  features::WindowSummary trailing;
  /// Sum of pnl over every earlier trade.
  double cumulative_pnl = 0.0;
  int history = 0;
};

/// Contexts for the listed (trader, trade_seq) pairs. Trades must be grouped
/// by trader and ordered by trade_seq.
std::vector<TradeContext> trade_contexts(const std::vector<synth::TradeRecord>& trades,
                                         const std::vector<std::int64_t>& trader_id, const std::vector<int>& trade_seq,
                                         int window = 20);

/// Means of trailing statistics over training contexts with a history.
struct PopulationStats {
  double sharpe = 0.0;
  double stake = 0.0;
  double frequency = 0.0;
  double duration = 0.0;
};

PopulationStats population_stats(const std::vector<TradeContext>& training);

/// Hedge iff trailing pnl / margin > threshold; no history -> no hedge.
bool stx_policy(const TradeContext& c, double threshold = 0.05);
/// Trailing Sharpe above the population mean.
bool custom1_policy(const TradeContext& c, const PopulationStats& s);
enum class Combine { And, Or };
/// Larger stakes, higher frequency and shorter durations than the population.
bool custom2_policy(const TradeContext& c, const PopulationStats& s, Combine mode = Combine::And);
/// Positive track record.
bool custom3_policy(const TradeContext& c);
/// At least two of three votes.
bool ensemble_policy(bool a, bool b, bool c);

/// Depth-2 CART; hedge iff its probability exceeds 0.5.
class Ctree2Policy {
 public:
  void fit(const Matrix& x, const IntVector& y, const features::FeatureSchema& schema, std::uint64_t seed);
  std::vector<bool> decide(const Matrix& x) const;
  /// Names of the features used by the fitted splits.
  std::vector<std::string> split_features() const { return split_names_; }
  const baselines::DecisionTree& tree() const { return tree_; }

 private:
  baselines::DecisionTree tree_{baselines::TreeParams{2, 2, 1, 0}};
  std::vector<std::string> split_names_;
};

/// Hedge exactly the trades on which the maker would lose more than the
/// hedge cost. Needs realised pnl, so it is for evaluation only.
std::vector<bool> oracle_decisions(const Vector& pnl, const eval::MonetaryModel& money = {});

struct PolicyResult {
  std::string policy;
  double mean_pnl = 0.0;
  long n_trades = 0;
  double hedge_rate = 0.0;
};

struct NamedDecisions {
  std::string policy;
  std::vector<bool> hedge;
};

/// Mean maker P&L per trade for each policy, sorted by decreasing P&L (ties
/// keep the input order).
std::vector<PolicyResult> compare_policies(const std::vector<NamedDecisions>& policies, const Vector& pnl,
                                           const eval::MonetaryModel& money = {});

/// policies.csv: policy,mean_pnl_gbp,n_trades,hedge_rate
void write_policies_csv(const std::vector<PolicyResult>& results, const std::filesystem::path& path);

}  // namespace dlrisk::hedging
