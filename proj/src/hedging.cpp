#include "dlrisk/hedging.hpp"

#include <algorithm>
#include <map>

#include "dlrisk/io.hpp"

namespace dlrisk::hedging {

std::vector<TradeContext> trade_contexts(const std::vector<synth::TradeRecord>& trades,
                                         const std::vector<std::int64_t>& trader_id, const std::vector<int>& trade_seq,
                                         int window) {
  require(trader_id.size() == trade_seq.size(), "trade_contexts: id and sequence counts differ");
  require(window >= 1, "trade_contexts: window must be positive");
  // first index of each trader's block
  std::map<std::int64_t, std::size_t> start;
  for (std::size_t i = 0; i < trades.size(); ++i) {
    if (i > 0 && trades[i].trader_id == trades[i - 1].trader_id) {
      if (trades[i].trade_seq <= trades[i - 1].trade_seq)
        throw InvalidArgument("trade_contexts: trades are not ordered by trade_seq");
      continue;
    }
    if (!start.emplace(trades[i].trader_id, i).second)
      throw InvalidArgument("trade_contexts: trades are not grouped by trader");
  }
  std::vector<TradeContext> out;
  out.reserve(trader_id.size());
  for (std::size_t r = 0; r < trader_id.size(); ++r) {
    const auto it = start.find(trader_id[r]);
    if (it == start.end()) throw InvalidArgument("trade_contexts: unknown trader " + std::to_string(trader_id[r]));
    std::size_t focal = it->second;
    while (focal < trades.size() && trades[focal].trader_id == trader_id[r] && trades[focal].trade_seq < trade_seq[r])
      ++focal;
    if (focal >= trades.size() || trades[focal].trader_id != trader_id[r] || trades[focal].trade_seq != trade_seq[r])
      throw InvalidArgument("trade_contexts: trade " + std::to_string(trade_seq[r]) + " of trader " +
                            std::to_string(trader_id[r]) + " not found");
    TradeContext c;
    c.trader_id = trader_id[r];
    c.trade_seq = trade_seq[r];
    c.history = static_cast<int>(focal - it->second);
    for (std::size_t k = it->second; k < focal; ++k) c.cumulative_pnl += trades[k].pnl;
    const std::size_t from = focal - std::min<std::size_t>(focal - it->second, static_cast<std::size_t>(window));
    c.trailing = features::summarize(std::span<const synth::TradeRecord>(trades.data() + from, focal - from));
    out.push_back(c);
  }
  return out;
}

PopulationStats population_stats(const std::vector<TradeContext>& training) {
  PopulationStats s;
  long n = 0, n_sharpe = 0, n_freq = 0;
  for (const auto& c : training) {
    if (c.history == 0) continue;
    ++n;
    s.stake += c.trailing.mean_stake;
    s.duration += c.trailing.mean_duration_minutes;
    if (c.trailing.sharpe_defined) {
      s.sharpe += c.trailing.sharpe;
      ++n_sharpe;
    }
    if (c.trailing.count >= 2) {
      s.frequency += c.trailing.trade_frequency;
      ++n_freq;
    }
  }
  require(n > 0, "population_stats: no training trade has a history");
  s.stake /= static_cast<double>(n);
  s.duration /= static_cast<double>(n);
  if (n_sharpe) s.sharpe /= static_cast<double>(n_sharpe);
  if (n_freq) s.frequency /= static_cast<double>(n_freq);
  return s;
}

bool stx_policy(const TradeContext& c, double threshold) {
  if (c.history == 0 || !(c.trailing.sum_margin > 0.0)) return false;
  return c.trailing.sum_pnl / c.trailing.sum_margin > threshold;
}

bool custom1_policy(const TradeContext& c, const PopulationStats& s) {
  return c.history > 0 && c.trailing.sharpe_defined && c.trailing.sharpe > s.sharpe;
}

bool custom2_policy(const TradeContext& c, const PopulationStats& s, Combine mode) {
  if (c.history == 0) return false;
  const bool stake = c.trailing.mean_stake > s.stake;
  const bool freq = c.trailing.count >= 2 && c.trailing.trade_frequency > s.frequency;
  const bool quick = c.trailing.mean_duration_minutes < s.duration;
  return mode == Combine::And ? stake && freq && quick : stake || freq || quick;
}

bool custom3_policy(const TradeContext& c) { return c.history > 0 && c.cumulative_pnl > 0.0; }

bool ensemble_policy(bool a, bool b, bool c) { return static_cast<int>(a) + static_cast<int>(b) + static_cast<int>(c) >= 2; }

void Ctree2Policy::fit(const Matrix& x, const IntVector& y, const features::FeatureSchema& schema, std::uint64_t seed) {
  require(schema.size() == x.cols(), "ctree2: schema does not match the data");
  tree_.fit(x, y, FitContext{seed, nullptr});
  split_names_.clear();
  for (int f : tree_.split_features()) split_names_.push_back(schema.names[static_cast<std::size_t>(f)]);
}

std::vector<bool> Ctree2Policy::decide(const Matrix& x) const { return eval::decide(tree_.predict_proba(x), 0.5); }

std::vector<bool> oracle_decisions(const Vector& pnl, const eval::MonetaryModel& money) {
  std::vector<bool> out(static_cast<std::size_t>(pnl.size()));
  for (Eigen::Index i = 0; i < pnl.size(); ++i) out[static_cast<std::size_t>(i)] = pnl(i) > money.hedge_cost;
  return out;
}

std::vector<PolicyResult> compare_policies(const std::vector<NamedDecisions>& policies, const Vector& pnl,
                                           const eval::MonetaryModel& money) {
  require(money.hedge_cost >= 0.0, "hedge cost must be non-negative");
  std::vector<PolicyResult> out;
  for (const auto& p : policies) {
    PolicyResult r;
    r.policy = p.policy;
    r.mean_pnl = eval::pnl_per_trade(p.hedge, pnl, money);
    r.n_trades = static_cast<long>(p.hedge.size());
    r.hedge_rate = static_cast<double>(std::count(p.hedge.begin(), p.hedge.end(), true)) /
                   static_cast<double>(p.hedge.size());
    out.push_back(r);
  }
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.mean_pnl > b.mean_pnl; });
  return out;
}

void write_policies_csv(const std::vector<PolicyResult>& results, const std::filesystem::path& path) {
  std::string out = "policy,mean_pnl_gbp,n_trades,hedge_rate\n";
  for (const auto& r : results)
    out += r.policy + "," + io::format_double(r.mean_pnl) + "," + std::to_string(r.n_trades) + "," +
           io::format_double(r.hedge_rate) + "\n";
  io::write_text(path, out);
}

}  // namespace dlrisk::hedging
