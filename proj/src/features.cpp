#include "dlrisk/features.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

#include "dlrisk/io.hpp"

namespace dlrisk::features {

namespace {

using synth::TradeRecord;
using synth::TraderProfile;

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kNeutralLogMinutes = 4.0943445622221;  // log(60)

bool outside_hours(const TradeRecord& t) {
  const int h = io::hour_of_day(t.open_time);
  return h < 8 || h > 16;
}

double safe_ratio(double num, double den) { return den > 0.0 ? num / den : kNaN; }

double mean_of(const std::vector<double>& v) {
  return v.empty() ? kNaN : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double sample_sd(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  // exact zero for constant input; the mean of equal values can be off by an ulp
  if (std::all_of(v.begin(), v.end(), [&](double x) { return x == v.front(); })) return 0.0;
  const double m = mean_of(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

int argmax_index(const std::array<int, synth::kMarkets>& counts) {
  return static_cast<int>(std::max_element(counts.begin(), counts.end()) - counts.begin());
}

/// Running aggregates over the complete history preceding the focal trade.
struct HistoryTotals {
  int count = 0;
  double pnl = 0.0;
  double margin = 0.0;
  double sum_return = 0.0;
  int wins = 0;
  int losses = 0;
  double win_minutes = 0.0;
  double loss_minutes = 0.0;
  double win_log_minutes = 0.0;
  double loss_log_minutes = 0.0;
  double win_pnl = 0.0;
  double loss_pnl = 0.0;  // absolute
  double stake = 0.0;
  double stake_sq = 0.0;
  int partial = 0;
  int ftse = 0;
  std::array<int, synth::kMarkets> markets{};
  double opening_pnl = 0.0;  // first `window` trades
  int opening_count = 0;

  void add(const TradeRecord& t, int window) {
    ++count;
    pnl += t.pnl;
    margin += t.margin;
    sum_return += t.return_on_margin();
    const double minutes = t.duration_minutes();
    if (t.pnl > 0.0) {
      ++wins;
      win_minutes += minutes;
      win_log_minutes += std::log(minutes);
      win_pnl += t.pnl;
    } else if (t.pnl < 0.0) {
      ++losses;
      loss_minutes += minutes;
      loss_log_minutes += std::log(minutes);
      loss_pnl += -t.pnl;
    }
    stake += t.stake;
    stake_sq += t.stake * t.stake;
    partial += t.partial_close ? 1 : 0;
    ftse += t.market == synth::Market::FTSE100 ? 1 : 0;
    ++markets[static_cast<std::size_t>(t.market)];
    if (opening_count < window) {
      opening_pnl += t.pnl;
      ++opening_count;
    }
  }
};

/// Appends values in a fixed order; the first call sequence defines the schema.
class RowEmitter {
 public:
  RowEmitter(FeatureSchema& schema, bool define) : schema_(schema), define_(define) {}

  void put(const std::string& name, FeatureGroup group, double value, FeatureKind kind = FeatureKind::Numeric) {
    if (define_) schema_.add(name, group, kind);
    values_.push_back(value);
  }
  void dummy(const std::string& name, FeatureGroup group, bool on) {
    put(name, group, on ? 1.0 : 0.0, FeatureKind::Dummy);
  }
  std::vector<double>& values() { return values_; }

 private:
  FeatureSchema& schema_;
  bool define_;
  std::vector<double> values_;
};

int salary_mode(const std::vector<TraderProfile>& profiles) {
  std::array<int, synth::kSalaryBands.size()> counts{};
  for (const auto& p : profiles)
    if (p.salary_band >= 0) ++counts[static_cast<std::size_t>(p.salary_band)];
  return static_cast<int>(std::max_element(counts.begin(), counts.end()) - counts.begin());
}

void emit_demographics(RowEmitter& e, const TraderProfile& p, int salary_fill) {
  using G = FeatureGroup;
  for (std::size_t i = 0; i < synth::kAgeBands.size(); ++i)
    e.dummy(std::string("Age_") + synth::kAgeBands[i], G::Demographics, p.age_band == static_cast<int>(i));
  for (std::size_t i = 0; i < synth::kCountryClusters.size(); ++i)
    e.dummy(std::string("Country_") + synth::kCountryClusters[i], G::Demographics,
            p.country_cluster == static_cast<int>(i));
  for (std::size_t i = 0; i < synth::kPostcodeClusters.size(); ++i)
    e.dummy(std::string("Postcode_") + synth::kPostcodeClusters[i], G::Demographics,
            p.postcode_cluster == static_cast<int>(i));
  for (std::size_t i = 0; i < synth::kEmployment.size(); ++i)
    e.dummy(std::string("Employment_") + synth::kEmployment[i], G::Demographics, p.employment == static_cast<int>(i));
  const int salary = p.salary_band >= 0 ? p.salary_band : salary_fill;
  for (std::size_t i = 0; i < synth::kSalaryBands.size(); ++i)
    e.dummy(std::string("Salary_") + synth::kSalaryBands[i], G::Demographics, salary == static_cast<int>(i));
}

/// Behavioural columns. `window` holds the most recent min(20, history)
/// prior trades; `totals` the whole prior history. With an empty history every
/// column takes its neutral default: 0 for counts, shares, returns and
/// dummies, 0.5 for win/profit rates and channel ratios, 1 for the duration,
/// amount and stake ratios, log(60 minutes) for log durations.
void emit_behaviour(RowEmitter& e, std::span<const TradeRecord> window, const HistoryTotals& totals) {
  using G = FeatureGroup;
  const bool empty = window.empty();
  const auto n = static_cast<double>(window.size());
  auto orr = [empty](double v, double neutral) { return empty ? neutral : v; };

  std::vector<double> returns, stakes, minutes, log_minutes;
  std::vector<double> win_min, loss_min, win_log, loss_log, win_pnl, loss_pnl;
  double sum_pnl = 0.0, sum_margin = 0.0, gross = 0.0, gross_profit = 0.0, points = 0.0;
  int wins = 0, shorts = 0, ftse = 0, outside = 0, partial = 0;
  int web_open = 0, mobile_open = 0, web_close = 0, mobile_close = 0, stake_up = 0, stake_down = 0;
  std::array<int, synth::kMarkets> markets{};
  for (std::size_t i = 0; i < window.size(); ++i) {
    const auto& t = window[i];
    returns.push_back(t.return_on_margin());
    stakes.push_back(t.stake);
    minutes.push_back(t.duration_minutes());
    log_minutes.push_back(std::log(t.duration_minutes()));
    sum_pnl += t.pnl;
    sum_margin += t.margin;
    gross += std::abs(t.pnl);
    gross_profit += std::max(t.pnl, 0.0);
    points += std::max(t.pnl / t.stake, 0.0);
    if (t.pnl > 0.0) {
      ++wins;
      win_min.push_back(minutes.back());
      win_log.push_back(log_minutes.back());
      win_pnl.push_back(t.pnl);
    } else if (t.pnl < 0.0) {
      loss_min.push_back(minutes.back());
      loss_log.push_back(log_minutes.back());
      loss_pnl.push_back(-t.pnl);
    }
    shorts += t.direction == synth::Direction::Short;
    ftse += t.market == synth::Market::FTSE100;
    outside += outside_hours(t);
    partial += t.partial_close;
    web_open += t.channel_open == synth::Channel::Web;
    mobile_open += t.channel_open == synth::Channel::Mobile;
    web_close += t.channel_close == synth::Channel::Web;
    mobile_close += t.channel_close == synth::Channel::Mobile;
    ++markets[static_cast<std::size_t>(t.market)];
    if (i > 0) {
      const double prev = window[i - 1].stake;
      stake_up += t.stake > 1.5 * prev;
      stake_down += t.stake < prev / 1.5;
    }
  }

  // past performance
  const double mean_ret = orr(mean_of(returns), 0.0);
  const double sd_ret = sample_sd(returns);
  const bool sharpe_defined = !empty && sd_ret > 0.0;
  const double profit_rate = empty ? 0.5 : (gross > 0.0 ? gross_profit / gross : 0.5);
  e.put("MeanReturn20", G::PastPerformance, mean_ret);
  e.put("StdReturn20", G::PastPerformance, sd_ret);
  e.put("SharpeRatio20", G::PastPerformance, sharpe_defined ? mean_ret / sd_ret : 0.0);
  e.dummy("SharpeUndefined20", G::PastPerformance, !sharpe_defined);
  e.put("WinTradeRate20", G::PastPerformance, orr(wins / n, 0.5));
  e.put("ProfitRate20", G::PastPerformance, profit_rate);
  e.put("PassAvgReturn20", G::PastPerformance, orr(sum_pnl / sum_margin, 0.0));
  e.put("PointsInProfit20", G::PastPerformance, orr(points / n, 0.0));
  e.put("AvgPnl20", G::PastPerformance, orr(sum_pnl / n, 0.0));
  e.dummy("InProfit20", G::PastPerformance, sum_pnl > 0.0);
  e.dummy("InProfitAll", G::PastPerformance, totals.pnl > 0.0);
  e.put("CumReturnAll", G::PastPerformance, orr(totals.pnl / totals.margin, 0.0));
  e.put("MeanReturnAll", G::PastPerformance, orr(totals.sum_return / totals.count, 0.0));
  e.put("WinRateAll", G::PastPerformance, orr(static_cast<double>(totals.wins) / totals.count, 0.5));
  e.put("AvgOpen", G::PastPerformance, orr(totals.opening_pnl / std::max(1, totals.opening_count), 0.0));
  e.put("MaxWinReturn20", G::PastPerformance, empty ? 0.0 : *std::max_element(returns.begin(), returns.end()));
  e.put("MaxLossReturn20", G::PastPerformance, empty ? 0.0 : *std::min_element(returns.begin(), returns.end()));
  {
    const std::size_t k = std::min<std::size_t>(5, returns.size());
    const std::vector<double> last(returns.end() - static_cast<std::ptrdiff_t>(k), returns.end());
    e.put("MeanReturn5", G::PastPerformance, orr(mean_of(last), 0.0));
  }
  e.put("StakeUpCount20", G::PastPerformance, stake_up);
  e.put("StakeDownCount20", G::PastPerformance, stake_down);
  e.put("LogTradeCount", G::PastPerformance, std::log1p(static_cast<double>(totals.count)));

  // markets and channels
  int distinct = 0, distinct_all = 0;
  for (int m = 0; m < synth::kMarkets; ++m) {
    distinct += markets[static_cast<std::size_t>(m)] > 0;
    distinct_all += totals.markets[static_cast<std::size_t>(m)] > 0;
  }
  e.put("NumMarkets20", G::MarketChannel, distinct);
  e.put("NumMarketsAll", G::MarketChannel, distinct_all);
  e.put("PerFTSE20", G::MarketChannel, orr(ftse / n, 0.0));
  e.put("PerFTSEAll", G::MarketChannel, orr(static_cast<double>(totals.ftse) / totals.count, 0.0));
  e.put("TopMarketShare20", G::MarketChannel, orr(*std::max_element(markets.begin(), markets.end()) / n, 0.0));
  e.put("AvgShortSales20", G::MarketChannel, orr(shorts / n, 0.0));
  const int top = argmax_index(markets);
  const int top_all = argmax_index(totals.markets);
  for (int m = 0; m < synth::kMarkets; ++m)
    e.dummy(std::string("TopMarket20_") + synth::to_string(static_cast<synth::Market>(m)), G::MarketChannel,
            !empty && top == m);
  for (int m = 0; m < synth::kMarkets; ++m)
    e.dummy(std::string("TopMarketAll_") + synth::to_string(static_cast<synth::Market>(m)), G::MarketChannel,
            !empty && top_all == m);
  e.put("WebOpen20", G::MarketChannel, web_open);
  e.put("MobileOpen20", G::MarketChannel, mobile_open);
  e.put("WebClose20", G::MarketChannel, web_close);
  e.put("MobileClose20", G::MarketChannel, mobile_close);
  e.put("MobileOpenRatio20", G::MarketChannel, orr(mobile_open / n, 0.5));
  e.put("MobileCloseRatio20", G::MarketChannel, orr(mobile_close / n, 0.5));
  e.dummy("AnyMobileClose20", G::MarketChannel, mobile_close > 0);

  // disposition effect
  const double duration_rate = orr(safe_ratio(mean_of(win_min), mean_of(loss_min)), 1.0);
  const double duration_rate_all =
      orr(safe_ratio(totals.win_minutes / totals.wins, totals.loss_minutes / totals.losses), 1.0);
  const double fallback_nan = win_min.empty() || loss_min.empty() ? kNaN : 0.0;
  auto when_both = [&](double v) { return std::isnan(fallback_nan) ? kNaN : v; };
  const bool both_all = totals.wins > 0 && totals.losses > 0;
  e.put("DurationRate20", G::Disposition, empty ? 1.0 : when_both(duration_rate));
  e.put("DurationRateAll", G::Disposition, empty ? 1.0 : (both_all ? duration_rate_all : kNaN));
  double win_sum = std::accumulate(win_min.begin(), win_min.end(), 0.0);
  double loss_sum = std::accumulate(loss_min.begin(), loss_min.end(), 0.0);
  e.put("DurationSumRate20", G::Disposition, empty ? 1.0 : when_both(win_sum / loss_sum));
  e.put("DurationSumRateAll", G::Disposition, empty ? 1.0 : (both_all ? totals.win_minutes / totals.loss_minutes : kNaN));
  e.put("AmountRate20", G::Disposition, empty ? 1.0 : when_both(mean_of(win_pnl) / mean_of(loss_pnl)));
  e.put("AmountRateAll", G::Disposition,
        empty ? 1.0 : (both_all ? (totals.win_pnl / totals.wins) / (totals.loss_pnl / totals.losses) : kNaN));
  e.put("LogWinDuration20", G::Disposition, empty ? kNeutralLogMinutes : mean_of(win_log));
  e.put("LogLossDuration20", G::Disposition, empty ? kNeutralLogMinutes : mean_of(loss_log));
  e.put("MinLossDuration20", G::Disposition,
        empty ? kNeutralLogMinutes
              : (loss_log.empty() ? kNaN : *std::min_element(loss_log.begin(), loss_log.end())));
  e.put("LogDurationGap20", G::Disposition, empty ? 0.0 : when_both(mean_of(loss_log) - mean_of(win_log)));
  e.put("LogDurationGapAll", G::Disposition,
        empty ? 0.0
              : (both_all ? totals.loss_log_minutes / totals.losses - totals.win_log_minutes / totals.wins : kNaN));
  e.put("ProfitxDur20", G::Disposition, empty ? 0.5 : when_both(profit_rate * duration_rate));

  // trading discipline
  const double stake_mean = orr(mean_of(stakes), 0.0);
  const double stake_sd = sample_sd(stakes);
  e.put("StakeCV20", G::Discipline, stake_mean > 0.0 ? stake_sd / stake_mean : 0.0);
  e.put("StakeStd20", G::Discipline, stake_sd);
  e.put("LogStakeMean20", G::Discipline, empty ? 0.0 : std::log(stake_mean));
  {
    double cv_all = 0.0;
    if (totals.count >= 2) {
      const double m = totals.stake / totals.count;
      const double var = std::max(0.0, (totals.stake_sq - totals.count * m * m) / (totals.count - 1));
      cv_all = std::sqrt(var) / m;
    }
    e.put("StakeCVAll", G::Discipline, cv_all);
  }
  double freq = 0.0, gap_cv = 0.0;
  if (window.size() >= 2) {
    const double span_days =
        static_cast<double>(window.back().open_time - window.front().open_time) / 86400.0;
    freq = n / std::max(span_days, 1.0 / 24.0);
    std::vector<double> gaps;
    for (std::size_t i = 1; i < window.size(); ++i)
      gaps.push_back(static_cast<double>(window[i].open_time - window[i - 1].open_time) / 86400.0);
    const double gm = mean_of(gaps);
    gap_cv = gaps.size() >= 2 && gm > 0.0 ? sample_sd(gaps) / gm : 0.0;
  }
  e.put("TradeFreq20", G::Discipline, freq);
  e.put("TradeFreqCV20", G::Discipline, gap_cv);
  e.put("OutsideHoursCount20", G::Discipline, outside);
  e.put("OutsideHoursShare20", G::Discipline, orr(outside / n, 0.0));
  e.put("PartialCloseShare20", G::Discipline, orr(partial / n, 0.0));
  e.put("PartialCloseShareAll", G::Discipline, orr(static_cast<double>(totals.partial) / totals.count, 0.0));
  e.put("LogMeanDuration20", G::Discipline, empty ? kNeutralLogMinutes : mean_of(log_minutes));
  e.put("StakeTrend20", G::Discipline, empty ? 1.0 : stakes.back() / stake_mean);
}

/// [begin, end) ranges of each trader's trades; validates ordering.
std::vector<std::pair<std::size_t, std::size_t>> trader_ranges(const std::vector<TradeRecord>& trades) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  std::size_t begin = 0;
  while (begin < trades.size()) {
    std::size_t end = begin + 1;
    while (end < trades.size() && trades[end].trader_id == trades[begin].trader_id) {
      if (trades[end].trade_seq <= trades[end - 1].trade_seq)
        throw InvalidArgument("trades must be ordered by trade_seq within each trader");
      ++end;
    }
    out.emplace_back(begin, end);
    begin = end;
  }
  return out;
}

}  // namespace

const char* to_string(FeatureGroup g) {
  switch (g) {
    case FeatureGroup::Demographics: return "demographics";
    case FeatureGroup::PastPerformance: return "past_performance";
    case FeatureGroup::MarketChannel: return "market_channel";
    case FeatureGroup::Disposition: return "disposition";
    case FeatureGroup::Discipline: return "discipline";
  }
  return "?";
}

FeatureGroup parse_group(std::string_view s) {
  for (int g = 0; g < kFeatureGroups; ++g)
    if (s == to_string(static_cast<FeatureGroup>(g))) return static_cast<FeatureGroup>(g);
  throw SchemaError("unknown feature group '" + std::string(s) + "'");
}

void FeatureSchema::add(std::string name, FeatureGroup group, FeatureKind kind) {
  names.push_back(std::move(name));
  groups.push_back(group);
  kinds.push_back(kind);
}

int FeatureSchema::index_of(std::string_view name) const {
  const auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end()) throw InvalidArgument("unknown feature '" + std::string(name) + "'");
  return static_cast<int>(it - names.begin());
}

bool FeatureSchema::contains(std::string_view name) const {
  return std::find(names.begin(), names.end(), name) != names.end();
}

std::string FeatureSchema::fingerprint() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto feed = [&h](std::string_view s) {
    for (unsigned char c : s) {
      h ^= c;
      h *= 0x100000001b3ULL;
    }
    h ^= 0xff;
    h *= 0x100000001b3ULL;
  };
  for (std::size_t i = 0; i < names.size(); ++i) {
    feed(names[i]);
    feed(to_string(groups[i]));
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::vector<int> FeatureSchema::columns_of(FeatureGroup g) const {
  std::vector<int> out;
  for (std::size_t i = 0; i < groups.size(); ++i)
    if (groups[i] == g) out.push_back(static_cast<int>(i));
  return out;
}

FeatureSchema FeatureSchema::without(int column) const {
  FeatureSchema out;
  for (std::size_t i = 0; i < names.size(); ++i)
    if (static_cast<int>(i) != column) out.add(names[i], groups[i], kinds[i]);
  return out;
}

std::string FeatureSchema::to_json() const {
  nlohmann::ordered_json j;
  j["fingerprint"] = fingerprint();
  auto& cols = j["columns"] = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < names.size(); ++i) {
    cols.push_back({{"name", names[i]},
                    {"group", to_string(groups[i])},
                    {"kind", kinds[i] == FeatureKind::Dummy ? "dummy" : "numeric"}});
  }
  return j.dump(2) + "\n";
}

FeatureSchema FeatureSchema::from_json(const std::string& text) {
  FeatureSchema s;
  try {
    const auto j = nlohmann::json::parse(text);
    for (const auto& c : j.at("columns")) {
      const auto kind = c.at("kind").get<std::string>();
      if (kind != "dummy" && kind != "numeric") throw SchemaError("unknown column kind '" + kind + "'");
      s.add(c.at("name").get<std::string>(), parse_group(c.at("group").get<std::string>()),
            kind == "dummy" ? FeatureKind::Dummy : FeatureKind::Numeric);
    }
    if (j.contains("fingerprint") && j.at("fingerprint").get<std::string>() != s.fingerprint())
      throw SchemaError("schema fingerprint does not match its columns");
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("schema.json: ") + e.what());
  }
  return s;
}

IntVector FeatureMatrix::classes() const {
  IntVector out(label.size());
  for (Eigen::Index i = 0; i < label.size(); ++i) {
    if (label(i) == 0) throw InvalidArgument("classes() requires every row to be labelled");
    out(i) = to_class(label(i));
  }
  return out;
}

FeatureMatrix FeatureMatrix::subset(const std::vector<int>& rows) const {
  FeatureMatrix out;
  out.schema = schema;
  out.x = take_rows(x, rows);
  out.label = take(label, rows);
  out.pnl = take(pnl, rows);
  out.margin = take(margin, rows);
  for (int r : rows) {
    out.trader_id.push_back(trader_id[static_cast<std::size_t>(r)]);
    out.trade_seq.push_back(trade_seq[static_cast<std::size_t>(r)]);
  }
  return out;
}

FeatureMatrix FeatureMatrix::without_column(int column) const {
  FeatureMatrix out = *this;
  out.schema = schema.without(column);
  out.x.resize(x.rows(), x.cols() - 1);
  out.x.leftCols(column) = x.leftCols(column);
  out.x.rightCols(x.cols() - 1 - column) = x.rightCols(x.cols() - 1 - column);
  return out;
}

WindowSummary summarize(std::span<const TradeRecord> trades) {
  WindowSummary s;
  s.count = static_cast<int>(trades.size());
  if (trades.empty()) return s;
  std::vector<double> returns;
  double duration = 0.0;
  for (const auto& t : trades) {
    s.sum_pnl += t.pnl;
    s.sum_margin += t.margin;
    s.mean_stake += t.stake;
    duration += t.duration_minutes();
    returns.push_back(t.return_on_margin());
  }
  const double n = static_cast<double>(trades.size());
  s.mean_stake /= n;
  s.mean_duration_minutes = duration / n;
  s.mean_return = mean_of(returns);
  s.std_return = sample_sd(returns);
  s.sharpe_defined = s.std_return > 0.0;
  s.sharpe = s.sharpe_defined ? s.mean_return / s.std_return : 0.0;
  if (trades.size() >= 2) {
    const double span_days = static_cast<double>(trades.back().open_time - trades.front().open_time) / 86400.0;
    s.trade_frequency = n / std::max(span_days, 1.0 / 24.0);
  }
  return s;
}

IntVector label_trades(const std::vector<TradeRecord>& trades, const FeatureConfig& config) {
  require(config.horizon > 0 && config.min_future > 0 && config.label_offset >= 0, "invalid label configuration");
  IntVector labels = IntVector::Zero(static_cast<Eigen::Index>(trades.size()));
  for (const auto& [begin, end] : trader_ranges(trades)) {
    for (std::size_t j = begin; j < end; ++j) {
      const std::size_t first = j + 1 + static_cast<std::size_t>(config.label_offset);
      const std::size_t last = std::min(end, first + static_cast<std::size_t>(config.horizon));
      if (first >= last || static_cast<int>(last - first) < config.min_future) continue;
      double pnl = 0.0, margin = 0.0;
      for (std::size_t k = first; k < last; ++k) {
        pnl += trades[k].pnl;
        margin += trades[k].margin;
      }
      if (!(margin > 0.0)) continue;
      labels(static_cast<Eigen::Index>(j)) = pnl / margin >= config.threshold ? +1 : -1;
    }
  }
  return labels;
}

FeatureMatrix build_features(const std::vector<TradeRecord>& trades, const std::vector<TraderProfile>& profiles,
                             const FeatureConfig& config) {
  require(config.window > 0, "window must be positive");
  std::map<std::int64_t, const TraderProfile*> by_id;
  for (const auto& p : profiles) by_id[p.trader_id] = &p;
  const int salary_fill = salary_mode(profiles);

  FeatureMatrix fm;
  std::vector<std::vector<double>> rows;
  rows.reserve(trades.size());
  bool define = true;
  for (const auto& [begin, end] : trader_ranges(trades)) {
    const auto it = by_id.find(trades[begin].trader_id);
    if (it == by_id.end())
      throw InvalidArgument("trade references unknown trader " + std::to_string(trades[begin].trader_id));
    HistoryTotals totals;
    for (std::size_t j = begin; j < end; ++j) {
      RowEmitter e(fm.schema, define);
      emit_demographics(e, *it->second, salary_fill);
      const std::size_t from = std::max(begin, j >= static_cast<std::size_t>(config.window)
                                                   ? j - static_cast<std::size_t>(config.window)
                                                   : begin);
      emit_behaviour(e, std::span<const TradeRecord>(trades.data() + from, j - from), totals);
      for (const auto& [a, b] : config.interactions) {
        const int ia = fm.schema.index_of(a);
        const int ib = fm.schema.index_of(b);
        e.put(a + "x" + b, fm.schema.groups[static_cast<std::size_t>(ia)],
              e.values()[static_cast<std::size_t>(ia)] * e.values()[static_cast<std::size_t>(ib)]);
      }
      define = false;
      rows.push_back(std::move(e.values()));
      totals.add(trades[j], config.window);
      fm.trader_id.push_back(trades[j].trader_id);
      fm.trade_seq.push_back(trades[j].trade_seq);
    }
  }
  fm.x.resize(static_cast<Eigen::Index>(rows.size()), fm.schema.size());
  fm.pnl.resize(static_cast<Eigen::Index>(rows.size()));
  fm.margin.resize(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t c = 0; c < rows[i].size(); ++c)
      fm.x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = rows[i][c];
    fm.pnl(static_cast<Eigen::Index>(i)) = trades[i].pnl;
    fm.margin(static_cast<Eigen::Index>(i)) = trades[i].margin;
  }
  fm.label = label_trades(trades, config);
  return fm;
}

FeatureMatrix labelled_rows(const FeatureMatrix& all, int examples_per_trader) {
  std::vector<int> keep;
  std::size_t begin = 0;
  const std::size_t n = all.trader_id.size();
  while (begin < n) {
    std::size_t end = begin;
    std::vector<int> labelled;
    while (end < n && all.trader_id[end] == all.trader_id[begin]) {
      if (all.label(static_cast<Eigen::Index>(end)) != 0) labelled.push_back(static_cast<int>(end));
      ++end;
    }
    const auto m = labelled.size();
    if (examples_per_trader <= 0 || m <= static_cast<std::size_t>(examples_per_trader)) {
      keep.insert(keep.end(), labelled.begin(), labelled.end());
    } else {
      const auto k = static_cast<std::size_t>(examples_per_trader);
      // evenly spaced, always including the last labelled trade
      for (std::size_t i = 0; i < k; ++i) keep.push_back(labelled[(m - 1) - (k - 1 - i) * (m - 1) / (k - 1 ? k - 1 : 1)]);
    }
    begin = end;
  }
  return all.subset(keep);
}

FeatureMatrix build_dataset(const std::vector<TradeRecord>& trades, const std::vector<TraderProfile>& profiles,
                            const FeatureConfig& config) {
  return labelled_rows(build_features(trades, profiles, config), config.examples_per_trader);
}

std::vector<FisherScore> fisher_scores(const Matrix& x, const IntVector& signed_labels) {
  require(x.rows() == signed_labels.size(), "fisher_scores: label count must match rows");
  const Eigen::Index pos = (signed_labels.array() > 0).count();
  const Eigen::Index neg = (signed_labels.array() < 0).count();
  if (pos == 0 || neg == 0) throw InvalidArgument("fisher_scores requires both classes");
  std::vector<FisherScore> out;
  for (Eigen::Index c = 0; c < x.cols(); ++c) {
    double s[2] = {0, 0}, ss[2] = {0, 0};
    double cnt[2] = {0, 0};
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      const double v = x(i, c);
      if (std::isnan(v) || signed_labels(i) == 0) continue;
      const int k = signed_labels(i) > 0 ? 1 : 0;
      s[k] += v;
      ss[k] += v * v;
      cnt[k] += 1;
    }
    double score = 0.0;
    if (cnt[0] > 0 && cnt[1] > 0) {
      const double m0 = s[0] / cnt[0], m1 = s[1] / cnt[1];
      const double v0 = std::max(0.0, ss[0] / cnt[0] - m0 * m0);
      const double v1 = std::max(0.0, ss[1] / cnt[1] - m1 * m1);
      const double gap = (m1 - m0) * (m1 - m0);
      const double var = v0 + v1;
      if (var <= 1e-300) score = gap > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
      else score = gap / var;
    }
    out.push_back({static_cast<int>(c), score});
  }
  std::stable_sort(out.begin(), out.end(), [](const FisherScore& a, const FisherScore& b) { return a.score > b.score; });
  return out;
}

void write_features_csv(const FeatureMatrix& fm, const std::filesystem::path& path) {
  std::ostringstream out;
  out << "trader_id,trade_seq,pnl,margin";
  for (const auto& n : fm.schema.names) out << ',' << n;
  out << ",label\n";
  for (Eigen::Index i = 0; i < fm.rows(); ++i) {
    out << fm.trader_id[static_cast<std::size_t>(i)] << ',' << fm.trade_seq[static_cast<std::size_t>(i)] << ','
        << io::format_double(fm.pnl(i)) << ',' << io::format_double(fm.margin(i));
    for (Eigen::Index c = 0; c < fm.x.cols(); ++c) {
      out << ',';
      if (!std::isnan(fm.x(i, c))) out << io::format_double(fm.x(i, c));
    }
    out << ',' << fm.label(i) << '\n';
  }
  io::write_text(path, out.str());
}

void write_schema_json(const FeatureSchema& schema, const std::filesystem::path& path) {
  io::write_text(path, schema.to_json());
}

FeatureMatrix read_features_csv(const std::filesystem::path& csv, const std::filesystem::path& schema_json) {
  FeatureMatrix fm;
  fm.schema = FeatureSchema::from_json(io::read_text(schema_json));
  const auto table = io::read_csv(csv);
  std::vector<std::string> expected = {"trader_id", "trade_seq", "pnl", "margin"};
  expected.insert(expected.end(), fm.schema.names.begin(), fm.schema.names.end());
  expected.push_back("label");
  io::expect_header(table, expected, "features.csv");
  const auto n = static_cast<Eigen::Index>(table.rows.size());
  const Eigen::Index p = fm.schema.size();
  fm.x.resize(n, p);
  fm.label.resize(n);
  fm.pnl.resize(n);
  fm.margin.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& f = table.rows[static_cast<std::size_t>(i)];
    fm.trader_id.push_back(io::parse_int(f[0]));
    fm.trade_seq.push_back(static_cast<int>(io::parse_int(f[1])));
    fm.pnl(i) = io::parse_double(f[2]);
    fm.margin(i) = io::parse_double(f[3]);
    for (Eigen::Index c = 0; c < p; ++c) {
      const auto& cell = f[static_cast<std::size_t>(4 + c)];
      fm.x(i, c) = cell.empty() ? kNaN : io::parse_double(cell);
    }
    const auto lab = io::parse_int(f.back());
    if (lab != 1 && lab != -1 && lab != 0) throw SchemaError("label must be +1, -1 or 0");
    fm.label(i) = static_cast<int>(lab);
  }
  return fm;
}

}  // namespace dlrisk::features
