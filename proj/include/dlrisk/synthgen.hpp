#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "dlrisk/core.hpp"
#include "dlrisk/io.hpp"

/// Synthetic spread-trading populations.
///
/// Every trader carries a latent skill class that drives both the trading
/// behaviour visible in the trade stream and the expected return on margin.
/// The class never leaves this module except through `oracle_probabilities`.
namespace dlrisk::synth {

enum class SkillClass { Skilled = 0, Overconfident = 1, Gambler = 2, Casual = 3 };
inline constexpr int kSkillClasses = 4;

enum class Market { FTSE100 = 0, DAX = 1, SP500 = 2, GBPUSD = 3, Gold = 4, UKStock = 5 };
inline constexpr int kMarkets = 6;

enum class Direction { Long = 0, Short = 1 };
enum class Channel { Web = 0, Mobile = 1 };

const char* to_string(SkillClass c);
const char* to_string(Market m);
const char* to_string(Direction d);
const char* to_string(Channel c);
Market parse_market(std::string_view s);
Direction parse_direction(std::string_view s);
Channel parse_channel(std::string_view s);

/// Margin required per GBP of stake (index points of deposit).
double margin_requirement(Market m);

inline constexpr std::array<const char*, 6> kAgeBands = {"18-24", "25-34", "35-44", "45-54", "55-64", "65+"};
inline constexpr std::array<const char*, 5> kCountryClusters = {"C1", "C2", "C3", "C4", "C5"};
inline constexpr std::array<const char*, 6> kPostcodeClusters = {"P1", "P2", "P3", "P4", "P5", "P6"};
inline constexpr std::array<const char*, 4> kEmployment = {"employed", "self_employed", "retired", "other"};
inline constexpr std::array<const char*, 5> kSalaryBands = {"S1", "S2", "S3", "S4", "S5"};

struct TraderProfile {
  std::int64_t trader_id = 0;
  int age_band = 0;
  int country_cluster = 0;
  int postcode_cluster = 0;
  int employment = 0;
  int salary_band = -1;  ///< -1 = not disclosed
  SkillClass skill_class = SkillClass::Casual;
  io::Timestamp join_time = 0;

  friend bool operator==(const TraderProfile&, const TraderProfile&) = default;
};

struct TradeRecord {
  std::int64_t trader_id = 0;
  int trade_seq = 0;  ///< 1-based per trader
  io::Timestamp open_time = 0;
  io::Timestamp close_time = 0;
  Market market = Market::FTSE100;
  Direction direction = Direction::Long;
  double stake = 0.0;   ///< GBP per point
  double margin = 0.0;  ///< GBP, stake * margin_requirement(market)
  double pnl = 0.0;     ///< trader's profit in GBP
  Channel channel_open = Channel::Web;
  Channel channel_close = Channel::Web;
  bool partial_close = false;

  double duration_minutes() const { return static_cast<double>(close_time - open_time) / 60.0; }
  double return_on_margin() const { return pnl / margin; }

  friend bool operator==(const TradeRecord&, const TradeRecord&) = default;
};

struct GeneratorConfig {
  int n_traders = 2000;
  int min_trades = 40;
  int max_trades = 160;
  double target_a_prevalence = 0.0643;
  /// Skilled, Overconfident, Gambler, Casual. When `calibrate_prevalence` is
  /// set the Skilled share is solved from `target_a_prevalence` and the other
  /// three keep their relative proportions.
  std::array<double, kSkillClasses> skill_mix = {0.05, 0.20, 0.15, 0.60};
  bool calibrate_prevalence = true;
  /// 0: skilled traders all sit in the high-stake, long-duration corner and
  /// a linear rule separates them. 1: half sit in the opposite corner, so
  /// only the stake x duration interaction identifies them.
  double nonlinearity_strength = 1.0;
  /// Per-trade return noise multiplier; larger values make past P&L a weaker
  /// predictor of the forward label.
  double return_noise = 1.0;
  std::uint64_t seed = 42;
  /// Labelling horizon mirrored by the prevalence calibration.
  int label_horizon = 100;
  int min_future = 20;

  void validate() const;
};

struct Population {
  std::vector<TraderProfile> profiles;
  std::vector<TradeRecord> trades;  ///< grouped by trader, ordered by trade_seq
};

/// Deterministic in `config.seed`.
Population generate_population(const GeneratorConfig& config);

/// P(label = hedge | skill class, number of labelled future trades) for every
/// trade, from the generator's own behaviour model. Test-harness only.
std::vector<double> oracle_probabilities(const GeneratorConfig& config, const Population& population,
                                         int horizon = 100, int min_future = 20);

/// Skilled share of traders actually used for a config (after calibration).
std::array<double, kSkillClasses> effective_skill_mix(const GeneratorConfig& config);

const std::vector<std::string>& trades_header();
const std::vector<std::string>& profiles_header();

void export_trades(const std::vector<TradeRecord>& trades, const std::filesystem::path& path);
std::vector<TradeRecord> import_trades(const std::filesystem::path& path);

/// The skill class is never written.
void export_profiles(const std::vector<TraderProfile>& profiles, const std::filesystem::path& path);
std::vector<TraderProfile> import_profiles(const std::filesystem::path& path);

}  // namespace dlrisk::synth
