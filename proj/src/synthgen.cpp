#include "dlrisk/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace dlrisk::synth {

namespace {

struct ReturnLaw {
  double win_prob;
  double win_magnitude;   // mean return on margin of a winning trade
  double loss_magnitude;  // mean |return| of a losing trade
};

// Skilled, Overconfident, Gambler, Casual. Returns follow the class only after
// a novice phase of random length in which every class draws from the same
// law, so trailing returns are a poor guide to forward ones.
constexpr std::array<ReturnLaw, kSkillClasses> kReturns = {{
    {0.65, 0.55, 0.30},
    {0.55, 0.35, 1.00},
    {0.62, 0.28, 1.50},
    {0.55, 0.20, 0.75},
}};

// Trading style is a point in a latent space with axes disposition, log stake
// cv, log trade rate, log stake and log duration. The first three vary freely
// and carry no class information. Log stake and log duration sit near one of
// four corners (+-kCornerOffset each): skilled traders take the two corners
// where the signs agree, everyone else the two where they differ, so only
// the interaction of stake and duration identifies the skilled.
constexpr int kStyleDims = 5;
using Style = std::array<double, kStyleDims>;
constexpr Style kFreeStyleSd = {0.6, 0.5, 0.5, 0.0, 0.0};
constexpr double kCornerOffset = 1.0;
constexpr double kCornerJitter = 0.35;
constexpr double kStakeCv = 0.30;
constexpr double kMeanGapDays = 1.2;
constexpr double kLogStake = 1.9;
constexpr double kLogDuration = 5.0;
constexpr std::array<double, kMarkets> kMarketWeights = {0.30, 0.13, 0.13, 0.14, 0.11, 0.19};

constexpr double kNoviceWinProb = 0.58;
constexpr double kNoviceWinMagnitude = 0.22;
constexpr double kNoviceLossMagnitude = 0.75;
constexpr int kNoviceMin = 10;
constexpr int kNoviceMax = 90;
constexpr double kMagnitudeSigma = 0.3;
constexpr double kDurationSigma = 0.5;
constexpr double kLabelThreshold = 0.05;

struct TraderTraits {
  SkillClass skill = SkillClass::Casual;
  int novice_trades = 0;
  double win_prob = 0.5;
  double win_magnitude = 0.3;
  double loss_magnitude = 0.3;
  double base_stake = 1.0;
  double stake_cv = 0.1;
  double disposition = 0.0;  // log(mean winner duration / mean loser duration)
  double log_duration = 4.0;
  double mean_gap_days = 1.0;
  double outside_hours = 0.1;
  double mobile = 0.5;
  double partial_close = 0.1;
  double short_share = 0.4;
  double magnitude_sigma = kMagnitudeSigma;
  std::array<double, kMarkets> market_cdf{};

  /// Return law of the trader's k-th trade (1-based).
  ReturnLaw law(int k) const {
    if (k <= novice_trades) return {kNoviceWinProb, kNoviceWinMagnitude, kNoviceLossMagnitude};
    return {win_prob, win_magnitude, loss_magnitude};
  }
};

double normal(Rng& rng, double mean = 0.0, double sd = 1.0) {
  return std::normal_distribution<double>(mean, sd)(rng);
}

bool bernoulli(Rng& rng, double p) { return uniform01(rng) < p; }


double round_cents(double x) { return std::round(x * 100.0) / 100.0; }

/// Without nonlinearity the skilled all take the (+, +) corner and a linear
/// rule on stake and duration finds them; at full strength half of them take
/// (-, -) and the two classes have identical marginals.
Style draw_style(SkillClass skill, double nl, Rng& rng) {
  Style z;
  for (int i = 0; i < kStyleDims; ++i) z[i] = normal(rng, 0.0, kFreeStyleSd[i]);
  double stake_sign = 1.0, duration_sign = 1.0;
  if (skill == SkillClass::Skilled) {
    if (bernoulli(rng, 0.5 * nl)) stake_sign = duration_sign = -1.0;
  } else {
    stake_sign = bernoulli(rng, 0.5) ? 1.0 : -1.0;
    duration_sign = -stake_sign;
  }
  z[3] = stake_sign * kCornerOffset + normal(rng, 0.0, kCornerJitter);
  z[4] = duration_sign * kCornerOffset + normal(rng, 0.0, kCornerJitter);
  return z;
}

TraderTraits draw_traits(SkillClass skill, const GeneratorConfig& config, Rng& rng) {
  const auto& law = kReturns[static_cast<int>(skill)];
  const double nl = std::clamp(config.nonlinearity_strength, 0.0, 1.0);
  TraderTraits t;
  t.skill = skill;
  t.novice_trades = std::uniform_int_distribution<int>(kNoviceMin, kNoviceMax)(rng);
  t.win_prob = std::clamp(law.win_prob + normal(rng, 0.0, 0.02), 0.05, 0.95);
  t.win_magnitude = law.win_magnitude * std::exp(normal(rng, 0.0, 0.08));
  t.loss_magnitude = law.loss_magnitude * std::exp(normal(rng, 0.0, 0.08));
  t.magnitude_sigma = kMagnitudeSigma * config.return_noise;

  const Style z = draw_style(skill, nl, rng);
  t.disposition = z[0];
  t.stake_cv = kStakeCv * std::exp(z[1]);
  t.mean_gap_days = kMeanGapDays * std::exp(-z[2]);
  t.base_stake = std::exp(kLogStake + z[3] + normal(rng, 0.0, 0.3));
  t.log_duration = kLogDuration + z[4];

  t.outside_hours = std::clamp(0.15 + normal(rng, 0.0, 0.05), 0.0, 1.0);
  t.mobile = std::clamp(0.5 + normal(rng, 0.0, 0.15), 0.0, 1.0);
  t.partial_close = std::clamp(0.12 + normal(rng, 0.0, 0.05), 0.0, 1.0);
  t.short_share = std::clamp(0.35 + normal(rng, 0.0, 0.1), 0.0, 1.0);

  double total = 0.0;
  std::array<double, kMarkets> w{};
  for (int m = 0; m < kMarkets; ++m) {
    w[m] = kMarketWeights[m] * std::exp(normal(rng, 0.0, 0.5));
    total += w[m];
  }
  double acc = 0.0;
  for (int m = 0; m < kMarkets; ++m) {
    acc += w[m] / total;
    t.market_cdf[m] = acc;
  }
  t.market_cdf[kMarkets - 1] = 1.0;
  return t;
}

int draw_trade_count(const GeneratorConfig& config, Rng& rng) {
  return std::uniform_int_distribution<int>(config.min_trades, config.max_trades)(rng);
}

Market draw_market(const TraderTraits& t, Rng& rng) {
  const double u = uniform01(rng);
  for (int m = 0; m < kMarkets; ++m)
    if (u < t.market_cdf[m]) return static_cast<Market>(m);
  return static_cast<Market>(kMarkets - 1);
}

/// Samples one trade opening no earlier than `not_before`.
TradeRecord draw_trade(const TraderTraits& t, int k, Rng& rng, io::Timestamp not_before) {
  TradeRecord r;
  r.market = draw_market(t, rng);
  r.direction = bernoulli(rng, t.short_share) ? Direction::Short : Direction::Long;
  const double cv = t.stake_cv;
  r.stake = std::max(0.5, round_cents(t.base_stake * std::exp(cv * normal(rng) - 0.5 * cv * cv)));
  r.margin = r.stake * margin_requirement(r.market);

  const auto law = t.law(k);
  const bool win = bernoulli(rng, law.win_prob);
  const double s = t.magnitude_sigma;
  const double magnitude = std::exp(s * normal(rng) - 0.5 * s * s);
  const double ret = win ? law.win_magnitude * magnitude : -law.loss_magnitude * magnitude;
  r.pnl = round_cents(ret * r.margin);

  const double half = 0.5 * t.disposition;
  const double log_minutes = t.log_duration + (win ? half : -half) + normal(rng, 0.0, kDurationSigma);
  const auto duration_s = std::max<io::Timestamp>(60, static_cast<io::Timestamp>(std::exp(log_minutes) * 60.0));

  const double gap_days = std::exponential_distribution<double>(1.0 / t.mean_gap_days)(rng);
  io::Timestamp day_start = ((not_before + static_cast<io::Timestamp>(gap_days * 86400.0)) / 86400) * 86400;
  int hour = 0;
  if (bernoulli(rng, t.outside_hours)) {
    static constexpr std::array<int, 15> kOutside = {0, 1, 2, 3, 4, 5, 6, 7, 17, 18, 19, 20, 21, 22, 23};
    hour = kOutside[std::uniform_int_distribution<int>(0, 14)(rng)];
  } else {
    hour = std::uniform_int_distribution<int>(8, 16)(rng);
  }
  const int second_of_hour = std::uniform_int_distribution<int>(0, 3599)(rng);
  io::Timestamp open = day_start + hour * 3600 + second_of_hour;
  while (open < not_before) open += 86400;
  r.open_time = open;
  r.close_time = open + duration_s;

  r.channel_open = bernoulli(rng, t.mobile) ? Channel::Mobile : Channel::Web;
  r.channel_close = bernoulli(rng, t.mobile) ? Channel::Mobile : Channel::Web;
  r.partial_close = bernoulli(rng, t.partial_close);
  return r;
}

TraderProfile draw_profile(std::int64_t id, SkillClass skill, Rng& rng) {
  TraderProfile p;
  p.trader_id = id;
  p.skill_class = skill;
  // demographics are independent of the skill class
  p.age_band = std::discrete_distribution<int>({0.15, 0.28, 0.24, 0.17, 0.10, 0.06})(rng);
  p.country_cluster = std::discrete_distribution<int>({0.5, 0.2, 0.12, 0.1, 0.08})(rng);
  p.postcode_cluster = std::uniform_int_distribution<int>(0, 5)(rng);
  p.employment = std::discrete_distribution<int>({0.55, 0.2, 0.1, 0.15})(rng);
  const std::array<double, 5> sal_w = {0.22, 0.25, 0.23, 0.17, 0.13};
  p.salary_band = bernoulli(rng, 0.03) ? -1 : std::discrete_distribution<int>(sal_w.begin(), sal_w.end())(rng);
  const io::Timestamp start = io::make_timestamp(2003, 11, 1);
  const io::Timestamp end = io::make_timestamp(2010, 1, 1);
  p.join_time = std::uniform_int_distribution<io::Timestamp>(start, end)(rng);
  return p;
}

std::vector<TradeRecord> draw_trades(const TraderProfile& profile, const TraderTraits& traits, int count, Rng& rng) {
  std::vector<TradeRecord> out;
  out.reserve(static_cast<std::size_t>(count));
  io::Timestamp t = profile.join_time;
  for (int k = 1; k <= count; ++k) {
    TradeRecord r = draw_trade(traits, k, rng, t);
    r.trader_id = profile.trader_id;
    r.trade_seq = k;
    t = r.close_time;
    out.push_back(r);
  }
  return out;
}

/// Expected labelled rows and positives per trader of each class, from
/// simulated trade streams labelled exactly as the features module does.
struct LabelModel {
  std::array<double, kSkillClasses> labelled_per_trader{};
  std::array<double, kSkillClasses> positives_per_trader{};
};

LabelModel simulate_label_model(const GeneratorConfig& config) {
  constexpr int kTraders = 800;
  Rng rng(derive_seed(0xA11CE5EEDULL, "label-model"));
  LabelModel model;
  const auto horizon = static_cast<std::size_t>(config.label_horizon);
  const auto min_future = static_cast<std::size_t>(config.min_future);
  TraderProfile profile;
  for (int c = 0; c < kSkillClasses; ++c) {
    const auto skill = static_cast<SkillClass>(c);
    double labelled = 0.0, positives = 0.0;
    for (int i = 0; i < kTraders; ++i) {
      const TraderTraits traits = draw_traits(skill, config, rng);
      const int count = draw_trade_count(config, rng);
      const auto trades = draw_trades(profile, traits, count, rng);
      for (std::size_t j = 0; j < trades.size(); ++j) {
        const std::size_t last = std::min(trades.size(), j + 1 + horizon);
        if (last - (j + 1) < min_future) continue;
        double pnl = 0.0, margin = 0.0;
        for (std::size_t k = j + 1; k < last; ++k) {
          pnl += trades[k].pnl;
          margin += trades[k].margin;
        }
        labelled += 1.0;
        positives += pnl / margin >= kLabelThreshold ? 1.0 : 0.0;
      }
    }
    model.labelled_per_trader[c] = labelled / kTraders;
    model.positives_per_trader[c] = positives / kTraders;
  }
  return model;
}

std::array<double, kSkillClasses> calibrated_mix(const GeneratorConfig& config, const LabelModel& model) {
  auto mix = config.skill_mix;
  if (!config.calibrate_prevalence) return mix;
  const double others = mix[1] + mix[2] + mix[3];
  double a = 0.0, b = 0.0;  // positives / labelled per "other" trader
  for (int c = 1; c < kSkillClasses; ++c) {
    const double w = mix[c] / others;
    a += w * model.positives_per_trader[c];
    b += w * model.labelled_per_trader[c];
  }
  const double ls = model.labelled_per_trader[0];
  const double ps = model.positives_per_trader[0];
  const double target = config.target_a_prevalence;
  // target = (f ps + (1-f) a) / (f ls + (1-f) b), solved for f
  const double denom = ps - a - target * (ls - b);
  double f = denom != 0.0 ? (target * b - a) / denom : mix[0];
  f = std::clamp(f, 0.001, 0.95);
  mix[0] = f;
  for (int c = 1; c < kSkillClasses; ++c) mix[c] = (1.0 - f) * config.skill_mix[c] / others;
  return mix;
}

/// First and second moments of the margin of one trade.
std::pair<double, double> margin_moments(const TraderTraits& t) {
  double req = 0.0, req_sq = 0.0, prev = 0.0;
  for (int m = 0; m < kMarkets; ++m) {
    const double p = t.market_cdf[static_cast<std::size_t>(m)] - prev;
    prev = t.market_cdf[static_cast<std::size_t>(m)];
    const double r = margin_requirement(static_cast<Market>(m));
    req += p * r;
    req_sq += p * r * r;
  }
  const double stake_sq = t.base_stake * t.base_stake * std::exp(t.stake_cv * t.stake_cv);
  return {t.base_stake * req, stake_sq * req_sq};
}

/// Normal approximation of P(sum pnl / sum margin >= threshold) over trades
/// first..last (1-based, inclusive) of a trader.
double forward_probability(const TraderTraits& t, int first, int last, double threshold) {
  const auto [m1, m2] = margin_moments(t);
  const double mag_sq = std::exp(t.magnitude_sigma * t.magnitude_sigma);
  double mean = 0.0, var = 0.0;
  for (int k = first; k <= last; ++k) {
    const auto [p, w, l] = t.law(k);
    const double mu = p * w - (1.0 - p) * l - threshold;
    const double second = (p * w * w + (1.0 - p) * l * l) *
                              mag_sq -
                          2.0 * threshold * (mu + threshold) + threshold * threshold;
    mean += m1 * mu;
    var += m2 * second - m1 * m1 * mu * mu;
  }
  if (var <= 0.0) return mean >= 0.0 ? 1.0 : 0.0;
  return 0.5 * std::erfc(-mean / std::sqrt(2.0 * var));
}

std::string categorical(int value, const auto& labels) {
  return value < 0 ? std::string() : std::string(labels[static_cast<std::size_t>(value)]);
}

int parse_categorical(std::string_view s, const auto& labels, bool allow_missing, std::string_view what) {
  if (s.empty() && allow_missing) return -1;
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (s == labels[i]) return static_cast<int>(i);
  throw SchemaError("unknown " + std::string(what) + " '" + std::string(s) + "'");
}

}  // namespace

const char* to_string(SkillClass c) {
  switch (c) {
    case SkillClass::Skilled: return "skilled";
    case SkillClass::Overconfident: return "overconfident";
    case SkillClass::Gambler: return "gambler";
    case SkillClass::Casual: return "casual";
  }
  return "?";
}

const char* to_string(Market m) {
  static constexpr std::array<const char*, kMarkets> names = {"FTSE100", "DAX", "SP500", "GBPUSD", "GOLD", "UKSTOCK"};
  return names[static_cast<std::size_t>(m)];
}

const char* to_string(Direction d) { return d == Direction::Long ? "long" : "short"; }
const char* to_string(Channel c) { return c == Channel::Web ? "web" : "mobile"; }

Market parse_market(std::string_view s) {
  for (int m = 0; m < kMarkets; ++m)
    if (s == to_string(static_cast<Market>(m))) return static_cast<Market>(m);
  throw SchemaError("unknown market '" + std::string(s) + "'");
}

Direction parse_direction(std::string_view s) {
  if (s == "long") return Direction::Long;
  if (s == "short") return Direction::Short;
  throw SchemaError("unknown direction '" + std::string(s) + "'");
}

Channel parse_channel(std::string_view s) {
  if (s == "web") return Channel::Web;
  if (s == "mobile") return Channel::Mobile;
  throw SchemaError("unknown channel '" + std::string(s) + "'");
}

double margin_requirement(Market m) {
  static constexpr std::array<double, kMarkets> req = {300.0, 600.0, 120.0, 150.0, 80.0, 40.0};
  return req[static_cast<std::size_t>(m)];
}

void GeneratorConfig::validate() const {
  require(n_traders > 0, "n_traders must be positive");
  require(min_trades > 0 && max_trades >= min_trades, "trades_per_trader_range must be positive and ordered");
  require(target_a_prevalence > 0.0 && target_a_prevalence < 1.0, "target_a_prevalence must lie in (0,1)");
  double total = 0.0;
  for (double p : skill_mix) {
    require(p >= 0.0, "skill_mix probabilities must be non-negative");
    total += p;
  }
  require(std::abs(total - 1.0) < 1e-9, "skill_mix probabilities must sum to 1");
  require(skill_mix[1] + skill_mix[2] + skill_mix[3] > 0.0, "skill_mix needs at least one non-skilled class");
  require(nonlinearity_strength >= 0.0, "nonlinearity_strength must be >= 0");
  require(return_noise > 0.0, "return_noise must be positive");
  require(label_horizon > 0 && min_future > 0 && min_future <= label_horizon, "invalid label horizon");
}

std::array<double, kSkillClasses> effective_skill_mix(const GeneratorConfig& config) {
  config.validate();
  if (!config.calibrate_prevalence) return config.skill_mix;
  return calibrated_mix(config, simulate_label_model(config));
}

namespace {

struct TraderDraw {
  TraderProfile profile;
  TraderTraits traits;
  int count = 0;
  Rng rng;
};

/// Per-trader stream keeps a trader's trades independent of population size.
TraderDraw draw_trader(const GeneratorConfig& config, int index, SkillClass skill) {
  TraderDraw d{{}, {}, 0, Rng(derive_seed(config.seed, static_cast<std::uint64_t>(index)))};
  d.profile = draw_profile(1000 + index, skill, d.rng);
  d.traits = draw_traits(skill, config, d.rng);
  d.count = draw_trade_count(config, d.rng);
  return d;
}

}  // namespace

Population generate_population(const GeneratorConfig& config) {
  config.validate();
  const auto mix = effective_skill_mix(config);
  Rng rng(derive_seed(config.seed, "synthgen"));
  std::discrete_distribution<int> pick_class(mix.begin(), mix.end());

  Population pop;
  pop.profiles.reserve(static_cast<std::size_t>(config.n_traders));
  for (int i = 0; i < config.n_traders; ++i) {
    const auto skill = static_cast<SkillClass>(pick_class(rng));
    TraderDraw d = draw_trader(config, i, skill);
    auto trades = draw_trades(d.profile, d.traits, d.count, d.rng);
    pop.trades.insert(pop.trades.end(), trades.begin(), trades.end());
    pop.profiles.push_back(d.profile);
  }
  return pop;
}

std::vector<double> oracle_probabilities(const GeneratorConfig& config, const Population& population, int horizon,
                                         int min_future) {
  require(horizon > 0 && min_future > 0, "invalid horizon");
  std::vector<double> out(population.trades.size(), std::numeric_limits<double>::quiet_NaN());
  std::size_t begin = 0;
  const auto& trades = population.trades;
  while (begin < trades.size()) {
    std::size_t end = begin;
    while (end < trades.size() && trades[end].trader_id == trades[begin].trader_id) ++end;
    const auto index = trades[begin].trader_id - 1000;
    if (index < 0 || index >= static_cast<std::int64_t>(population.profiles.size()) ||
        population.profiles[static_cast<std::size_t>(index)].trader_id != trades[begin].trader_id)
      throw InvalidArgument("oracle requires a population produced by generate_population");
    const auto& profile = population.profiles[static_cast<std::size_t>(index)];
    const TraderTraits traits = draw_trader(config, static_cast<int>(index), profile.skill_class).traits;
    const int count = static_cast<int>(end - begin);
    for (int j = 1; j <= count; ++j) {
      const int last = std::min(count, j + horizon);
      if (last - j >= min_future)
        out[begin + static_cast<std::size_t>(j - 1)] = forward_probability(traits, j + 1, last, kLabelThreshold);
    }
    begin = end;
  }
  return out;
}

const std::vector<std::string>& trades_header() {
  static const std::vector<std::string> header = {"trader_id", "trade_seq", "open_time", "close_time",
                                                  "market", "direction", "stake", "margin",
                                                  "pnl", "channel_open", "channel_close", "partial_close"};
  return header;
}

const std::vector<std::string>& profiles_header() {
  static const std::vector<std::string> header = {"trader_id", "age_band", "country_cluster", "postcode_cluster",
                                                  "employment", "salary_band", "join_time"};
  return header;
}

void export_trades(const std::vector<TradeRecord>& trades, const std::filesystem::path& path) {
  std::ostringstream out;
  out << io::join(trades_header(), ",") << '\n';
  for (const auto& t : trades) {
    out << t.trader_id << ',' << t.trade_seq << ',' << io::format_iso8601(t.open_time) << ','
        << io::format_iso8601(t.close_time) << ',' << to_string(t.market) << ',' << to_string(t.direction) << ','
        << io::format_double(t.stake) << ',' << io::format_double(t.margin) << ',' << io::format_double(t.pnl) << ','
        << to_string(t.channel_open) << ',' << to_string(t.channel_close) << ',' << (t.partial_close ? 1 : 0)
        << '\n';
  }
  io::write_text(path, out.str());
}

std::vector<TradeRecord> import_trades(const std::filesystem::path& path) {
  const auto table = io::read_csv(path);
  io::expect_header(table, trades_header(), "trades.csv");
  std::vector<TradeRecord> trades;
  trades.reserve(table.rows.size());
  for (const auto& f : table.rows) {
    TradeRecord t;
    t.trader_id = io::parse_int(f[0]);
    t.trade_seq = static_cast<int>(io::parse_int(f[1]));
    t.open_time = io::parse_iso8601(f[2]);
    t.close_time = io::parse_iso8601(f[3]);
    t.market = parse_market(f[4]);
    t.direction = parse_direction(f[5]);
    t.stake = io::parse_double(f[6]);
    t.margin = io::parse_double(f[7]);
    t.pnl = io::parse_double(f[8]);
    t.channel_open = parse_channel(f[9]);
    t.channel_close = parse_channel(f[10]);
    if (f[11] != "0" && f[11] != "1") throw SchemaError("partial_close must be 0 or 1");
    t.partial_close = f[11] == "1";
    if (t.close_time <= t.open_time) throw SchemaError("close_time must follow open_time");
    if (!(t.stake > 0.0) || !(t.margin > 0.0)) throw SchemaError("stake and margin must be positive");
    trades.push_back(t);
  }
  return trades;
}

void export_profiles(const std::vector<TraderProfile>& profiles, const std::filesystem::path& path) {
  std::ostringstream out;
  out << io::join(profiles_header(), ",") << '\n';
  for (const auto& p : profiles) {
    out << p.trader_id << ',' << categorical(p.age_band, kAgeBands) << ','
        << categorical(p.country_cluster, kCountryClusters) << ',' << categorical(p.postcode_cluster, kPostcodeClusters)
        << ',' << categorical(p.employment, kEmployment) << ',' << categorical(p.salary_band, kSalaryBands) << ','
        << io::format_iso8601(p.join_time) << '\n';
  }
  io::write_text(path, out.str());
}

std::vector<TraderProfile> import_profiles(const std::filesystem::path& path) {
  const auto table = io::read_csv(path);
  io::expect_header(table, profiles_header(), "profiles.csv");
  std::vector<TraderProfile> out;
  for (const auto& f : table.rows) {
    TraderProfile p;
    p.trader_id = io::parse_int(f[0]);
    p.age_band = parse_categorical(f[1], kAgeBands, false, "age band");
    p.country_cluster = parse_categorical(f[2], kCountryClusters, false, "country cluster");
    p.postcode_cluster = parse_categorical(f[3], kPostcodeClusters, false, "postcode cluster");
    p.employment = parse_categorical(f[4], kEmployment, false, "employment");
    p.salary_band = parse_categorical(f[5], kSalaryBands, true, "salary band");
    p.join_time = io::parse_iso8601(f[6]);
    // The latent class is not exported; imported profiles carry the default.
    out.push_back(p);
  }
  return out;
}

}  // namespace dlrisk::synth
