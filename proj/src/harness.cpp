#include "bsync/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "bsync/baselines.hpp"
#include "bsync/hybrid.hpp"
#include "bsync/pull.hpp"

namespace bsync {

using nlohmann::json;

namespace {

Micros ms_to_us(double ms) { return Micros(std::llround(ms * 1000.0)); }

constexpr std::uint64_t kMatrixStream = 0x6d61747269785f31ULL;

}  // namespace

std::string_view to_string(SynchronizerKind k) {
  switch (k) {
    case SynchronizerKind::Sysname: return "sysname";
    case SynchronizerKind::Uncertified: return "uncertified";
    case SynchronizerKind::Certified: return "certified";
  }
  return "?";
}

SynchronizerKind synchronizer_from_string(std::string_view s) {
  if (s == "sysname") return SynchronizerKind::Sysname;
  if (s == "uncertified") return SynchronizerKind::Uncertified;
  if (s == "certified") return SynchronizerKind::Certified;
  throw ConfigError("unknown synchronizer '" + std::string(s) + "'");
}

// ---------------------------------------------------------------------------
// Config

ProtocolConfig ScenarioConfig::protocol() const {
  ProtocolConfig p;
  p.n = n;
  p.f = f;
  p.reputation_penalty = reputation_penalty;
  p.bulk_retry_timeout = ms_to_us(bulk_retry_ms);
  p.live_retry_timeout = ms_to_us(live_retry_ms);
  p.leader_timeout = ms_to_us(leader_timeout_ms);
  p.watermark_lag = watermark_lag;
  p.random_pull_fanout = pull_fanout;
  return p;
}

NetworkModel ScenarioConfig::network() const {
  NetworkModel net;
  net.delay.assign(n, std::vector<Micros>(n, Micros::zero()));
  if (delays.uniform_ms) {
    net = NetworkModel::uniform(n, ms_to_us(*delays.uniform_ms));
  } else if (!delays.matrix_ms.empty()) {
    for (std::uint32_t i = 0; i < n; ++i)
      for (std::uint32_t j = 0; j < n; ++j)
        if (i != j) net.delay[i][j] = ms_to_us(delays.matrix_ms[i][j]);
  } else if (delays.random_range_ms) {
    std::mt19937_64 rng(seed ^ kMatrixStream);
    const auto lo = ms_to_us(delays.random_range_ms->first).count();
    const auto hi = ms_to_us(delays.random_range_ms->second).count();
    for (std::uint32_t i = 0; i < n; ++i)
      for (std::uint32_t j = i + 1; j < n; ++j) {
        const auto d = lo + static_cast<std::int64_t>(
                                uniform_below(rng, static_cast<std::uint64_t>(hi - lo) + 1));
        net.delay[i][j] = net.delay[j][i] = Micros(d);
      }
  }
  net.delta_bound = ms_to_us(delta_bound_ms);
  net.gst = ms_to_us(gst_ms);
  if (pre_gst_chaos) net.scheduler = bsync::pre_gst_chaos(net);
  return net;
}

Micros ScenarioConfig::reference_delta() const { return network().max_delay(); }

std::vector<bool> ScenarioConfig::honest() const {
  std::vector<bool> out(n, true);
  for (std::size_t i = 0; i < adversaries.size() && i < n; ++i) out[i] = is_honest(adversaries[i]);
  return out;
}

ScenarioConfig ScenarioConfig::resolved() const {
  ScenarioConfig c = *this;
  if (c.n < 3 * c.f + 1 || c.n == 0) throw ConfigError("need n >= 3f+1");
  const int specs = (c.delays.uniform_ms ? 1 : 0) + (c.delays.matrix_ms.empty() ? 0 : 1) +
                    (c.delays.random_range_ms ? 1 : 0);
  if (specs != 1) throw ConfigError("exactly one of delta_ms, delay_matrix_ms, delay_range_ms");
  if (c.delays.uniform_ms && *c.delays.uniform_ms <= 0) throw ConfigError("delta_ms must be > 0");
  if (!c.delays.matrix_ms.empty()) {
    if (c.delays.matrix_ms.size() != c.n) throw ConfigError("delay matrix must be n x n");
    for (std::uint32_t i = 0; i < c.n; ++i) {
      if (c.delays.matrix_ms[i].size() != c.n) throw ConfigError("delay matrix must be n x n");
      for (std::uint32_t j = 0; j < c.n; ++j)
        if (i != j && c.delays.matrix_ms[i][j] <= 0)
          throw ConfigError("link delays must be > 0");
    }
  }
  if (c.delays.random_range_ms) {
    const auto [lo, hi] = *c.delays.random_range_ms;
    if (lo <= 0 || hi < lo) throw ConfigError("delay range must satisfy 0 < lo <= hi");
  }
  const double max_ms = static_cast<double>(c.network().max_delay().count()) / 1000.0;
  if (c.delta_bound_ms == 0) c.delta_bound_ms = max_ms;
  if (c.delta_bound_ms < max_ms) throw ConfigError("delta_bound_ms below a link delay");
  if (c.bulk_retry_ms == 0) c.bulk_retry_ms = 2 * c.delta_bound_ms;
  if (c.live_retry_ms == 0) c.live_retry_ms = 2 * c.delta_bound_ms;
  if (c.gst_ms < 0) throw ConfigError("gst_ms must be >= 0");
  if (c.rounds_target < 1) throw ConfigError("rounds_target must be >= 1");
  if (c.warmup_rounds < 0) throw ConfigError("warmup_rounds must be >= 0");
  if (c.recovery_window < 1) throw ConfigError("recovery_window must be >= 1");

  if (c.adversaries.size() > c.n) throw ConfigError("more adversary entries than validators");
  c.adversaries.resize(c.n, Honest{});
  std::uint32_t faulty = 0;
  for (const auto& p : c.adversaries) {
    if (!is_honest(p)) ++faulty;
    if (const auto* pi = std::get_if<PullInduction>(&p)) {
      if (pi->fanout < 1) throw ConfigError("pull_induction fanout must be >= 1");
      for (auto v : pi->rotation)
        if (v.value >= c.n) throw ConfigError("rotation entry out of range");
    }
    if (const auto* h = std::get_if<HoardAndDump>(&p); h && h->hoard_rounds < 0)
      throw ConfigError("hoard_rounds must be >= 0");
    if (const auto* cr = std::get_if<Crash>(&p); cr && cr->at_round < 0)
      throw ConfigError("crash at_round must be >= 0");
  }
  if (faulty > c.f) throw ConfigError("more than f faulty validators");
  if (c.initial_reputation.empty()) c.initial_reputation.assign(c.n, 0);
  if (c.initial_reputation.size() != c.n) throw ConfigError("initial_reputation must have n entries");
  if (c.horizon_ms == 0)
    c.horizon_ms = c.gst_ms + static_cast<double>(c.rounds_target + 10) *
                                  (c.leader_timeout_ms + 10 * c.delta_bound_ms);
  c.protocol().check();
  return c;
}

namespace {

json policy_to_json(std::uint32_t v, const AdversaryPolicy& p) {
  json j{{"validator", v}};
  std::visit(
      [&](const auto& x) {
        using T = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<T, Honest>) {
          j["policy"] = "honest";
        } else if constexpr (std::is_same_v<T, PullInduction>) {
          j["policy"] = "pull_induction";
          json rot = json::array();
          for (auto r : x.rotation) rot.push_back(r.value);
          j["rotation"] = rot;
          j["fanout"] = x.fanout;
          j["lag_ms"] = x.lag ? json(static_cast<double>(x.lag->count()) / 1000.0) : json(nullptr);
          j["paced"] = x.paced;
        } else if constexpr (std::is_same_v<T, HoardAndDump>) {
          j["policy"] = "hoard_and_dump";
          j["hoard_rounds"] = x.hoard_rounds;
        } else {
          j["policy"] = "crash";
          j["at_round"] = x.at_round;
        }
      },
      p);
  return j;
}

AdversaryPolicy policy_from_json(const json& j) {
  const auto name = j.value("policy", std::string("honest"));
  if (name == "honest") return Honest{};
  if (name == "pull_induction") {
    PullInduction p;
    for (const auto& r : j.value("rotation", json::array())) p.rotation.push_back(ValidatorId(r.get<std::uint32_t>()));
    p.fanout = j.value("fanout", 1u);
    if (j.contains("lag_ms") && !j["lag_ms"].is_null()) p.lag = ms_to_us(j["lag_ms"].get<double>());
    p.paced = j.value("paced", true);
    return p;
  }
  if (name == "hoard_and_dump") return HoardAndDump{j.value("hoard_rounds", Round{0})};
  if (name == "crash") return Crash{j.value("at_round", Round{0})};
  throw ConfigError("unknown adversary policy '" + name + "'");
}

}  // namespace

json to_json(const ScenarioConfig& c) {
  json j;
  j["scenario_id"] = c.scenario_id;
  j["n"] = c.n;
  j["f"] = c.f;
  j["synchronizer"] = std::string(to_string(c.synchronizer));
  if (c.delays.uniform_ms) j["delta_ms"] = *c.delays.uniform_ms;
  if (!c.delays.matrix_ms.empty()) j["delay_matrix_ms"] = c.delays.matrix_ms;
  if (c.delays.random_range_ms)
    j["delay_range_ms"] = {c.delays.random_range_ms->first, c.delays.random_range_ms->second};
  j["delta_bound_ms"] = c.delta_bound_ms;
  j["gst_ms"] = c.gst_ms;
  j["pre_gst_chaos"] = c.pre_gst_chaos;
  j["reputation_penalty"] = c.reputation_penalty;
  j["bulk_retry_ms"] = c.bulk_retry_ms;
  j["live_retry_ms"] = c.live_retry_ms;
  j["leader_timeout_ms"] = c.leader_timeout_ms;
  j["watermark_lag"] = c.watermark_lag;
  j["pull_fanout"] = c.pull_fanout;
  json adv = json::array();
  for (std::size_t i = 0; i < c.adversaries.size(); ++i)
    adv.push_back(policy_to_json(static_cast<std::uint32_t>(i), c.adversaries[i]));
  j["adversaries"] = adv;
  j["initial_reputation"] = c.initial_reputation;
  j["rounds_target"] = c.rounds_target;
  j["warmup_rounds"] = c.warmup_rounds;
  j["recovery_window"] = c.recovery_window;
  j["seed"] = c.seed;
  j["horizon_ms"] = c.horizon_ms;
  json expect = json::object();
  for (const auto& [name, b] : c.expect) {
    json e = json::object();
    if (b.min) e["min"] = *b.min;
    if (b.max) e["max"] = *b.max;
    expect[name] = e;
  }
  j["expect"] = expect;
  return j;
}

ScenarioConfig config_from_json(const json& j) {
  try {
    if (!j.is_object()) throw ConfigError("config must be a JSON object");
    ScenarioConfig c;
    c.scenario_id = j.value("scenario_id", c.scenario_id);
    c.n = j.value("n", c.n);
    c.f = j.value("f", c.f);
    c.synchronizer = synchronizer_from_string(j.value("synchronizer", std::string("sysname")));
    const bool any_delay =
        j.contains("delta_ms") || j.contains("delay_matrix_ms") || j.contains("delay_range_ms");
    if (any_delay) {
      c.delays = {};
      if (j.contains("delta_ms")) c.delays.uniform_ms = j["delta_ms"].get<double>();
      if (j.contains("delay_matrix_ms"))
        c.delays.matrix_ms = j["delay_matrix_ms"].get<std::vector<std::vector<double>>>();
      if (j.contains("delay_range_ms")) {
        auto r = j["delay_range_ms"].get<std::vector<double>>();
        if (r.size() != 2) throw ConfigError("delay_range_ms must be [lo, hi]");
        c.delays.random_range_ms = std::make_pair(r[0], r[1]);
      }
    }
    c.delta_bound_ms = j.value("delta_bound_ms", c.delta_bound_ms);
    c.gst_ms = j.value("gst_ms", c.gst_ms);
    c.pre_gst_chaos = j.value("pre_gst_chaos", c.pre_gst_chaos);
    c.reputation_penalty = j.value("reputation_penalty", c.reputation_penalty);
    c.bulk_retry_ms = j.value("bulk_retry_ms", c.bulk_retry_ms);
    c.live_retry_ms = j.value("live_retry_ms", c.live_retry_ms);
    c.leader_timeout_ms = j.value("leader_timeout_ms", c.leader_timeout_ms);
    c.watermark_lag = j.value("watermark_lag", c.watermark_lag);
    c.pull_fanout = j.value("pull_fanout", c.pull_fanout);
    if (j.contains("adversaries")) {
      for (const auto& a : j["adversaries"]) {
        const auto v = a.at("validator").get<std::uint32_t>();
        if (v >= c.n) throw ConfigError("adversary validator index out of range");
        if (c.adversaries.size() <= v) c.adversaries.resize(v + 1, Honest{});
        c.adversaries[v] = policy_from_json(a);
      }
    }
    c.initial_reputation = j.value("initial_reputation", c.initial_reputation);
    c.rounds_target = j.value("rounds_target", c.rounds_target);
    c.warmup_rounds = j.value("warmup_rounds", c.warmup_rounds);
    c.recovery_window = j.value("recovery_window", c.recovery_window);
    c.seed = j.value("seed", c.seed);
    c.horizon_ms = j.value("horizon_ms", c.horizon_ms);
    if (j.contains("expect")) {
      for (const auto& [name, e] : j["expect"].items()) {
        MetricBounds b;
        if (e.contains("min")) b.min = e["min"].get<double>();
        if (e.contains("max")) b.max = e["max"].get<double>();
        c.expect[name] = b;
      }
    }
    return c;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad config: ") + e.what());
  }
}

ScenarioConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("cannot parse " + path.string() + ": " + e.what());
  }
  return config_from_json(j);
}

// ---------------------------------------------------------------------------
// Metrics

namespace {

double mean(const std::vector<double>& xs) {
  if (xs.empty()) return 0;
  double s = 0;
  for (double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

double percentile(std::vector<double> xs, double p) {
  if (xs.empty()) return 0;
  std::sort(xs.begin(), xs.end());
  auto rank = static_cast<std::size_t>(std::ceil(p * static_cast<double>(xs.size())));
  return xs[std::max<std::size_t>(rank, 1) - 1];
}

struct CreatedBlock {
  std::uint32_t author;
  Round round;
  std::vector<BlockDigest> links;
};

// Time at which the adversaries' reputation dropped below every honest
// validator's and stayed there, at every honest observer. Infinite if never.
std::int64_t transition_end(const ScenarioConfig& c, const std::vector<TraceRecord>& records) {
  const auto honest = c.honest();
  std::vector<std::uint32_t> adv;
  for (std::uint32_t k = 0; k < c.n; ++k)
    if (std::holds_alternative<PullInduction>(c.adversaries[k])) adv.push_back(k);
  if (adv.empty() || c.synchronizer != SynchronizerKind::Sysname) return 0;

  const std::vector<std::int64_t> initial =
      c.initial_reputation.empty() ? std::vector<std::int64_t>(c.n, 0) : c.initial_reputation;
  std::vector<std::vector<std::int64_t>> scores(c.n, initial);
  auto below = [&](const std::vector<std::int64_t>& s) {
    for (auto a : adv)
      for (std::uint32_t h = 0; h < c.n; ++h)
        if (honest[h] && s[a] >= s[h]) return false;
    return true;
  };
  std::vector<std::int64_t> since(c.n, below(initial) ? 0 : -1);
  for (const auto& r : records) {
    if (r.kind != TraceKind::Reputation || r.v >= c.n) continue;
    auto& s = scores[r.v];
    const bool before = below(s);
    s[r.peer] = r.value;
    const bool after = below(s);
    if (!after) since[r.v] = -1;
    else if (!before) since[r.v] = r.t;
  }
  std::int64_t end = 0;
  for (std::uint32_t v = 0; v < c.n; ++v) {
    if (!honest[v]) continue;
    if (since[v] < 0) return std::numeric_limits<std::int64_t>::max();
    end = std::max(end, since[v]);
  }
  return end;
}

}  // namespace

MetricsReport compute_report(const ScenarioConfig& cfg, const std::vector<TraceRecord>& records) {
  const ScenarioConfig c = cfg.resolved();
  const auto honest = c.honest();
  const auto n = c.n;

  MetricsReport rep;
  rep.scenario_id = c.scenario_id;
  rep.seed = c.seed;
  rep.synchronizer = std::string(to_string(c.synchronizer));
  rep.n = n;
  rep.f = c.f;
  rep.delta_us = static_cast<double>(c.reference_delta().count());

  std::uint32_t honest_count = 0;
  for (bool h : honest) honest_count += h ? 1 : 0;

  std::map<Round, std::pair<std::int64_t, std::uint32_t>> quorum;  // max time, reporters
  std::map<Slot, std::int64_t> created_at;
  std::map<BlockDigest, CreatedBlock> created;
  std::map<Round, std::int64_t> committed_at;  // latest honest decision
  std::vector<std::pair<Round, BlockDigest>> reference_commits;
  std::set<std::tuple<std::uint32_t, std::string, std::uint64_t, std::uint32_t>> batches;
  std::map<std::tuple<std::uint32_t, std::uint32_t, std::int64_t>, std::int64_t> rep_points;
  rep.live_entries.assign(n, 0);
  rep.committed_authors.assign(n, 0);
  for (auto m : {PullMode::Live, PullMode::Bulk, PullMode::Random, PullMode::Certified}) {
    rep.pull_requests[std::string(to_string(m))] = 0;
    rep.pull_batches[std::string(to_string(m))] = 0;
  }
  std::uint32_t reference = n;
  for (std::uint32_t k = 0; k < n && reference == n; ++k)
    if (honest[k]) reference = k;

  for (const auto& r : records) {
    const bool by_honest = r.v < n && honest[r.v];
    switch (r.kind) {
      case TraceKind::Quorum:
        if (by_honest) {
          auto& q = quorum[r.round];
          q.first = std::max(q.first, r.t);
          q.second += 1;
        }
        break;
      case TraceKind::Create: {
        created_at[{ValidatorId(r.author), r.round}] = r.t;
        CreatedBlock b{r.author, r.round, {}};
        for (const auto& p : r.parents) b.links.push_back(p.digest);
        for (const auto& w : r.weaklinks) b.links.push_back(w.digest);
        if (r.digest) created[*r.digest] = std::move(b);
        break;
      }
      case TraceKind::Commit:
        if (by_honest && r.cause == "committed") {
          auto& at = committed_at[r.round];
          at = std::max(at, r.at);
          if (r.v == reference && r.digest) reference_commits.emplace_back(r.round, *r.digest);
        }
        break;
      case TraceKind::Send:
        if (r.msg == MsgKind::PullRequest && r.mode) {
          const std::string mode(to_string(*r.mode));
          rep.pull_requests[mode] += 1;
          batches.insert({r.v, mode, r.batch, r.attempt});
        }
        break;
      case TraceKind::Reputation:
        if (r.cause.rfind("blame", 0) == 0)
          rep.blames.push_back({r.t, r.v, r.peer, r.round, r.cause});
        rep_points[{r.v, r.peer, r.t}] = r.value;
        break;
      case TraceKind::Live:
        if (by_honest && r.author < n) rep.live_entries[r.author] += 1;
        break;
      default:
        break;
    }
  }
  for (const auto& [key, score] : rep_points)
    rep.reputation.push_back({std::get<2>(key), std::get<0>(key), std::get<1>(key), score});
  std::stable_sort(rep.reputation.begin(), rep.reputation.end(),
                   [](const ReputationPoint& a, const ReputationPoint& b) {
                     return std::tie(a.t, a.observer, a.subject) < std::tie(b.t, b.observer, b.subject);
                   });
  for (const auto& [v, mode, batch, attempt] : batches) rep.pull_batches[mode] += 1;

  auto q_time = [&](Round r) -> std::optional<std::int64_t> {
    auto it = quorum.find(r);
    if (it == quorum.end() || it->second.second < honest_count) return std::nullopt;
    return it->second.first;
  };
  for (Round r = 1; r <= c.rounds_target; ++r) {
    auto a = q_time(r - 1), b = q_time(r);
    if (a && b) rep.round_latency_us.emplace_back(r, static_cast<double>(*b - *a));
  }

  for (Round r = 1; r <= c.rounds_target; ++r) {
    SlotLatency s{r, false, 0};
    const ValidatorId leader = leader_slot(r, n).leader;
    auto c_it = committed_at.find(r);
    auto p_it = created_at.find({leader, r});
    if (c_it != committed_at.end() && p_it != created_at.end()) {
      s.committed = true;
      s.latency_us = static_cast<double>(c_it->second - p_it->second);
    }
    rep.slots.push_back(s);
  }

  // Steady state starts after warm-up and after the blame transition.
  const std::int64_t t_end = transition_end(c, records);
  if (t_end != std::numeric_limits<std::int64_t>::max()) {
    for (Round r = c.warmup_rounds + 1; r <= c.rounds_target; ++r) {
      auto q = q_time(r - 1);
      if (q && *q >= t_end) {
        rep.steady_start = r;
        break;
      }
    }
  }

  // Committed-author histogram over the reference validator's commit order.
  std::optional<std::uint32_t> hoarder;
  for (std::uint32_t k = 0; k < n && !hoarder; ++k)
    if (std::holds_alternative<HoardAndDump>(c.adversaries[k])) hoarder = k;
  std::set<BlockDigest> seen;
  std::vector<std::pair<Round, std::vector<std::uint64_t>>> per_slot;
  for (const auto& [round, leader_digest] : reference_commits) {
    std::vector<std::uint64_t> counts(n, 0);
    std::vector<BlockDigest> stack{leader_digest};
    while (!stack.empty()) {
      const BlockDigest d = stack.back();
      stack.pop_back();
      auto it = created.find(d);
      if (it == created.end() || !seen.insert(d).second) continue;
      counts[it->second.author] += 1;
      for (const auto& l : it->second.links) stack.push_back(l);
    }
    for (std::uint32_t k = 0; k < n; ++k) rep.committed_authors[k] += counts[k];
    per_slot.emplace_back(round, std::move(counts));
  }
  if (hoarder) {
    const auto h = *hoarder;
    rep.hoard_rounds = std::get<HoardAndDump>(c.adversaries[h]).hoard_rounds;
    std::optional<std::size_t> dump;
    for (std::size_t i = 0; i < per_slot.size() && !dump; ++i)
      if (per_slot[i].second[h] > 0) dump = i;
    if (dump) {
      rep.dump_round = per_slot[*dump].first;
      const auto w = static_cast<std::size_t>(c.recovery_window);
      for (std::size_t s = *dump; s < per_slot.size(); ++s) {
        if (s + 1 < w) continue;
        std::vector<std::uint64_t> window(n, 0);
        for (std::size_t i = s + 1 - w; i <= s; ++i)
          for (std::uint32_t k = 0; k < n; ++k) window[k] += per_slot[i].second[k];
        std::vector<double> others;
        for (std::uint32_t k = 0; k < n; ++k)
          if (k != h) others.push_back(static_cast<double>(window[k]));
        std::sort(others.begin(), others.end());
        const std::size_t m = others.size();
        const double median = m % 2 ? others[m / 2] : (others[m / 2 - 1] + others[m / 2]) / 2;
        if (std::abs(static_cast<double>(window[h]) - median) <= 1.0) {
          rep.parity_round = per_slot[s].first;
          break;
        }
      }
    }
  }
  return rep;
}

double MetricsReport::mean_round_latency() const {
  std::vector<double> xs;
  for (const auto& [r, l] : round_latency_us) xs.push_back(l);
  return mean(xs) / delta_us;
}

std::optional<double> MetricsReport::steady_mean_round_latency() const {
  if (!steady_start) return std::nullopt;
  std::vector<double> xs;
  for (const auto& [r, l] : round_latency_us)
    if (r >= *steady_start) xs.push_back(l);
  if (xs.empty()) return std::nullopt;
  return mean(xs) / delta_us;
}

std::optional<double> MetricsReport::post_dump_mean_round_latency() const {
  if (!hoard_rounds) return std::nullopt;
  std::vector<double> xs;
  for (const auto& [r, l] : round_latency_us)
    if (r > *hoard_rounds) xs.push_back(l);
  if (xs.empty()) return std::nullopt;
  return mean(xs) / delta_us;
}

std::optional<double> MetricsReport::mean_consensus_latency() const {
  std::vector<double> xs;
  for (const auto& s : slots)
    if (s.committed) xs.push_back(s.latency_us);
  if (xs.empty()) return std::nullopt;
  return mean(xs) / delta_us;
}

std::optional<double> MetricsReport::steady_mean_consensus_latency() const {
  if (!steady_start) return std::nullopt;
  std::vector<double> xs;
  for (const auto& s : slots)
    if (s.committed && s.round >= *steady_start) xs.push_back(s.latency_us);
  if (xs.empty()) return std::nullopt;
  return mean(xs) / delta_us;
}

std::uint64_t MetricsReport::honest_blames(const std::vector<bool>& honest) const {
  std::uint64_t k = 0;
  for (const auto& b : blames)
    if (b.author < honest.size() && honest[b.author]) ++k;
  return k;
}

std::vector<Metric> MetricsReport::metrics() const {
  std::vector<Metric> out;
  auto add = [&](std::string name, double value, const char* unit) {
    out.push_back({std::move(name), value, unit});
  };
  if (!round_latency_us.empty()) {
    std::vector<double> xs;
    for (const auto& [r, l] : round_latency_us) xs.push_back(l / delta_us);
    add("rounds_measured", static_cast<double>(xs.size()), "rounds");
    add("mean_round_latency", mean_round_latency(), "delta");
    add("p50_round_latency", percentile(xs, 0.50), "delta");
    add("p95_round_latency", percentile(xs, 0.95), "delta");
    add("max_round_latency", *std::max_element(xs.begin(), xs.end()), "delta");
  }
  if (steady_start) add("steady_state_start", static_cast<double>(*steady_start), "round");
  if (auto v = steady_mean_round_latency()) add("steady_mean_round_latency", *v, "delta");
  if (auto v = mean_consensus_latency()) add("mean_consensus_latency", *v, "delta");
  if (auto v = steady_mean_consensus_latency()) add("steady_mean_consensus_latency", *v, "delta");
  // A report with no measured rounds and no slots is empty and emits no rows.
  const bool measured = !round_latency_us.empty() || !slots.empty();
  std::uint64_t committed = 0;
  for (const auto& s : slots) committed += s.committed ? 1 : 0;
  if (measured) {
    add("committed_slots", static_cast<double>(committed), "count");
    add("skipped_slots", static_cast<double>(slots.size() - committed), "count");
  }
  for (const auto& [mode, k] : pull_requests) add("pull_requests." + mode, static_cast<double>(k), "count");
  for (const auto& [mode, k] : pull_batches) add("pull_batches." + mode, static_cast<double>(k), "count");
  if (measured || !blames.empty()) add("blame_events", static_cast<double>(blames.size()), "count");
  for (std::size_t k = 0; k < committed_authors.size(); ++k)
    add("committed_authors.v" + std::to_string(k), static_cast<double>(committed_authors[k]), "count");
  for (std::size_t k = 0; k < live_entries.size(); ++k)
    add("live_entries.v" + std::to_string(k), static_cast<double>(live_entries[k]), "count");
  if (dump_round) add("dump_round", static_cast<double>(*dump_round), "round");
  if (parity_round) add("parity_round", static_cast<double>(*parity_round), "round");
  if (auto v = post_dump_mean_round_latency()) add("post_dump_mean_round_latency", *v, "delta");
  for (const auto& [r, l] : round_latency_us) add("round_latency.r" + std::to_string(r), l, "us");
  for (const auto& s : slots)
    if (s.committed) add("slot_latency.r" + std::to_string(s.round), s.latency_us, "us");
  for (const auto& b : blames)
    add("blame.v" + std::to_string(b.observer) + ".a" + std::to_string(b.author) + ".r" +
            std::to_string(b.round),
        static_cast<double>(b.t), "us");
  for (const auto& p : reputation)
    add("reputation.v" + std::to_string(p.observer) + ".a" + std::to_string(p.subject) + ".t" +
            std::to_string(p.t),
        static_cast<double>(p.score), "score");
  return out;
}

std::optional<double> MetricsReport::metric(const std::string& name) const {
  for (const auto& m : metrics())
    if (m.name == name) return m.value;
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Running

SimulationRun simulate(const ScenarioConfig& cfg) {
  SimulationRun run;
  run.config = cfg.resolved();
  const auto& c = run.config;
  const auto pcfg = c.protocol();

  std::vector<std::unique_ptr<Synchronizer>> validators;
  for (std::uint32_t i = 0; i < c.n; ++i) {
    ValidatorOptions opts;
    opts.max_round = c.rounds_target + 3;
    opts.seed = c.seed;
    if (const auto* cr = std::get_if<Crash>(&c.adversaries[i])) {
      opts.max_round = std::min(opts.max_round, cr->at_round);
      opts.halt_at_max = true;
    }
    switch (c.synchronizer) {
      case SynchronizerKind::Sysname:
        validators.push_back(
            std::make_unique<HybridSynchronizer>(ValidatorId(i), pcfg, opts, c.initial_reputation));
        break;
      case SynchronizerKind::Uncertified:
        validators.push_back(std::make_unique<UncertifiedSynchronizer>(ValidatorId(i), pcfg, opts));
        break;
      case SynchronizerKind::Certified:
        validators.push_back(std::make_unique<CertifiedSynchronizer>(ValidatorId(i), pcfg, opts));
        break;
    }
  }
  run.sim = std::make_unique<Simulator>(c.network(), std::move(validators), c.adversaries, c.seed);
  run.sim->run(ms_to_us(c.horizon_ms));
  run.trace.meta = {{"config", to_json(c)}, {"seed", c.seed}};
  run.trace.records = run.sim->trace();
  return run;
}

ScenarioResult run_scenario(const ScenarioConfig& cfg) {
  auto run = simulate(cfg);
  ScenarioResult out;
  out.report = compute_report(run.config, run.trace.records);
  out.trace = std::move(run.trace);
  return out;
}

namespace {

std::string format_value(double v) {
  char buf[64];
  if (std::isfinite(v) && v == std::floor(v) && std::abs(v) < 1e15)
    std::snprintf(buf, sizeof buf, "%lld", static_cast<long long>(v));
  else
    std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch;
  }
  return out + "\"";
}

}  // namespace

std::string csv_string(const MetricsReport& report) {
  std::ostringstream os;
  os << "scenario_id,seed,synchronizer,n,f,metric_name,value,unit\n";
  const std::string prefix = csv_field(report.scenario_id) + "," + std::to_string(report.seed) +
                             "," + report.synchronizer + "," + std::to_string(report.n) + "," +
                             std::to_string(report.f) + ",";
  for (const auto& m : report.metrics())
    os << prefix << csv_field(m.name) << ',' << format_value(m.value) << ',' << m.unit << '\n';
  return os.str();
}

void emit_csv(const MetricsReport& report, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << csv_string(report);
}

MetricsReport replay(const Trace& trace) {
  if (!trace.meta.contains("config")) throw ReplayError("trace meta has no config");
  ScenarioConfig c;
  try {
    c = config_from_json(trace.meta["config"]);
  } catch (const ConfigError& e) {
    throw ReplayError(std::string("trace config: ") + e.what());
  }
  return compute_report(c, trace.records);
}

MetricsReport replay(const std::filesystem::path& trace_path) {
  std::ifstream in(trace_path);
  if (!in) throw ReplayError("cannot open trace " + trace_path.string());
  return replay(read_trace(in));
}

std::vector<std::string> check_expectations(const ScenarioConfig& cfg, const MetricsReport& report) {
  std::vector<std::string> out;
  const auto metrics = report.metrics();
  for (const auto& [name, b] : cfg.expect) {
    auto it = std::find_if(metrics.begin(), metrics.end(),
                           [&](const Metric& m) { return m.name == name; });
    if (it == metrics.end()) {
      out.push_back(name + ": missing from report");
      continue;
    }
    if (b.min && it->value < *b.min)
      out.push_back(name + " = " + format_value(it->value) + " < min " + format_value(*b.min));
    if (b.max && it->value > *b.max)
      out.push_back(name + " = " + format_value(it->value) + " > max " + format_value(*b.max));
  }
  return out;
}

}  // namespace bsync
