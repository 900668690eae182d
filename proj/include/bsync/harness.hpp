#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "bsync/adversary.hpp"
#include "bsync/simnet.hpp"
#include "bsync/trace.hpp"

namespace bsync {

enum class SynchronizerKind { Sysname, Uncertified, Certified };

std::string_view to_string(SynchronizerKind k);
SynchronizerKind synchronizer_from_string(std::string_view s);

/// Link delays: exactly one of a uniform δ, an explicit matrix, or a random
/// symmetric matrix drawn from [lo, hi] using the scenario seed.
struct DelaySpec {
  std::optional<double> uniform_ms;
  std::vector<std::vector<double>> matrix_ms;
  std::optional<std::pair<double, double>> random_range_ms;
};

struct MetricBounds {
  std::optional<double> min;
  std::optional<double> max;
};

struct ScenarioConfig {
  std::string scenario_id = "scenario";
  std::uint32_t n = 4;
  std::uint32_t f = 1;
  SynchronizerKind synchronizer = SynchronizerKind::Sysname;
  DelaySpec delays{100.0, {}, std::nullopt};
  double delta_bound_ms = 0;  // Δ; 0 before defaulting means "largest link delay"
  double gst_ms = 0;
  bool pre_gst_chaos = false;
  std::int64_t reputation_penalty = 10000;  // R_L
  double bulk_retry_ms = 0;                  // Δ_bk; 0 before defaulting means 2Δ
  double live_retry_ms = 0;                  // 0 before defaulting means 2Δ
  double leader_timeout_ms = 2000;
  Round watermark_lag = 1;
  std::uint32_t pull_fanout = 2;
  std::vector<AdversaryPolicy> adversaries;  // n entries after defaulting
  std::vector<std::int64_t> initial_reputation;
  Round rounds_target = 100;
  Round warmup_rounds = 10;
  Round recovery_window = 5;  // R_recovery
  std::uint64_t seed = 1;
  double horizon_ms = 0;  // 0 before defaulting means derived from the round count
  std::map<std::string, MetricBounds> expect;

  /// Fills every derived default and validates. Throws ConfigError.
  ScenarioConfig resolved() const;
  ProtocolConfig protocol() const;
  /// Built from `seed` when the delay spec is random.
  NetworkModel network() const;
  /// Largest off-diagonal link delay; the unit for δ multiples.
  Micros reference_delta() const;
  std::vector<bool> honest() const;
};

nlohmann::json to_json(const ScenarioConfig& c);
/// Missing fields take their defaults. Throws ConfigError.
ScenarioConfig config_from_json(const nlohmann::json& j);
ScenarioConfig load_config(const std::filesystem::path& path);

struct Metric {
  std::string name;
  double value = 0;
  std::string unit;
};

struct BlameRecord {
  std::int64_t t = 0;
  std::uint32_t observer = 0;
  std::uint32_t author = 0;
  Round round = kNoRound;
  std::string cause;
};

struct ReputationPoint {
  std::int64_t t = 0;
  std::uint32_t observer = 0;
  std::uint32_t subject = 0;
  std::int64_t score = 0;
};

struct SlotLatency {
  Round round = 0;
  bool committed = false;
  double latency_us = 0;  // committed only
};

/// Everything here is computed from the trace and the scenario config.
struct MetricsReport {
  std::string scenario_id;
  std::uint64_t seed = 0;
  std::string synchronizer;
  std::uint32_t n = 0;
  std::uint32_t f = 0;
  double delta_us = 0;

  std::vector<std::pair<Round, double>> round_latency_us;  // L(r), r = 1..rounds_target
  std::vector<SlotLatency> slots;
  std::optional<Round> steady_start;
  std::map<std::string, std::uint64_t> pull_requests;  // by mode
  std::map<std::string, std::uint64_t> pull_batches;   // distinct (requester, batch, attempt)
  std::vector<BlameRecord> blames;
  std::vector<ReputationPoint> reputation;
  std::vector<std::uint64_t> committed_authors;
  std::vector<std::uint64_t> live_entries;  // Live records at honest validators, by author
  std::optional<Round> dump_round;          // first committed slot carrying hoarded blocks
  std::optional<Round> parity_round;        // first slot after it with author parity restored
  std::optional<Round> hoard_rounds;        // rounds after this one count as post-dump

  /// Flat metric list in a fixed order; the CSV is exactly this.
  std::vector<Metric> metrics() const;
  std::optional<double> metric(const std::string& name) const;

  double mean_round_latency() const;  // δ multiples
  std::optional<double> steady_mean_round_latency() const;
  std::optional<double> post_dump_mean_round_latency() const;
  std::optional<double> mean_consensus_latency() const;
  std::optional<double> steady_mean_consensus_latency() const;
  std::uint64_t honest_blames(const std::vector<bool>& honest) const;
};

MetricsReport compute_report(const ScenarioConfig& cfg, const std::vector<TraceRecord>& records);

/// A finished simulation, kept alive so validator state can be inspected.
struct SimulationRun {
  ScenarioConfig config;
  std::unique_ptr<Simulator> sim;
  Trace trace;
};

/// Builds validators and the network and runs to quiescence.
/// Throws ConfigError or NonQuiescentTimeout.
SimulationRun simulate(const ScenarioConfig& cfg);

struct ScenarioResult {
  Trace trace;
  MetricsReport report;
};

ScenarioResult run_scenario(const ScenarioConfig& cfg);

std::string csv_string(const MetricsReport& report);
void emit_csv(const MetricsReport& report, const std::filesystem::path& path);

MetricsReport replay(const Trace& trace);
/// Throws ReplayError on a truncated or malformed file.
MetricsReport replay(const std::filesystem::path& trace_path);

/// Violations of the config's `expect` bounds; empty when all hold.
std::vector<std::string> check_expectations(const ScenarioConfig& cfg, const MetricsReport& report);

}  // namespace bsync
