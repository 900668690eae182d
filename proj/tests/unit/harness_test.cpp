#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <unistd.h>

#include "bsync/harness.hpp"
#include "bsync/trace.hpp"

namespace fs = std::filesystem;

namespace bsync {
namespace {

ScenarioConfig small(std::uint64_t seed) {
  ScenarioConfig cfg;
  cfg.scenario_id = "unit";
  cfg.delays = DelaySpec{std::nullopt, {}, std::make_pair(20.0, 80.0)};
  cfg.delta_bound_ms = 100;
  cfg.rounds_target = 12;
  cfg.seed = seed;
  return cfg.resolved();
}

std::string serialize(const Trace& t) {
  std::ostringstream os;
  write_trace(os, t);
  return os.str();
}

fs::path temp_file(const std::string& name) {
  return fs::temp_directory_path() / ("bsync_unit_" + std::to_string(::getpid()) + "_" + name);
}

TEST(Trace, RoundTrip) {
  const auto result = run_scenario(small(3));
  std::istringstream is(serialize(result.trace));
  const auto back = read_trace(is);
  EXPECT_EQ(back.meta, result.trace.meta);
  EXPECT_EQ(back.records, result.trace.records);
}

TEST(Trace, TruncatedOrMalformedIsReplayError) {
  const auto text = serialize(run_scenario(small(4)).trace);
  const auto cut = text.substr(0, text.rfind('\n', text.size() - 2) + 1);
  std::istringstream truncated(cut);
  EXPECT_THROW(read_trace(truncated), ReplayError);

  std::istringstream garbage(text.substr(0, text.find('\n') + 1) + "{not json\n");
  EXPECT_THROW(read_trace(garbage), ReplayError);

  std::istringstream empty("");
  EXPECT_THROW(read_trace(empty), ReplayError);

  const auto path = temp_file("truncated.ndjson");
  std::ofstream(path) << cut;
  EXPECT_THROW(replay(path), ReplayError);
  fs::remove(path);
}

TEST(ScenarioConfig, JsonRoundTripForShippedScenarios) {
  std::size_t seen = 0;
  for (const auto& entry : fs::directory_iterator(BSYNC_SCENARIO_DIR)) {
    if (entry.path().extension() != ".json") continue;
    ++seen;
    const auto cfg = load_config(entry.path()).resolved();
    const auto j = to_json(cfg);
    EXPECT_EQ(to_json(config_from_json(j)), j) << entry.path();
    EXPECT_EQ(to_json(config_from_json(j).resolved()), j) << entry.path();
  }
  EXPECT_GE(seen, 4u);
}

TEST(ScenarioConfig, RejectsInvalid) {
  auto bad_n = small(1);
  bad_n.n = 3;
  EXPECT_THROW(bad_n.resolved(), ConfigError);

  auto two_delays = small(1);
  two_delays.delays.uniform_ms = 50;
  EXPECT_THROW(two_delays.resolved(), ConfigError);

  auto tight_bound = small(1);
  tight_bound.delta_bound_ms = 10;
  EXPECT_THROW(tight_bound.resolved(), ConfigError);

  auto too_many_faulty = small(1);
  too_many_faulty.adversaries = {Crash{3}, Crash{3}, Honest{}, Honest{}};
  EXPECT_THROW(too_many_faulty.resolved(), ConfigError);

  auto bad_rep = small(1);
  bad_rep.initial_reputation = {1, 2};
  EXPECT_THROW(bad_rep.resolved(), ConfigError);

  EXPECT_THROW(config_from_json(nlohmann::json{{"synchronizer", "gossip"}}), ConfigError);
}

TEST(ScenarioConfig, DefaultsAreExplicitAfterResolve) {
  ScenarioConfig cfg;
  cfg.delays = DelaySpec{std::nullopt, {{0, 30, 70, 50}, {30, 0, 40, 60}, {70, 40, 0, 20}, {50, 60, 20, 0}},
                         std::nullopt};
  const auto r = cfg.resolved();
  EXPECT_DOUBLE_EQ(r.delta_bound_ms, 70);
  EXPECT_DOUBLE_EQ(r.bulk_retry_ms, 140);
  EXPECT_DOUBLE_EQ(r.live_retry_ms, 140);
  EXPECT_EQ(r.adversaries.size(), 4u);
  EXPECT_EQ(r.initial_reputation, std::vector<std::int64_t>(4, 0));
  EXPECT_GT(r.horizon_ms, 0);
  EXPECT_EQ(r.reference_delta(), millis(70));
}

TEST(EmitCsv, EmptyReportIsHeaderOnly) {
  EXPECT_EQ(csv_string(MetricsReport{}), "scenario_id,seed,synchronizer,n,f,metric_name,value,unit\n");
}

TEST(EmitCsv, ReEmitIsByteIdentical) {
  const auto report = run_scenario(small(5)).report;
  const auto a = temp_file("a.csv"), b = temp_file("b.csv");
  emit_csv(report, a);
  emit_csv(report, b);
  auto slurp = [](const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(is), {});
  };
  EXPECT_EQ(slurp(a), slurp(b));
  EXPECT_EQ(slurp(a), csv_string(report));
  fs::remove(a);
  fs::remove(b);
}

TEST(EmitCsv, OneRoundLatencyRowPerTargetRound) {
  const auto cfg = small(6);
  const auto csv = csv_string(run_scenario(cfg).report);
  std::istringstream is(csv);
  std::string line;
  std::getline(is, line);
  Round rows = 0;
  while (std::getline(is, line)) {
    std::vector<std::string> cols;
    std::stringstream ls(line);
    for (std::string c; std::getline(ls, c, ',');) cols.push_back(c);
    ASSERT_EQ(cols.size(), 8u) << line;
    EXPECT_EQ(cols[0], "unit");
    EXPECT_EQ(cols[1], "6");
    if (cols[5].rfind("round_latency.r", 0) == 0) ++rows;
  }
  EXPECT_EQ(rows, cfg.rounds_target);
}

TEST(Replay, MatchesOriginalReport) {
  const auto result = run_scenario(small(8));
  EXPECT_EQ(csv_string(replay(result.trace)), csv_string(result.report));
  const auto path = temp_file("trace.ndjson");
  {
    std::ofstream os(path, std::ios::binary);
    write_trace(os, result.trace);
  }
  EXPECT_EQ(csv_string(replay(path)), csv_string(result.report));
  fs::remove(path);
}

TEST(Replay, ForeignSeedTraceUsesItsOwnConfig) {
  ScenarioConfig cfg;
  cfg.scenario_id = "foreign";
  cfg.n = 7;
  cfg.f = 2;
  cfg.delays = DelaySpec{std::nullopt, {}, std::make_pair(20.0, 80.0)};
  cfg.delta_bound_ms = 100;
  cfg.rounds_target = 12;
  cfg.seed = 1234;
  const auto foreign = run_scenario(cfg);
  const auto replayed = replay(foreign.trace);
  EXPECT_EQ(replayed.seed, 1234u);
  EXPECT_EQ(replayed.n, 7u);
  EXPECT_EQ(replayed.scenario_id, "foreign");
  EXPECT_EQ(csv_string(replayed), csv_string(foreign.report));
  EXPECT_NE(csv_string(replayed), csv_string(run_scenario(small(1)).report));
}

TEST(CheckExpectations, ReportsViolatedBounds) {
  auto cfg = small(9);
  cfg.expect["mean_round_latency"] = MetricBounds{std::nullopt, 0.5};
  cfg.expect["committed_slots"] = MetricBounds{1.0, std::nullopt};
  cfg.expect["no_such_metric"] = MetricBounds{0.0, std::nullopt};
  const auto report = run_scenario(cfg).report;
  const auto v = check_expectations(cfg, report);
  ASSERT_EQ(v.size(), 2u);
  EXPECT_NE(v[0].find("mean_round_latency"), std::string::npos);
  EXPECT_NE(v[1].find("no_such_metric"), std::string::npos);
}

// Property: report(run(cfg, seed)) is a pure function of (cfg, seed), and the
// replayed CSV always equals the direct one.
TEST(HarnessProperty, PureFunctionOfConfigAndSeed) {
  std::mt19937_64 rng(71);
  for (int iter = 0; iter < 8; ++iter) {
    ScenarioConfig cfg;
    cfg.synchronizer = static_cast<SynchronizerKind>(rng() % 3);
    cfg.n = rng() % 2 ? 4 : 7;
    cfg.f = cfg.n == 4 ? 1 : 2;
    cfg.delays = DelaySpec{std::nullopt, {}, std::make_pair(10.0, 60.0)};
    cfg.delta_bound_ms = 120;
    cfg.gst_ms = static_cast<double>(rng() % 600);
    cfg.pre_gst_chaos = true;
    cfg.rounds_target = 10;
    cfg.seed = rng();
    const auto a = run_scenario(cfg);
    const auto b = run_scenario(cfg);
    EXPECT_EQ(serialize(a.trace), serialize(b.trace));
    EXPECT_EQ(csv_string(a.report), csv_string(b.report));
    EXPECT_EQ(csv_string(replay(a.trace)), csv_string(a.report));
  }
}

}  // namespace
}  // namespace bsync
