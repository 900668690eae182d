// Scenario runner: run, replay, sweep.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <mutex>
#include <thread>

#include "bsync/harness.hpp"

namespace fs = std::filesystem;
using namespace bsync;

namespace {

std::pair<std::uint64_t, std::uint64_t> parse_seed_range(const std::string& s) {
  const auto dots = s.find("..");
  if (dots == std::string::npos) throw CLI::ValidationError("--seeds", "expected a..b");
  const auto a = std::stoull(s.substr(0, dots));
  const auto b = std::stoull(s.substr(dots + 2));
  if (b < a) throw CLI::ValidationError("--seeds", "empty range");
  return {a, b};
}

int report_violations(const std::string& label, const std::vector<std::string>& violations) {
  for (const auto& v : violations) std::cerr << label << ": FAIL " << v << '\n';
  return violations.empty() ? 0 : 1;
}

int cmd_run(const std::string& config_path, std::optional<std::uint64_t> seed, const fs::path& out,
            bool assert_expect) {
  auto cfg = load_config(config_path);
  if (seed) cfg.seed = *seed;
  cfg = cfg.resolved();
  auto result = run_scenario(cfg);
  fs::create_directories(out);
  {
    std::ofstream os(out / "trace.ndjson", std::ios::binary | std::ios::trunc);
    write_trace(os, result.trace);
  }
  {
    std::ofstream os(out / "config.json", std::ios::binary | std::ios::trunc);
    os << to_json(cfg).dump(2) << '\n';
  }
  emit_csv(result.report, out / "report.csv");
  const auto& r = result.report;
  std::cout << cfg.scenario_id << " seed=" << cfg.seed << " sync=" << r.synchronizer
            << " mean_round_latency=" << r.mean_round_latency() << "δ";
  if (auto c = r.mean_consensus_latency()) std::cout << " mean_consensus_latency=" << *c << "δ";
  std::cout << " -> " << out.string() << '\n';
  if (!assert_expect) return 0;
  return report_violations(cfg.scenario_id, check_expectations(cfg, r));
}

int cmd_replay(const fs::path& trace_path, const std::optional<fs::path>& out) {
  auto report = replay(trace_path);
  if (out)
    emit_csv(report, *out);
  else
    std::cout << csv_string(report);
  return 0;
}

int cmd_sweep(const std::string& config_path, const std::string& seeds,
              const std::optional<fs::path>& out, unsigned jobs, bool assert_expect) {
  const auto base = load_config(config_path);
  const auto [a, b] = parse_seed_range(seeds);
  const std::size_t count = static_cast<std::size_t>(b - a + 1);
  std::vector<std::string> csv(count);
  std::vector<std::vector<std::string>> violations(count);
  std::vector<std::string> errors(count);
  std::size_t next = 0;
  std::mutex mu;

  auto worker = [&] {
    for (;;) {
      std::size_t i;
      {
        std::lock_guard lock(mu);
        if (next >= count) return;
        i = next++;
      }
      auto cfg = base;
      cfg.seed = a + i;
      try {
        cfg = cfg.resolved();
        auto result = run_scenario(cfg);
        csv[i] = csv_string(result.report);
        violations[i] = check_expectations(cfg, result.report);
      } catch (const std::exception& e) {
        errors[i] = e.what();
      }
    }
  };
  std::vector<std::thread> pool;
  for (unsigned k = 0; k < std::max(1u, jobs); ++k) pool.emplace_back(worker);
  for (auto& t : pool) t.join();

  std::ostringstream merged;
  bool header = true;
  int status = 0;
  for (std::size_t i = 0; i < count; ++i) {
    const std::string label = base.scenario_id + " seed=" + std::to_string(a + i);
    if (!errors[i].empty()) {
      std::cerr << label << ": ERROR " << errors[i] << '\n';
      status = 2;
      continue;
    }
    const auto& text = csv[i];
    merged << (header ? text : text.substr(text.find('\n') + 1));
    header = false;
    if (assert_expect && report_violations(label, violations[i]) != 0 && status == 0) status = 1;
  }
  if (out) {
    std::ofstream os(*out, std::ios::binary | std::ios::trunc);
    os << merged.str();
  } else {
    std::cout << merged.str();
  }
  return status;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"DAG block synchronizer simulator"};
  app.require_subcommand(1);

  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out_dir = "out";
  bool assert_expect = false;
  auto* run = app.add_subcommand("run", "run one scenario and write trace, config and CSV");
  run->add_option("--config", config, "scenario JSON")->required()->check(CLI::ExistingFile);
  run->add_option("--seed", seed, "overrides the config seed");
  run->add_option("--out", out_dir, "output directory");
  run->add_flag("--assert", assert_expect, "exit 1 when an `expect` bound is violated");

  std::string trace_path;
  std::optional<std::string> replay_out;
  auto* rep = app.add_subcommand("replay", "recompute the CSV report from a trace");
  rep->add_option("--trace", trace_path, "trace.ndjson")->required()->check(CLI::ExistingFile);
  rep->add_option("--out", replay_out, "CSV path (default stdout)");

  std::string seeds;
  std::optional<std::string> sweep_out;
  unsigned jobs = 1;
  bool sweep_assert = false;
  auto* sweep = app.add_subcommand("sweep", "run one config over a seed range");
  sweep->add_option("--config", config, "scenario JSON")->required()->check(CLI::ExistingFile);
  sweep->add_option("--seeds", seeds, "inclusive range a..b")->required();
  sweep->add_option("--out", sweep_out, "merged CSV path (default stdout)");
  sweep->add_option("--jobs", jobs, "worker threads");
  sweep->add_flag("--assert", sweep_assert, "exit 1 when an `expect` bound is violated");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) return cmd_run(config, seed, out_dir, assert_expect);
    if (*rep) return cmd_replay(trace_path, replay_out ? std::optional<fs::path>(*replay_out) : std::nullopt);
    if (*sweep)
      return cmd_sweep(config, seeds, sweep_out ? std::optional<fs::path>(*sweep_out) : std::nullopt,
                       jobs, sweep_assert);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const ReplayError& e) {
    std::cerr << "replay error: " << e.what() << '\n';
    return 2;
  } catch (const NonQuiescentTimeout& e) {
    std::cerr << "timeout: " << e.what() << '\n';
    return 3;
  }
  return 0;
}
