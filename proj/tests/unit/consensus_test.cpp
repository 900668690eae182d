#include <gtest/gtest.h>

#include "bsync/consensus.hpp"
#include "bsync/harness.hpp"
#include "builder.hpp"

namespace bsync {
namespace {

using test::Builder;
using test::config;

const std::vector<std::uint32_t> kAll{0, 1, 2, 3};

DagState accept_all(const Builder& dag, const std::vector<BlockPtr>& skip = {}) {
  DagState s(dag.cfg(), AcceptRule::Explicit);
  for (const auto& b : dag.all()) {
    if (std::find(skip.begin(), skip.end(), b) != skip.end()) continue;
    s.insert_received(b);
    s.accept(b->digest);
  }
  return s;
}

TEST(LeaderSlot, RoundRobin) {
  for (Round r = 0; r < 12; ++r) EXPECT_EQ(leader_slot(r, 4).leader, ValidatorId(static_cast<std::uint32_t>(r % 4)));
}

TEST(DetectRbcPattern, ThreeOfFourNextRoundLinks) {
  Builder dag(config(4, 1));
  for (auto a : kAll) dag.add(1, a, a == 3 ? std::vector<std::uint32_t>{0, 1, 3} : std::vector<std::uint32_t>{0, 1, 2});
  dag.add(2, 0, {0, 1, 3});
  dag.add(2, 1, {0, 1, 3});
  dag.add(2, 2, {0, 1, 2});
  dag.add(2, 3, {0, 1, 3});
  EXPECT_TRUE(detect_rbc_pattern(accept_all(dag), dag.at(3, 1)->digest, dag.cfg()));
}

TEST(DetectRbcPattern, TwoLinksAreNotEnough) {
  Builder dag(config(4, 1));
  for (auto a : kAll) dag.add(1, a, a == 3 ? std::vector<std::uint32_t>{0, 1, 3} : std::vector<std::uint32_t>{0, 1, 2});
  dag.add(2, 0, {0, 1, 3});
  dag.add(2, 1, {1, 2, 3});
  dag.add(2, 2, {0, 1, 2});
  EXPECT_FALSE(detect_rbc_pattern(accept_all(dag), dag.at(3, 1)->digest, dag.cfg()));
}

TEST(DetectRbcPattern, LinksTwoRoundsLaterDoNotCount) {
  Builder dag(config(4, 1));
  for (auto a : kAll) dag.add(1, a, a == 3 ? std::vector<std::uint32_t>{0, 1, 3} : std::vector<std::uint32_t>{0, 1, 2});
  for (std::uint32_t a = 0; a < 3; ++a) dag.add(2, a, {0, 1, 2});
  for (std::uint32_t a = 0; a < 3; ++a) dag.add(3, a, {0, 1, 2}, {{3, 1}});
  const auto s = accept_all(dag);
  EXPECT_EQ(s.referencers(dag.at(3, 1)->digest).size(), 3u);
  EXPECT_FALSE(detect_rbc_pattern(s, dag.at(3, 1)->digest, dag.cfg()));
}

Builder full_dag(Round rounds) {
  Builder dag(config(4, 1));
  for (Round r = 1; r <= rounds; ++r)
    for (auto a : kAll) dag.add(r, a, kAll);
  return dag;
}

TEST(TryCommit, CommitsAfterTwoMoreRounds) {
  auto dag = full_dag(3);
  const auto slot = leader_slot(1, 4);
  const auto rec = try_commit(accept_all(dag), slot, millis(300), dag.cfg());
  ASSERT_TRUE(rec);
  EXPECT_EQ(rec->status, SlotStatus::Committed);
  EXPECT_EQ(rec->digest, dag.at(slot.leader.value, 1)->digest);
  EXPECT_EQ(rec->decided_at, millis(300));

  auto short_dag = full_dag(2);
  EXPECT_FALSE(try_commit(accept_all(short_dag), slot, millis(300), dag.cfg()));
}

TEST(TryCommit, WithheldLeaderNeverCommits) {
  Builder dag(config(4, 1));
  const auto slot = leader_slot(1, 4);
  std::vector<std::uint32_t> others;
  for (auto a : kAll)
    if (a != slot.leader.value) others.push_back(a);
  for (Round r = 1; r <= 4; ++r)
    for (auto a : others) dag.add(r, a, others);
  EXPECT_FALSE(try_commit(accept_all(dag), slot, millis(400), dag.cfg()));
}

TEST(CommitTracker, CommittedSlotIsNeverSkipped) {
  auto dag = full_dag(3);
  CommitTracker tracker(dag.cfg());
  const auto first = tracker.evaluate(accept_all(dag), millis(300));
  ASSERT_EQ(first.size(), 1u);
  EXPECT_EQ(first[0].slot.round, 1);
  EXPECT_EQ(first[0].status, SlotStatus::Committed);
  EXPECT_TRUE(tracker.skip(1, millis(5000)).empty());

  const auto skipped = tracker.skip(2, millis(5000));
  ASSERT_EQ(skipped.size(), 1u);
  EXPECT_EQ(skipped[0].status, SlotStatus::Skipped);
  EXPECT_EQ(skipped[0].position, 1u);
  EXPECT_EQ(skip_leader(leader_slot(7, 4), millis(1)).status, SlotStatus::Skipped);
}

TEST(CommitTracker, OutputStaysInRoundOrder) {
  auto dag = full_dag(4);
  CommitTracker tracker(dag.cfg());
  EXPECT_TRUE(tracker.skip(3, millis(1)).empty());
  const auto out = tracker.evaluate(accept_all(dag), millis(2));
  ASSERT_EQ(out.size(), 3u);
  for (std::size_t i = 0; i < out.size(); ++i) {
    EXPECT_EQ(out[i].slot.round, static_cast<Round>(i + 1));
    EXPECT_EQ(out[i].position, i);
  }
  EXPECT_EQ(out[2].status, SlotStatus::Skipped);
}

// Property: honest validators' committed sequences agree on the slots both
// decided, and committed slots take 3δ in fault-free uniform runs.
TEST(ConsensusProperty, PrefixAgreementAcrossSeeds) {
  for (std::uint64_t seed = 1; seed <= 12; ++seed) {
    ScenarioConfig cfg;
    cfg.n = seed % 2 ? 4 : 7;
    cfg.f = seed % 2 ? 1 : 2;
    cfg.synchronizer = static_cast<SynchronizerKind>(seed % 3);
    cfg.delays = DelaySpec{std::nullopt, {}, std::make_pair(20.0, 120.0)};
    cfg.delta_bound_ms = 200;
    cfg.rounds_target = 20;
    cfg.seed = seed;
    if (seed % 3 == 0) {
      cfg.adversaries.assign(cfg.n, Honest{});
      cfg.adversaries[cfg.n - 1] = Crash{8};
    }
    auto run = simulate(cfg.resolved());
    std::vector<std::map<Round, BlockDigest>> committed;
    for (std::uint32_t v = 0; v < cfg.n; ++v) {
      std::map<Round, BlockDigest> m;
      for (const auto& rec : run.sim->validator(ValidatorId(v)).commits().output())
        if (rec.status == SlotStatus::Committed) m.emplace(rec.slot.round, rec.digest);
      committed.push_back(m);
    }
    for (std::uint32_t a = 0; a < cfg.n; ++a)
      for (std::uint32_t b = a + 1; b < cfg.n; ++b)
        for (const auto& [round, d] : committed[a]) {
          auto it = committed[b].find(round);
          if (it != committed[b].end()) {
            EXPECT_EQ(it->second, d) << "seed " << seed << " round " << round;
          }
        }
  }
}

TEST(ConsensusProperty, FaultFreeSlotsTakeThreeDelta) {
  ScenarioConfig cfg;
  cfg.rounds_target = 30;
  const auto result = run_scenario(cfg.resolved());
  std::size_t committed = 0;
  for (const auto& s : result.report.slots) {
    if (!s.committed) continue;
    ++committed;
    EXPECT_DOUBLE_EQ(s.latency_us, 3 * result.report.delta_us) << "slot " << s.round;
  }
  EXPECT_GE(committed, 25u);
}

}  // namespace
}  // namespace bsync
