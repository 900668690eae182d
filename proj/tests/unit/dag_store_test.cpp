#include <gtest/gtest.h>

#include "bsync/dag_store.hpp"
#include "builder.hpp"
#include "mixed_dag.hpp"

namespace bsync {
namespace {

using test::Builder;
using test::config;
using test::MixedDag;

TEST(InsertReceived, Idempotent) {
  Builder b(config(4, 1));
  DagState s(b.cfg());
  EXPECT_EQ(s.insert_received(b.at(0, 0)), InsertResult::Inserted);
  EXPECT_EQ(s.insert_received(b.at(0, 0)), InsertResult::DuplicateIgnored);
  EXPECT_EQ(s.received_count(), 1u);
  EXPECT_FALSE(s.accepted(b.at(0, 0)->digest));
}

TEST(InsertReceived, ForwardReferenceIndexed) {
  Builder b(config(4, 1));
  auto child = b.add(1, 0, {0, 1, 2});
  DagState s(b.cfg());
  s.insert_received(child);
  const auto& refs = s.referencers(b.at(1, 0)->digest);
  ASSERT_EQ(refs.size(), 1u);
  EXPECT_EQ(refs[0], child->digest);
  EXPECT_EQ(s.referenced_digest({ValidatorId(1), 0}), b.at(1, 0)->digest);
}

TEST(InsertReceived, CountsWeakReferencers) {
  Builder b(config(4, 1));
  for (std::uint32_t a = 0; a < 4; ++a) b.add(1, a, a == 3 ? std::vector<std::uint32_t>{0, 1, 3} : std::vector<std::uint32_t>{0, 1, 2});
  DagState s(b.cfg());
  for (std::uint32_t a = 0; a < 3; ++a) s.insert_received(b.add(2, a, {0, 1, 2}, {{3, 1}}));
  EXPECT_EQ(s.referencers(b.at(3, 1)->digest).size(), 3u);
}

TEST(ImplicitPoa, MixedDagMissingParentIsAvailable) {
  MixedDag fig;
  auto s = fig.base_state();
  for (const auto& blk : fig.round_r2()) s.insert_received(blk);
  EXPECT_TRUE(s.implicit_poa(fig.b(0, MixedDag::r + 1)->digest));
  EXPECT_FALSE(s.implicit_poa(fig.b(2, MixedDag::r + 1)->digest));
}

TEST(ImplicitPoa, SingleReferencerIsNotEnough) {
  MixedDag fig;
  auto s = fig.base_state();
  s.insert_received(fig.b(1, MixedDag::r + 2));
  EXPECT_FALSE(s.implicit_poa(fig.b(0, MixedDag::r + 1)->digest));
}

TEST(ImplicitPoa, SameAuthorTwiceIsNotEnough) {
  MixedDag fig;
  auto s = fig.base_state();
  auto first = fig.dag.draft(MixedDag::r + 2, 1, {0, 1, 3});
  auto second = first;
  second.payload = {9};
  s.insert_received(fig.dag.put(first));
  s.insert_received(fig.dag.put(second));
  EXPECT_EQ(s.referencers(fig.b(0, MixedDag::r + 1)->digest).size(), 2u);
  EXPECT_FALSE(s.implicit_poa(fig.b(0, MixedDag::r + 1)->digest));
}

TEST(IsAcceptable, Cases) {
  MixedDag fig;
  auto s = fig.base_state();
  EXPECT_TRUE(s.is_acceptable(*fig.b(1, MixedDag::r + 1)));
  for (const auto& blk : fig.round_r2()) s.insert_received(blk);
  EXPECT_TRUE(s.is_acceptable(*fig.b(1, MixedDag::r + 2)));
  EXPECT_TRUE(s.is_acceptable(*fig.b(3, MixedDag::r + 2)));
  EXPECT_FALSE(s.is_acceptable(*fig.b(2, MixedDag::r + 2)));
}

TEST(Accept, GenesisEmitsAcceptThenStore) {
  Builder b(config(4, 1));
  DagState s(b.cfg(), AcceptRule::Explicit);
  std::vector<AcceptEvent> all;
  for (std::uint32_t a = 0; a < 4; ++a) {
    s.insert_received(b.at(a, 0));
    auto ev = s.accept(b.at(a, 0)->digest);
    all.insert(all.end(), ev.begin(), ev.end());
  }
  ASSERT_EQ(all.size(), 8u);
  for (std::size_t i = 0; i < all.size(); i += 2) {
    EXPECT_EQ(all[i].kind, AcceptKind::Accept);
    EXPECT_EQ(all[i + 1].kind, AcceptKind::Store);
    EXPECT_EQ(all[i].digest, all[i + 1].digest);
  }
}

TEST(Accept, CascadesInRoundAuthorOrder) {
  Builder b(config(4, 1));
  auto child = b.add(1, 0, {0, 1, 2});
  DagState s(b.cfg());
  s.insert_received(child);
  for (std::uint32_t a : {2u, 1u, 0u}) s.insert_received(b.at(a, 0));
  const auto ev = s.accept(b.at(1, 0)->digest);
  std::vector<BlockDigest> expected{b.at(1, 0)->digest, b.at(0, 0)->digest, b.at(2, 0)->digest,
                                    child->digest};
  ASSERT_EQ(ev.size(), 2 * expected.size());
  for (std::size_t i = 0; i < expected.size(); ++i) {
    EXPECT_EQ(ev[2 * i], (AcceptEvent{AcceptKind::Accept, expected[i], b.by_digest(expected[i])->slot()}));
    EXPECT_EQ(ev[2 * i + 1].kind, AcceptKind::Store);
  }
  EXPECT_TRUE(s.accept(child->digest).empty());
}

TEST(Accept, PreconditionErrors) {
  MixedDag fig;
  auto s = fig.base_state();
  try {
    s.accept(fig.b(2, MixedDag::r)->digest);
    FAIL() << "expected NotReceived";
  } catch (const DagError& e) {
    EXPECT_EQ(e.code, DagError::Code::NotReceived);
  }
  s.insert_received(fig.b(2, MixedDag::r + 2));
  try {
    s.accept(fig.b(2, MixedDag::r + 2)->digest);
    FAIL() << "expected NotAcceptable";
  } catch (const DagError& e) {
    EXPECT_EQ(e.code, DagError::Code::NotAcceptable);
  }
}

TEST(MissingAncestors, MixedDagLiveAndBulk) {
  MixedDag fig;
  auto s = fig.base_state();
  for (const auto& blk : fig.round_r2()) s.insert_received(blk);
  s.accept_ready();
  ASSERT_TRUE(s.accepted(fig.b(1, MixedDag::r + 2)->digest));
  ASSERT_TRUE(s.accepted(fig.b(3, MixedDag::r + 2)->digest));
  ASSERT_FALSE(s.accepted(fig.b(2, MixedDag::r + 2)->digest));
  s.add_live(fig.b(2, MixedDag::r + 2)->digest);

  const std::set<Slot> live{MixedDag::slot(2, MixedDag::r), MixedDag::slot(2, MixedDag::r + 1)};
  const std::set<Slot> bulk{MixedDag::slot(0, MixedDag::r + 1)};
  EXPECT_EQ(s.missing_ancestors(Scope::Live), live);
  EXPECT_EQ(s.missing_ancestors(Scope::Bulk), bulk);
}

TEST(MissingAncestors, EmptySetsYieldNothing) {
  MixedDag fig;
  auto s = fig.base_state();
  EXPECT_TRUE(s.missing_ancestors(Scope::Live).empty());
  EXPECT_TRUE(s.missing_ancestors(Scope::Bulk).empty());
}

TEST(MissingAncestors, SharedEntryOnlyInLive) {
  MixedDag fig;
  auto s = fig.base_state();
  for (const auto& blk : fig.round_r2()) s.insert_received(blk);
  s.accept_ready();
  auto twin = fig.dag.draft(MixedDag::r + 2, 2, {0, 1, 2});
  twin.payload = {1};
  auto twin_ptr = fig.dag.put(twin);
  s.insert_received(twin_ptr);
  s.add_live(fig.b(2, MixedDag::r + 2)->digest);
  s.add_bulk(twin_ptr->digest);

  const auto live = s.missing_ancestors(Scope::Live);
  const auto bulk = s.missing_ancestors(Scope::Bulk);
  EXPECT_TRUE(live.count(MixedDag::slot(2, MixedDag::r)));
  EXPECT_FALSE(bulk.count(MixedDag::slot(2, MixedDag::r)));
  EXPECT_FALSE(bulk.count(MixedDag::slot(2, MixedDag::r + 1)));
  EXPECT_TRUE(bulk.count(MixedDag::slot(0, MixedDag::r + 1)));
}

// Property: random DAGs delivered partially and out of order.
TEST(DagStoreProperty, AcceptanceInvariants) {
  std::mt19937_64 rng(23);
  for (int iter = 0; iter < 150; ++iter) {
    const std::uint32_t f = 1 + rng() % 2;
    const auto cfg = config(3 * f + 1 + rng() % 2, f);
    auto dag = test::random_dag(rng, cfg, 5 + static_cast<Round>(rng() % 4));
    auto blocks = dag.all();
    std::shuffle(blocks.begin(), blocks.end(), rng);
    const std::size_t keep = blocks.size() / 2 + rng() % (blocks.size() / 2 + 1);

    DagState s(cfg);
    std::set<BlockDigest> received;
    std::set<std::pair<int, BlockDigest>> emitted;
    auto check_events = [&](const std::vector<AcceptEvent>& ev) {
      for (const auto& e : ev) {
        ASSERT_TRUE(emitted.insert({static_cast<int>(e.kind), e.digest}).second) << "duplicate event";
        ASSERT_TRUE(received.count(e.digest));
        if (e.kind != AcceptKind::Accept) continue;
        // Every parent accepted or referenced by f+1 distinct later authors.
        for (const auto& p : dag.by_digest(e.digest)->parents) {
          if (s.accepted(p.digest)) continue;
          std::set<ValidatorId> authors;
          for (const auto& d : received) {
            const auto& x = dag.by_digest(d);
            if (x->round <= p.round) continue;
            auto links = x->parents;
            links.insert(links.end(), x->weaklinks.begin(), x->weaklinks.end());
            for (const auto& l : links)
              if (l.digest == p.digest) authors.insert(x->author);
          }
          ASSERT_GE(authors.size(), cfg.weak_quorum());
        }
      }
    };

    for (std::size_t i = 0; i < keep; ++i) {
      s.insert_received(blocks[i]);
      received.insert(blocks[i]->digest);
      check_events(s.accept_ready());
      if (rng() % 3 == 0) {
        auto pending = s.pending_blocks();
        if (!pending.empty()) {
          const auto* pick = pending[rng() % pending.size()];
          if (rng() % 2) s.add_live(pick->digest);
          else s.add_bulk(pick->digest);
        }
      }
      const auto live = s.missing_ancestors(Scope::Live);
      for (const auto& slot : s.missing_ancestors(Scope::Bulk)) ASSERT_FALSE(live.count(slot));
      for (const auto& slot : live) ASSERT_FALSE(s.has_slot(slot));
      for (const auto& d : s.live_set()) ASSERT_FALSE(s.bulk_set().count(d));
    }

    for (std::uint32_t k = 0; k < cfg.n; ++k) {
      Round expected = kNoRound;
      while (dag.has(k, expected + 1) && s.accepted(dag.at(k, expected + 1)->digest)) ++expected;
      EXPECT_EQ(s.last_accepted(ValidatorId(k)), expected);
    }

    for (std::size_t i = keep; i < blocks.size(); ++i) {
      s.insert_received(blocks[i]);
      received.insert(blocks[i]->digest);
      check_events(s.accept_ready());
    }
    EXPECT_EQ(s.accepted_count(), blocks.size());
    EXPECT_EQ(emitted.size(), 2 * blocks.size());
  }
}

// Property: under the full-history rule an accepted block's whole causal
// history is accepted.
TEST(DagStoreProperty, FullHistoryIsCausallyClosed) {
  std::mt19937_64 rng(29);
  for (int iter = 0; iter < 100; ++iter) {
    const auto cfg = config(4 + rng() % 4, 1);
    auto dag = test::random_dag(rng, cfg, 6);
    auto blocks = dag.all();
    std::shuffle(blocks.begin(), blocks.end(), rng);
    DagState s(cfg, AcceptRule::FullHistory);
    for (std::size_t i = 0; i < blocks.size() * 2 / 3; ++i) {
      s.insert_received(blocks[i]);
      s.accept_ready();
    }
    for (const auto& blk : blocks) {
      if (!s.accepted(blk->digest)) continue;
      for (const auto& d : dag.causal_history(blk->digest)) ASSERT_TRUE(s.accepted(d));
    }
  }
}

}  // namespace
}  // namespace bsync
