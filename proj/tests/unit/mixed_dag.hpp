#pragma once

#include "builder.hpp"
#include "bsync/dag_store.hpp"

namespace bsync::test {

/// Four validators (indices 0..3 stand for v1..v4), seen from v4 at round
/// r+2. v4 has everything up to round r-1. It lacks v3's round r and r+1
/// blocks and v1's round r+1 block. v1's round r+1 block is linked by
/// v2, v3 and v4 at round r+2; v3's round r+1 block only by v3's own.
struct MixedDag {
  static constexpr Round r = 3;
  Builder dag{config(4, 1)};

  MixedDag() {
    for (Round k = 1; k < r; ++k)
      for (std::uint32_t a = 0; a < 4; ++a)
        dag.add(k, a, a == 3 ? std::vector<std::uint32_t>{0, 1, 3} : std::vector<std::uint32_t>{0, 1, 2});
    for (std::uint32_t a : {0u, 1u, 3u}) dag.add(r, a, {0, 1, 3});
    dag.add(r, 2, {0, 1, 2});
    for (std::uint32_t a : {0u, 1u, 3u}) dag.add(r + 1, a, {0, 1, 3});
    dag.add(r + 1, 2, {0, 1, 2});
    for (std::uint32_t a : {1u, 3u}) dag.add(r + 2, a, {0, 1, 3});
    dag.add(r + 2, 2, {0, 1, 2});
  }

  BlockPtr b(std::uint32_t author, Round round) const { return dag.at(author, round); }

  /// Blocks v4 holds, in delivery order.
  std::vector<BlockPtr> received() const {
    std::vector<BlockPtr> out;
    for (Round k = 0; k < r; ++k)
      for (std::uint32_t a = 0; a < 4; ++a) out.push_back(b(a, k));
    for (std::uint32_t a : {0u, 1u, 3u}) out.push_back(b(a, r));
    for (std::uint32_t a : {1u, 3u}) out.push_back(b(a, r + 1));
    return out;
  }
  std::vector<BlockPtr> round_r2() const { return {b(1, r + 2), b(3, r + 2), b(2, r + 2)}; }

  static Slot slot(std::uint32_t author, Round round) { return {ValidatorId(author), round}; }

  /// v4's store after accepting everything received below round r+2.
  DagState base_state() const {
    DagState s(dag.cfg());
    for (const auto& blk : received()) s.insert_received(blk);
    s.accept_ready();
    return s;
  }
};

}  // namespace bsync::test
