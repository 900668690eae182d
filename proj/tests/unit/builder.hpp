#pragma once

#include <algorithm>
#include <map>
#include <memory>
#include <random>
#include <set>
#include <stdexcept>
#include <unordered_map>
#include <vector>

#include "bsync/core.hpp"

namespace bsync::test {

/// Hand-built DAGs. Ancestors are computed by walking the full strong-link
/// history of each block, not from the parents' arrays.
class Builder {
 public:
  explicit Builder(const ProtocolConfig& cfg) : cfg_(cfg) {
    for (std::uint32_t k = 0; k < cfg.n; ++k) put(make_genesis(ValidatorId(k), cfg));
  }

  const ProtocolConfig& cfg() const { return cfg_; }

  /// First block stored at the slot.
  BlockPtr at(std::uint32_t author, Round r) const {
    auto it = primary_.find({ValidatorId(author), r});
    if (it == primary_.end()) throw std::out_of_range("builder: no block at slot");
    return it->second;
  }
  bool has(std::uint32_t author, Round r) const {
    return primary_.count({ValidatorId(author), r}) != 0;
  }
  BlockPtr by_digest(const BlockDigest& d) const { return by_digest_.at(d); }

  /// Unsealed round-r block linking the primary blocks of the given slots.
  Block draft(Round r, std::uint32_t author, const std::vector<std::uint32_t>& parent_authors,
              const std::vector<std::pair<std::uint32_t, Round>>& weak = {}) const {
    Block b;
    b.round = r;
    b.author = ValidatorId(author);
    for (auto a : parent_authors) b.parents.push_back(at(a, r - 1)->ref());
    for (auto [a, wr] : weak) b.weaklinks.push_back(at(a, wr)->ref());
    b.watermark.assign(cfg_.n, kNoRound);
    b.ancestors = ancestors_of(b);
    return b;
  }

  /// Seals and stores; the first block at a slot becomes its primary.
  BlockPtr put(Block b) {
    seal(b);
    auto p = std::make_shared<const Block>(std::move(b));
    primary_.try_emplace(p->slot(), p);
    by_digest_.emplace(p->digest, p);
    return p;
  }

  BlockPtr add(Round r, std::uint32_t author, const std::vector<std::uint32_t>& parent_authors,
               const std::vector<std::pair<std::uint32_t, Round>>& weak = {}) {
    return put(draft(r, author, parent_authors, weak));
  }

  /// Max round per author over every block reachable through strong links.
  std::vector<Round> ancestors_of(const Block& b) const {
    std::vector<Round> out(cfg_.n, kNoRound);
    std::set<BlockDigest> seen;
    std::vector<BlockDigest> stack;
    for (const auto& p : b.parents) stack.push_back(p.digest);
    while (!stack.empty()) {
      const auto d = stack.back();
      stack.pop_back();
      if (!seen.insert(d).second) continue;
      const auto& x = by_digest_.at(d);
      out[x->author.value] = std::max(out[x->author.value], x->round);
      for (const auto& p : x->parents) stack.push_back(p.digest);
    }
    return out;
  }

  /// Every block reachable from `d` through strong or weak links, excluding d.
  std::set<BlockDigest> causal_history(const BlockDigest& d) const {
    std::set<BlockDigest> seen;
    std::vector<BlockDigest> stack;
    auto push_links = [&](const Block& x) {
      for (const auto& p : x.parents) stack.push_back(p.digest);
      for (const auto& w : x.weaklinks) stack.push_back(w.digest);
    };
    push_links(*by_digest_.at(d));
    while (!stack.empty()) {
      const auto cur = stack.back();
      stack.pop_back();
      if (!seen.insert(cur).second) continue;
      push_links(*by_digest_.at(cur));
    }
    return seen;
  }

  std::vector<BlockPtr> all() const {
    std::vector<BlockPtr> out;
    for (const auto& [d, p] : by_digest_) out.push_back(p);
    std::sort(out.begin(), out.end(), [](const BlockPtr& a, const BlockPtr& b) {
      if (a->slot() != b->slot()) return a->slot() < b->slot();
      return a->digest < b->digest;
    });
    return out;
  }

 private:
  ProtocolConfig cfg_;
  std::map<Slot, BlockPtr> primary_;
  std::unordered_map<BlockDigest, BlockPtr> by_digest_;
};

inline ProtocolConfig config(std::uint32_t n, std::uint32_t f) {
  ProtocolConfig c;
  c.n = n;
  c.f = f;
  return c;
}

/// Random well-formed DAG: rounds 1..rounds, the first 2f+1 authors always
/// propose, the rest stop at a random round. Parents are the own previous
/// block plus random others; weak links point at random older non-parents.
inline Builder random_dag(std::mt19937_64& rng, const ProtocolConfig& cfg, Round rounds) {
  Builder b(cfg);
  std::vector<Round> stop(cfg.n, rounds);
  for (std::uint32_t k = cfg.quorum(); k < cfg.n; ++k)
    stop[k] = static_cast<Round>(rng() % static_cast<std::uint64_t>(rounds + 1));
  for (Round r = 1; r <= rounds; ++r) {
    std::vector<std::uint32_t> prev;
    for (std::uint32_t k = 0; k < cfg.n; ++k)
      if (b.has(k, r - 1)) prev.push_back(k);
    for (std::uint32_t a = 0; a < cfg.n; ++a) {
      if (r > stop[a] || !b.has(a, r - 1)) continue;
      std::vector<std::uint32_t> others;
      for (auto k : prev)
        if (k != a) others.push_back(k);
      std::shuffle(others.begin(), others.end(), rng);
      const std::size_t extra = cfg.quorum() - 1 + rng() % (others.size() - (cfg.quorum() - 1) + 1);
      std::vector<std::uint32_t> parents{a};
      parents.insert(parents.end(), others.begin(), others.begin() + extra);
      std::vector<std::pair<std::uint32_t, Round>> weak;
      for (std::uint32_t k = 0; k < cfg.n; ++k) {
        if (std::find(parents.begin(), parents.end(), k) != parents.end()) continue;
        if (rng() % 2 == 0) continue;
        for (Round wr = r - 1; wr >= 0; --wr) {
          if (b.has(k, wr)) {
            weak.emplace_back(k, wr);
            break;
          }
        }
      }
      b.add(r, a, parents, weak);
    }
  }
  return b;
}

}  // namespace bsync::test
