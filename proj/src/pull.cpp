#include "bsync/pull.hpp"

#include <algorithm>

namespace bsync {

std::uint64_t uniform_below(std::mt19937_64& rng, std::uint64_t bound) {
  const std::uint64_t threshold = (0 - bound) % bound;
  for (;;) {
    std::uint64_t r = rng();
    if (r >= threshold) return r % bound;
  }
}

Classification classify_incoming(DagState& state, const BlockDigest& d, Round current_round,
                                 std::vector<AcceptEvent>& events) {
  if (state.accepted(d)) return Classification::Accepted;
  const Block* b = state.find(d);
  if (!b) throw DagError(DagError::Code::NotReceived, "classify: block not received");
  if (state.is_acceptable(*b)) {
    auto ev = state.accept(d);
    events.insert(events.end(), ev.begin(), ev.end());
    return Classification::Accepted;
  }
  if (b->round < current_round) {
    state.add_bulk(d);
    return Classification::Bulk;
  }
  state.add_live(d);
  return Classification::Live;
}

std::vector<BlockDigest> promote(DagState& state, RoundAdvanced trigger) {
  std::vector<BlockDigest> moved;
  for (const auto& d : state.live_set()) {
    const Block* b = state.find(d);
    if (b && b->round < trigger.round) moved.push_back(d);
  }
  for (const auto& d : moved) state.add_bulk(d);
  return moved;
}

std::vector<BlockDigest> promote(DagState& state, LiveSetGrew, std::vector<AcceptEvent>& events) {
  const std::set<BlockDigest> before = state.live_set();
  auto ev = state.accept_ready();
  events.insert(events.end(), ev.begin(), ev.end());
  std::vector<BlockDigest> moved;
  for (const auto& d : before)
    if (!state.live_set().count(d)) moved.push_back(d);
  return moved;
}

ScheduledPulls schedule_live_pulls(const DagState& state, PullState& pulls, ValidatorId self,
                                   Micros now, Micros retry) {
  ScheduledPulls out;
  const auto missing = state.missing_ancestors(Scope::Live);
  for (auto it = pulls.live_sent.begin(); it != pulls.live_sent.end();)
    it = missing.count(it->first) ? std::next(it) : pulls.live_sent.erase(it);

  std::vector<Slot> due;
  for (const auto& s : missing) {
    auto it = pulls.live_sent.find(s);
    if (it == pulls.live_sent.end()) {
      if (!pulls.bulk.count(s)) out.first_pulls.push_back(s);
      due.push_back(s);
    } else if (now - it->second >= retry) {
      due.push_back(s);
    }
  }
  if (due.empty()) return out;
  for (const auto& s : due) pulls.live_sent[s] = now;

  PullRequest req;
  req.requester = self;
  req.mode = PullMode::Live;
  req.batch = pulls.next_batch++;
  req.wanted_slots = due;
  for (std::uint32_t k = 0; k < state.config().n; ++k) {
    if (k == self.value) continue;
    out.requests.push_back({ValidatorId(k), req});
  }
  return out;
}

ScheduledPulls schedule_bulk_pulls(const DagState& state, PullState& pulls, std::mt19937_64& rng,
                                   ValidatorId self, Micros now, const ProtocolConfig& cfg) {
  ScheduledPulls out;
  const auto missing = state.missing_ancestors(Scope::Bulk);
  for (auto it = pulls.bulk.begin(); it != pulls.bulk.end();)
    it = missing.count(it->first) ? std::next(it) : pulls.bulk.erase(it);
  if (cfg.n < 2) return out;

  for (const auto& s : missing) {
    auto [it, fresh] = pulls.bulk.try_emplace(s);
    auto& entry = it->second;
    if (!fresh && now - entry.sent_at < cfg.bulk_retry_timeout) continue;
    if (fresh && !pulls.live_sent.count(s)) out.first_pulls.push_back(s);

    std::vector<ValidatorId> pool;
    for (std::uint32_t k = 0; k < cfg.n; ++k) {
      const ValidatorId v(k);
      if (v != self && !entry.tried.count(v)) pool.push_back(v);
    }
    if (pool.empty()) {
      entry.tried.clear();
      for (std::uint32_t k = 0; k < cfg.n; ++k)
        if (k != self.value) pool.push_back(ValidatorId(k));
    }
    const ValidatorId target = pool[uniform_below(rng, pool.size())];
    entry.tried.insert(target);
    entry.attempt += 1;
    entry.sent_at = now;

    PullRequest req;
    req.requester = self;
    req.mode = PullMode::Bulk;
    req.batch = pulls.next_batch++;
    req.attempt = entry.attempt;
    req.wanted_slots = {s};
    out.requests.push_back({target, std::move(req)});
  }
  return out;
}

ServedRequest handle_pull_request(const DagState& state, ValidatorId self, const PullRequest& req) {
  ServedRequest out;
  out.response.responder = self;
  std::set<BlockDigest> seen;
  auto serve = [&](const BlockDigest& d) {
    if (!state.accepted(d) || !seen.insert(d).second) return;
    out.response.blocks.push_back(state.find_ptr(d));
  };
  for (const auto& s : req.wanted_slots) {
    out.reports.push_back(s);
    if (const Block* b = state.find_slot(s)) serve(b->digest);
  }
  for (const auto& d : req.wanted_digests) {
    if (const Block* b = state.find(d)) {
      out.reports.push_back(b->slot());
      serve(d);
    }
  }
  return out;
}

ResponseOutcome handle_pull_response(DagState& state, PullState& pulls, const PullResponse& resp,
                                     Round current_round, const ProtocolConfig& cfg) {
  ResponseOutcome out;
  std::vector<BlockPtr> blocks;
  for (const auto& b : resp.blocks) {
    if (b)
      blocks.push_back(b);
    else
      ++out.dropped_invalid;
  }
  std::sort(blocks.begin(), blocks.end(),
            [](const BlockPtr& a, const BlockPtr& b) { return a->slot() < b->slot(); });
  for (const auto& b : blocks) {
    if (validate_block(*b, cfg) != Validation::Ok) {
      ++out.dropped_invalid;
      continue;
    }
    if (state.insert_received(b) == InsertResult::DuplicateIgnored) continue;
    out.inserted.push_back(b->digest);
    pulls.live_sent.erase(b->slot());
    pulls.bulk.erase(b->slot());
    out.classified.emplace_back(b->digest,
                                classify_incoming(state, b->digest, current_round, out.events));
  }
  promote(state, LiveSetGrew{}, out.events);
  return out;
}

}  // namespace bsync
