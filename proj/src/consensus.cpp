#include "bsync/consensus.hpp"

#include <algorithm>
#include <set>

namespace bsync {

namespace {

bool links(const Block& b, const BlockDigest& d) {
  auto match = [&](const BlockRef& r) { return r.digest == d; };
  return std::any_of(b.parents.begin(), b.parents.end(), match) ||
         std::any_of(b.weaklinks.begin(), b.weaklinks.end(), match);
}

std::optional<std::pair<BlockDigest, Round>> locate(const DagState& state, Slot s) {
  if (const Block* b = state.find_slot(s)) return std::make_pair(b->digest, b->round);
  if (auto d = state.referenced_digest(s)) return std::make_pair(*d, s.round);
  return std::nullopt;
}

}  // namespace

LeaderSlot leader_slot(Round r, std::uint32_t n) {
  return {r, ValidatorId(static_cast<std::uint32_t>(r % n))};
}

bool detect_rbc_pattern(const DagState& state, const BlockDigest& d, const ProtocolConfig& cfg) {
  Round round;
  if (const Block* b = state.find(d)) {
    round = b->round;
  } else {
    bool found = false;
    round = 0;
    for (const auto& r : state.referencers(d)) {
      const Block* ref = state.find(r);
      if (!ref) continue;
      for (const auto& l : ref->parents)
        if (l.digest == d) round = l.round, found = true;
      for (const auto& l : ref->weaklinks)
        if (l.digest == d) round = l.round, found = true;
      if (found) break;
    }
    if (!found) return false;
  }
  std::set<ValidatorId> authors;
  for (const auto& b : state.accepted_at(round + 1))
    if (links(*b, d)) authors.insert(b->author);
  return authors.size() >= cfg.quorum();
}

std::optional<CommitRecord> try_commit(const DagState& state, LeaderSlot slot, Micros now,
                                       const ProtocolConfig& cfg) {
  auto leader = locate(state, {slot.leader, slot.round});
  if (!leader) return std::nullopt;
  const BlockDigest& d = leader->first;

  std::set<BlockDigest> support;
  std::set<ValidatorId> support_authors;
  for (const auto& b : state.accepted_at(slot.round + 1)) {
    if (links(*b, d)) {
      support.insert(b->digest);
      support_authors.insert(b->author);
    }
  }
  if (support_authors.size() < cfg.quorum()) return std::nullopt;

  std::set<ValidatorId> voters;
  for (const auto& b : state.accepted_at(slot.round + 2)) {
    std::set<ValidatorId> linked;
    auto count = [&](const BlockRef& r) {
      if (support.count(r.digest)) linked.insert(r.author);
    };
    for (const auto& r : b->parents) count(r);
    for (const auto& r : b->weaklinks) count(r);
    if (linked.size() >= cfg.quorum()) voters.insert(b->author);
  }
  if (voters.size() < cfg.quorum()) return std::nullopt;
  return CommitRecord{slot, SlotStatus::Committed, d, now, 0};
}

CommitRecord skip_leader(LeaderSlot slot, Micros now) {
  return CommitRecord{slot, SlotStatus::Skipped, BlockDigest{}, now, 0};
}

std::vector<CommitRecord> CommitTracker::evaluate(const DagState& state, Micros now) {
  for (Round r = next_output_; r + 2 <= state.max_accepted_round(); ++r) {
    if (decisions_.count(r)) continue;
    if (auto rec = try_commit(state, leader_slot(r, cfg_.n), now, cfg_)) decisions_.emplace(r, *rec);
  }
  return flush();
}

std::vector<CommitRecord> CommitTracker::skip(Round r, Micros now) {
  if (r < next_output_ || decisions_.count(r)) return {};
  decisions_.emplace(r, skip_leader(leader_slot(r, cfg_.n), now));
  return flush();
}

std::vector<CommitRecord> CommitTracker::flush() {
  std::vector<CommitRecord> out;
  for (auto it = decisions_.find(next_output_); it != decisions_.end();
       it = decisions_.find(next_output_)) {
    CommitRecord rec = it->second;
    rec.position = output_.size();
    output_.push_back(rec);
    out.push_back(rec);
    decisions_.erase(it);
    ++next_output_;
  }
  return out;
}

}  // namespace bsync
