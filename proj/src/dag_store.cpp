#include "bsync/dag_store.hpp"

#include <algorithm>

namespace bsync {

namespace {
const std::vector<BlockPtr> kNoBlocks;
const std::vector<BlockDigest> kNoDigests;
}  // namespace

DagState::DagState(const ProtocolConfig& cfg, AcceptRule rule)
    : cfg_(cfg),
      rule_(rule),
      last_accepted_(cfg.n, kNoRound),
      covered_(cfg.n, kNoRound),
      latest_received_(cfg.n, kNoRound) {}

InsertResult DagState::insert_received(BlockPtr b) {
  if (blocks_.count(b->digest)) return InsertResult::DuplicateIgnored;
  const BlockDigest d = b->digest;
  by_slot_.emplace(b->slot(), d);
  ref_slot_.emplace(d, b->slot());
  slot_ref_.emplace(b->slot(), d);
  auto index = [&](const BlockRef& ref) {
    reverse_refs_[ref.digest].push_back(d);
    ref_slot_.emplace(ref.digest, ref.slot());
    slot_ref_.emplace(ref.slot(), ref.digest);
  };
  for (const auto& p : b->parents) index(p);
  for (const auto& w : b->weaklinks) index(w);
  auto& latest = latest_received_[b->author.value];
  latest = std::max(latest, b->round);
  pending_.emplace(b->slot(), d);
  blocks_.emplace(d, std::move(b));
  return InsertResult::Inserted;
}

const Block* DagState::find(const BlockDigest& d) const {
  auto it = blocks_.find(d);
  return it == blocks_.end() ? nullptr : it->second.get();
}

BlockPtr DagState::find_ptr(const BlockDigest& d) const {
  auto it = blocks_.find(d);
  return it == blocks_.end() ? nullptr : it->second;
}

const Block* DagState::find_slot(Slot s) const {
  auto it = by_slot_.find(s);
  return it == by_slot_.end() ? nullptr : find(it->second);
}

std::optional<BlockDigest> DagState::referenced_digest(Slot s) const {
  auto it = slot_ref_.find(s);
  if (it == slot_ref_.end()) return std::nullopt;
  return it->second;
}

const Block* DagState::latest_received(ValidatorId v) const {
  Round r = latest_received_[v.value];
  return r == kNoRound ? nullptr : find_slot({v, r});
}

const std::vector<BlockPtr>& DagState::accepted_at(Round r) const {
  auto it = accepted_by_round_.find(r);
  return it == accepted_by_round_.end() ? kNoBlocks : it->second;
}

Round DagState::max_accepted_round() const {
  return accepted_by_round_.empty() ? kNoRound : accepted_by_round_.rbegin()->first;
}

std::size_t DagState::accepted_author_count(Round r) const {
  std::set<ValidatorId> authors;
  for (const auto& b : accepted_at(r)) authors.insert(b->author);
  return authors.size();
}

const std::vector<BlockDigest>& DagState::referencers(const BlockDigest& d) const {
  auto it = reverse_refs_.find(d);
  return it == reverse_refs_.end() ? kNoDigests : it->second;
}

std::vector<const Block*> DagState::pending_blocks() const {
  std::vector<const Block*> out;
  for (const auto& [slot, d] : pending_) out.push_back(find(d));
  return out;
}

bool DagState::implicit_poa(const BlockDigest& d) const {
  auto slot_it = ref_slot_.find(d);
  if (slot_it == ref_slot_.end()) return false;
  const Round round = slot_it->second.round;
  std::set<ValidatorId> authors;
  for (const auto& r : referencers(d)) {
    const Block* b = find(r);
    if (b && b->round > round) authors.insert(b->author);
  }
  return authors.size() >= cfg_.weak_quorum();
}

bool DagState::is_acceptable(const Block& b) const {
  return std::all_of(b.parents.begin(), b.parents.end(), [&](const BlockRef& p) {
    return accepted(p.digest) || implicit_poa(p.digest);
  });
}

bool DagState::acceptable_under_rule(const Block& b) const {
  switch (rule_) {
    case AcceptRule::ImplicitPoa:
      return is_acceptable(b);
    case AcceptRule::FullHistory: {
      auto ok = [&](const BlockRef& r) { return accepted(r.digest); };
      return std::all_of(b.parents.begin(), b.parents.end(), ok) &&
             std::all_of(b.weaklinks.begin(), b.weaklinks.end(), ok);
    }
    case AcceptRule::Explicit:
      return true;
  }
  return false;
}

bool DagState::has_unaccepted_link(const Block& b) const {
  auto missing = [&](const BlockRef& r) { return !accepted(r.digest); };
  return std::any_of(b.parents.begin(), b.parents.end(), missing) ||
         std::any_of(b.weaklinks.begin(), b.weaklinks.end(), missing);
}

void DagState::mark_accepted(const BlockPtr& b, std::vector<AcceptEvent>& out) {
  const BlockDigest& d = b->digest;
  accepted_.insert(d);
  pending_.erase({b->slot(), d});
  accepted_slots_.insert(b->slot());
  accepted_by_round_[b->round].push_back(b);

  auto& last = last_accepted_[b->author.value];
  while (accepted_slots_.count({b->author, last + 1})) ++last;

  for (std::uint32_t k = 0; k < cfg_.n; ++k) covered_[k] = std::max(covered_[k], b->ancestors[k]);
  auto& own = covered_[b->author.value];
  own = std::max(own, b->round);

  live_.erase(d);
  if (rule_ == AcceptRule::ImplicitPoa && has_unaccepted_link(*b)) bulk_.insert(d);

  out.push_back({AcceptKind::Accept, d, b->slot()});
  out.push_back({AcceptKind::Store, d, b->slot()});
}

std::vector<AcceptEvent> DagState::accept(const BlockDigest& d) {
  auto it = blocks_.find(d);
  if (it == blocks_.end()) throw DagError(DagError::Code::NotReceived, "accept: block not received");
  if (accepted(d)) return {};
  if (!acceptable_under_rule(*it->second))
    throw DagError(DagError::Code::NotAcceptable, "accept: block not acceptable");
  std::vector<AcceptEvent> out;
  mark_accepted(it->second, out);
  if (rule_ != AcceptRule::Explicit) {
    auto more = accept_ready();
    out.insert(out.end(), more.begin(), more.end());
  }
  return out;
}

std::vector<AcceptEvent> DagState::accept_ready() {
  std::vector<AcceptEvent> out;
  if (rule_ == AcceptRule::Explicit) return out;
  bool changed = true;
  while (changed) {
    changed = false;
    std::vector<std::pair<Slot, BlockDigest>> snapshot(pending_.begin(), pending_.end());
    for (const auto& [slot, d] : snapshot) {
      const auto& b = blocks_.at(d);
      if (acceptable_under_rule(*b)) {
        mark_accepted(b, out);
        changed = true;
      }
    }
  }
  return out;
}

void DagState::add_live(const BlockDigest& d) {
  bulk_.erase(d);
  live_.insert(d);
}

void DagState::add_bulk(const BlockDigest& d) {
  live_.erase(d);
  bulk_.insert(d);
}

void DagState::prune_bulk() {
  for (auto it = bulk_.begin(); it != bulk_.end();) {
    const Block* b = find(*it);
    if (b && accepted(*it) && !has_unaccepted_link(*b))
      it = bulk_.erase(it);
    else
      ++it;
  }
}

void DagState::collect_range(const Block& b, std::set<Slot>& out, bool live) const {
  auto poa_slot = [&](Slot s) {
    auto it = slot_ref_.find(s);
    return it != slot_ref_.end() && implicit_poa(it->second);
  };
  for (std::uint32_t k = 0; k < cfg_.n; ++k) {
    const ValidatorId author(k);
    for (Round rr = last_accepted_[k] + 1; rr <= b.ancestors[k]; ++rr) {
      const Slot s{author, rr};
      if (has_slot(s)) continue;
      if (live && (rr <= covered_[k] || poa_slot(s))) continue;
      out.insert(s);
    }
  }
  auto direct = [&](const BlockRef& ref) {
    if (received(ref.digest)) return;
    if (live && implicit_poa(ref.digest)) return;
    out.insert(ref.slot());
  };
  for (const auto& p : b.parents) direct(p);
  if (!live)
    for (const auto& w : b.weaklinks) direct(w);
}

std::set<Slot> DagState::missing_ancestors(Scope scope) const {
  std::set<Slot> live_missing;
  for (const auto& d : live_)
    if (const Block* b = find(d)) collect_range(*b, live_missing, true);
  if (scope == Scope::Live) return live_missing;

  std::set<Slot> bulk_missing;
  for (const auto& d : bulk_)
    if (const Block* b = find(d)) collect_range(*b, bulk_missing, false);
  for (const auto& s : live_missing) bulk_missing.erase(s);
  return bulk_missing;
}

}  // namespace bsync
