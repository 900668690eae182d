#include "bsync/push.hpp"

#include <algorithm>

namespace bsync {

ReputationTable::ReputationTable(std::uint32_t n, std::int64_t initial) : scores_(n, initial) {}

ReputationTable::ReputationTable(std::vector<std::int64_t> initial) : scores_(std::move(initial)) {}

const std::set<ValidatorId>& BlameLedger::reporters(Slot s) const {
  static const std::set<ValidatorId> kNone;
  auto it = reports_.find(s);
  return it == reports_.end() ? kNone : it->second;
}

std::optional<Round> try_advance_round(const DagState& state, Round round) {
  if (state.accepted_author_count(round) >= state.config().quorum()) return round + 1;
  return std::nullopt;
}

std::optional<std::vector<const Block*>> ac_parent_selection(
    Round r, ValidatorId proposer, std::span<const Block* const> candidates,
    const ReputationTable& rep, const DagState& state, const ProtocolConfig& cfg) {
  const Block* own = nullptr;
  std::vector<const Block*> others;
  for (const Block* b : candidates) {
    if (!b || b->round != r - 1) continue;
    if (!state.accepted(b->digest) && !state.is_acceptable(*b)) continue;
    if (b->author == proposer)
      own = b;
    else
      others.push_back(b);
  }
  if (!own || others.size() + 1 < cfg.quorum()) return std::nullopt;
  std::sort(others.begin(), others.end(), [&](const Block* a, const Block* b) {
    if (rep[a->author] != rep[b->author]) return rep[a->author] > rep[b->author];
    return a->author < b->author;
  });
  std::vector<const Block*> out{own};
  out.insert(out.end(), others.begin(), others.begin() + (cfg.quorum() - 1));
  return out;
}

std::vector<Round> compute_ancestors(std::span<const Block* const> parents, std::uint32_t n) {
  std::vector<Round> out(n, kNoRound);
  for (const Block* p : parents) {
    out[p->author.value] = std::max(out[p->author.value], p->round);
    for (std::uint32_t k = 0; k < n; ++k) out[k] = std::max(out[k], p->ancestors[k]);
  }
  return out;
}

std::vector<const Block*> latest_candidates(const DagState& state, Round r) {
  std::vector<const Block*> out;
  for (std::uint32_t k = 0; k < state.config().n; ++k) {
    const ValidatorId v(k);
    for (Round rr = std::min(state.latest_received_round(v), r - 1); rr >= 0; --rr) {
      if (const Block* b = state.find_slot({v, rr})) {
        out.push_back(b);
        break;
      }
    }
  }
  return out;
}

std::optional<Block> create_block(const DagState& state, ValidatorId proposer, Round r,
                                  const ReputationTable& rep, const ProtocolConfig& cfg,
                                  std::vector<std::uint8_t> payload) {
  auto candidates = latest_candidates(state, r);
  auto parents = ac_parent_selection(r, proposer, candidates, rep, state, cfg);
  if (!parents) return std::nullopt;
  std::sort(parents->begin(), parents->end(),
            [](const Block* a, const Block* b) { return a->author < b->author; });

  Block b;
  b.round = r;
  b.author = proposer;
  for (const Block* p : *parents) b.parents.push_back(p->ref());
  b.ancestors = compute_ancestors(*parents, cfg.n);

  std::set<ValidatorId> parent_authors;
  for (const Block* p : *parents) parent_authors.insert(p->author);
  for (std::uint32_t k = 0; k < cfg.n; ++k) {
    const ValidatorId v(k);
    if (parent_authors.count(v)) continue;
    for (Round rr = std::min(state.latest_received_round(v), r - 1); rr > b.ancestors[k]; --rr) {
      const Block* w = state.find_slot({v, rr});
      if (w && state.accepted(w->digest)) {
        b.weaklinks.push_back(w->ref());
        break;
      }
    }
  }

  b.watermark.resize(cfg.n);
  for (std::uint32_t k = 0; k < cfg.n; ++k) b.watermark[k] = state.latest_received_round(ValidatorId(k));
  b.payload = std::move(payload);
  seal(b);
  return b;
}

std::vector<ReputationChange> update_score_with_watermarks(
    Round round, std::span<const Block* const> quorum_blocks, ReputationTable& rep,
    Round& scored_through, const ProtocolConfig& cfg) {
  std::vector<ReputationChange> out;
  if (round <= scored_through) return out;
  scored_through = round;
  for (std::uint32_t j = 0; j < cfg.n; ++j) {
    std::set<ValidatorId> attesting;
    for (const Block* b : quorum_blocks)
      if (b->round == round && b->watermark[j] >= round - cfg.watermark_lag)
        attesting.insert(b->author);
    if (attesting.size() >= cfg.quorum()) {
      rep.add(ValidatorId(j), 1);
      out.push_back({ValidatorId(j), 1, rep[ValidatorId(j)]});
    }
  }
  return out;
}

std::optional<BlameEvent> record_pull_report(BlameLedger& ledger, Slot slot, ValidatorId reporter,
                                             ValidatorId self, ReputationTable& rep,
                                             const ProtocolConfig& cfg) {
  auto& reporters = ledger.reports_[slot];
  reporters.insert(reporter);
  if (ledger.already_blamed_.count(slot)) return std::nullopt;
  BlameCause cause;
  if (reporter == self)
    cause = BlameCause::OwnPull;
  else if (reporters.size() >= cfg.weak_quorum())
    cause = BlameCause::Reports;
  else
    return std::nullopt;
  ledger.already_blamed_.insert(slot);
  rep.add(slot.author, -cfg.reputation_penalty);
  return BlameEvent{slot.author, slot, cause, rep[slot.author]};
}

}  // namespace bsync
