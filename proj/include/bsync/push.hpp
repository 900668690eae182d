#pragma once

#include <map>
#include <optional>
#include <set>
#include <span>
#include <vector>

#include "bsync/core.hpp"
#include "bsync/dag_store.hpp"

namespace bsync {

/// Local reputation scores used for admission control.
class ReputationTable {
 public:
  explicit ReputationTable(std::uint32_t n, std::int64_t initial = 0);
  ReputationTable(std::vector<std::int64_t> initial);

  std::int64_t operator[](ValidatorId v) const { return scores_[v.value]; }
  std::int64_t score(ValidatorId v) const { return scores_[v.value]; }
  const std::vector<std::int64_t>& scores() const { return scores_; }
  void add(ValidatorId v, std::int64_t delta) { scores_[v.value] += delta; }
  std::uint32_t size() const { return static_cast<std::uint32_t>(scores_.size()); }

 private:
  std::vector<std::int64_t> scores_;
};

struct ReputationChange {
  ValidatorId subject;
  std::int64_t delta = 0;
  std::int64_t score = 0;  // after the change
};

enum class BlameCause { OwnPull, Reports };

struct BlameEvent {
  ValidatorId author;
  Slot slot;
  BlameCause cause;
  std::int64_t score = 0;  // after the penalty
};

class BlameLedger {
 public:
  const std::set<ValidatorId>& reporters(Slot s) const;
  bool blamed(Slot s) const { return already_blamed_.count(s) != 0; }

 private:
  friend std::optional<BlameEvent> record_pull_report(BlameLedger&, Slot, ValidatorId,
                                                      ValidatorId, ReputationTable&,
                                                      const ProtocolConfig&);
  std::map<Slot, std::set<ValidatorId>> reports_;
  std::set<Slot> already_blamed_;
};

/// round + 1 once 2f+1 distinct authors have accepted blocks at `round`.
std::optional<Round> try_advance_round(const DagState& state, Round round);

/// Admission control. Keeps acceptable round r-1 candidates, takes the
/// proposer's own block plus the 2f best others by (reputation desc, index
/// asc). Returns nullopt when the own block or 2f+1 candidates are missing.
std::optional<std::vector<const Block*>> ac_parent_selection(
    Round r, ValidatorId proposer, std::span<const Block* const> candidates,
    const ReputationTable& rep, const DagState& state, const ProtocolConfig& cfg);

/// Elementwise max over parent rounds and parent ancestors arrays.
std::vector<Round> compute_ancestors(std::span<const Block* const> parents, std::uint32_t n);

/// Latest received block per author with round <= r-1.
std::vector<const Block*> latest_candidates(const DagState& state, Round r);

/// Builds and seals the proposer's round-r block. nullopt while admission
/// control cannot pick parents.
std::optional<Block> create_block(const DagState& state, ValidatorId proposer, Round r,
                                  const ReputationTable& rep, const ProtocolConfig& cfg,
                                  std::vector<std::uint8_t> payload = {});

/// Watermark rule over the threshold-clock quorum of `round`: TR[j] += 1 when
/// 2f+1 quorum blocks carry watermark[j] >= round - lag. Rounds at or below
/// `scored_through` are ignored, making repeated calls idempotent.
std::vector<ReputationChange> update_score_with_watermarks(
    Round round, std::span<const Block* const> quorum_blocks, ReputationTable& rep,
    Round& scored_through, const ProtocolConfig& cfg);

/// Registers `reporter` asking for `author`'s block at `slot`. When
/// reporter == self the local validator is pulling it and penalizes at once;
/// otherwise f+1 distinct reporters trigger the penalty. At most one penalty
/// per slot.
std::optional<BlameEvent> record_pull_report(BlameLedger& ledger, Slot slot, ValidatorId reporter,
                                             ValidatorId self, ReputationTable& rep,
                                             const ProtocolConfig& cfg);

}  // namespace bsync
