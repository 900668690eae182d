#pragma once

#include <map>
#include <optional>
#include <vector>

#include "bsync/dag_store.hpp"

namespace bsync {

struct LeaderSlot {
  Round round = 0;
  ValidatorId leader;
  friend bool operator==(const LeaderSlot&, const LeaderSlot&) = default;
};

/// Round-robin schedule.
LeaderSlot leader_slot(Round r, std::uint32_t n);

enum class SlotStatus { Committed, Skipped };

struct CommitRecord {
  LeaderSlot slot;
  SlotStatus status = SlotStatus::Skipped;
  BlockDigest digest;  // meaningful when committed
  Micros decided_at{0};
  std::uint64_t position = 0;
};

/// 2f+1 distinct-author accepted blocks of the next round link `d`.
bool detect_rbc_pattern(const DagState& state, const BlockDigest& d, const ProtocolConfig& cfg);

/// Direct commit: 2f+1 distinct-author round r+2 blocks each link 2f+1 of the
/// round r+1 blocks that link the leader block.
std::optional<CommitRecord> try_commit(const DagState& state, LeaderSlot slot, Micros now,
                                       const ProtocolConfig& cfg);

CommitRecord skip_leader(LeaderSlot slot, Micros now);

/// Per-validator slot decisions and the ordered output.
class CommitTracker {
 public:
  explicit CommitTracker(const ProtocolConfig& cfg) : cfg_(cfg) {}

  /// Tries every undecided slot that could have a pattern; returns records
  /// newly appended to the output.
  std::vector<CommitRecord> evaluate(const DagState& state, Micros now);
  /// Leader timeout for slot r; no-op if decided.
  std::vector<CommitRecord> skip(Round r, Micros now);

  const std::vector<CommitRecord>& output() const { return output_; }
  bool decided(Round r) const { return r < next_output_ || decisions_.count(r) != 0; }

 private:
  std::vector<CommitRecord> flush();

  ProtocolConfig cfg_;
  std::map<Round, CommitRecord> decisions_;
  std::vector<CommitRecord> output_;
  Round next_output_ = 1;
};

}  // namespace bsync
