#pragma once

#include <map>
#include <set>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "bsync/core.hpp"

namespace bsync {

/// How pending blocks become accepted.
enum class AcceptRule {
  /// Every strong parent accepted or implicitly available.
  ImplicitPoa,
  /// Every strong and weak link accepted (full causal history).
  FullHistory,
  /// Only through explicit accept() calls; no cascade.
  Explicit,
};

enum class AcceptKind { Accept, Store };

struct AcceptEvent {
  AcceptKind kind;
  BlockDigest digest;
  Slot slot;
  friend bool operator==(const AcceptEvent&, const AcceptEvent&) = default;
};

enum class InsertResult { Inserted, DuplicateIgnored };

enum class Scope { Live, Bulk };

class DagError : public std::logic_error {
 public:
  enum class Code { NotAcceptable, NotReceived };
  DagError(Code c, const std::string& what) : std::logic_error(what), code(c) {}
  Code code;
};

/// One validator's local view of the DAG.
class DagState {
 public:
  explicit DagState(const ProtocolConfig& cfg, AcceptRule rule = AcceptRule::ImplicitPoa);

  const ProtocolConfig& config() const { return cfg_; }

  /// Indexes a validated block and its links. Does not accept it.
  InsertResult insert_received(BlockPtr b);

  bool received(const BlockDigest& d) const { return blocks_.count(d) != 0; }
  bool accepted(const BlockDigest& d) const { return accepted_.count(d) != 0; }
  bool has_slot(Slot s) const { return by_slot_.count(s) != 0; }
  const Block* find(const BlockDigest& d) const;
  const Block* find_slot(Slot s) const;
  BlockPtr find_ptr(const BlockDigest& d) const;
  /// Digest referenced for a slot by some received block, if any.
  std::optional<BlockDigest> referenced_digest(Slot s) const;

  bool implicit_poa(const BlockDigest& d) const;
  bool is_acceptable(const Block& b) const;

  /// Accepts a received block and cascades over pending blocks in
  /// (round, author) order. Throws DagError on a violated precondition
  /// (only under the ImplicitPoa/FullHistory rules for acceptability).
  std::vector<AcceptEvent> accept(const BlockDigest& d);
  /// Accepts every pending block that has become acceptable.
  std::vector<AcceptEvent> accept_ready();

  std::set<Slot> missing_ancestors(Scope scope) const;

  const std::set<BlockDigest>& live_set() const { return live_; }
  const std::set<BlockDigest>& bulk_set() const { return bulk_; }
  void add_live(const BlockDigest& d);
  void add_bulk(const BlockDigest& d);
  void remove_live(const BlockDigest& d) { live_.erase(d); }
  /// Drops accepted bulk entries whose direct links are all accepted.
  void prune_bulk();

  Round last_accepted(ValidatorId v) const { return last_accepted_[v.value]; }
  Round covered(ValidatorId v) const { return covered_[v.value]; }
  /// Highest round received from v (any acceptability status).
  Round latest_received_round(ValidatorId v) const { return latest_received_[v.value]; }
  /// Received block of v at latest_received_round(v), if any.
  const Block* latest_received(ValidatorId v) const;

  const std::vector<BlockPtr>& accepted_at(Round r) const;
  std::size_t accepted_author_count(Round r) const;
  Round max_accepted_round() const;
  /// Received blocks referencing d (strong or weak).
  const std::vector<BlockDigest>& referencers(const BlockDigest& d) const;
  std::size_t pending_count() const { return pending_.size(); }
  /// Received but not accepted, in (round, author) order.
  std::vector<const Block*> pending_blocks() const;
  std::size_t received_count() const { return blocks_.size(); }
  std::size_t accepted_count() const { return accepted_.size(); }

 private:
  bool acceptable_under_rule(const Block& b) const;
  void mark_accepted(const BlockPtr& b, std::vector<AcceptEvent>& out);
  bool has_unaccepted_link(const Block& b) const;
  void collect_range(const Block& b, std::set<Slot>& out, bool live) const;

  ProtocolConfig cfg_;
  AcceptRule rule_;
  std::unordered_map<BlockDigest, BlockPtr> blocks_;
  std::map<Slot, BlockDigest> by_slot_;
  std::unordered_set<BlockDigest> accepted_;
  std::set<Slot> accepted_slots_;
  std::map<Round, std::vector<BlockPtr>> accepted_by_round_;
  std::unordered_map<BlockDigest, std::vector<BlockDigest>> reverse_refs_;
  std::unordered_map<BlockDigest, Slot> ref_slot_;
  std::map<Slot, BlockDigest> slot_ref_;
  std::set<std::pair<Slot, BlockDigest>> pending_;
  std::vector<Round> last_accepted_;
  std::vector<Round> covered_;
  std::vector<Round> latest_received_;
  std::set<BlockDigest> live_;
  std::set<BlockDigest> bulk_;
};

}  // namespace bsync
