#pragma once

#include <map>
#include <random>
#include <set>
#include <vector>

#include "bsync/dag_store.hpp"
#include "bsync/messages.hpp"

namespace bsync {

enum class Classification { Accepted, Live, Bulk };

struct Outgoing {
  ValidatorId to;
  PullRequest request;
};

/// Pull bookkeeping of one validator.
struct PullState {
  struct BulkEntry {
    std::uint32_t attempt = 0;
    Micros sent_at{0};
    std::set<ValidatorId> tried;
  };
  std::map<Slot, Micros> live_sent;
  std::map<Slot, BulkEntry> bulk;
  std::uint64_t next_batch = 1;
};

struct ScheduledPulls {
  std::vector<Outgoing> requests;
  /// Entries pulled for the first time in this call.
  std::vector<Slot> first_pulls;
};

/// Routes a freshly inserted block: accepted if acceptable, otherwise into
/// the bulk set (older than `current_round`) or the live set.
Classification classify_incoming(DagState& state, const BlockDigest& d, Round current_round,
                                 std::vector<AcceptEvent>& events);

struct RoundAdvanced {
  Round round;
};
struct LiveSetGrew {};

/// Moves live blocks older than the new round to the bulk set.
std::vector<BlockDigest> promote(DagState& state, RoundAdvanced trigger);
/// Accepts pending blocks whose missing parents gained implicit availability;
/// returns the live blocks that left the live set.
std::vector<BlockDigest> promote(DagState& state, LiveSetGrew trigger,
                                 std::vector<AcceptEvent>& events);

/// One live request per peer carrying every live-missing entry that is new
/// or was last requested at least `retry` ago.
ScheduledPulls schedule_live_pulls(const DagState& state, PullState& pulls, ValidatorId self,
                                   Micros now, Micros retry);

/// One request to one random peer per bulk-missing entry that is new or whose
/// previous attempt is older than Δ_bk.
ScheduledPulls schedule_bulk_pulls(const DagState& state, PullState& pulls, std::mt19937_64& rng,
                                   ValidatorId self, Micros now, const ProtocolConfig& cfg);

struct ServedRequest {
  PullResponse response;
  /// Slots the requester asked for; each is a report against its author.
  std::vector<Slot> reports;
};

/// Answers with every requested block the responder has accepted.
ServedRequest handle_pull_request(const DagState& state, ValidatorId self, const PullRequest& req);

struct ResponseOutcome {
  std::vector<AcceptEvent> events;
  std::vector<BlockDigest> inserted;
  std::vector<std::pair<BlockDigest, Classification>> classified;
  std::size_t dropped_invalid = 0;
};

/// Validates, inserts and classifies the returned blocks, then cascades.
ResponseOutcome handle_pull_response(DagState& state, PullState& pulls, const PullResponse& resp,
                                     Round current_round, const ProtocolConfig& cfg);

/// Uniform index below `bound` from a 64-bit engine; identical on every
/// standard library.
std::uint64_t uniform_below(std::mt19937_64& rng, std::uint64_t bound);

}  // namespace bsync
