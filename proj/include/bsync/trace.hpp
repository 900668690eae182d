#pragma once

#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "bsync/core.hpp"
#include "bsync/messages.hpp"

namespace bsync {

enum class TraceKind {
  Send,        // message handed to the network
  Deliver,     // message processed by its receiver
  Create,      // validator created its own block
  Accept,      // block_accept
  Store,       // block_store
  Quorum,      // 2f+1 round-r blocks accepted (threshold clock condition)
  EnterRound,  // validator moved to a new round
  Reputation,  // local reputation change
  Commit,      // leader slot decided (committed or skipped), in output order
  Live,        // block entered the live set
  Drop,        // invalid block dropped
  Halt,        // validator crashed
};

std::string_view to_string(TraceKind k);
TraceKind trace_kind_from_string(std::string_view s);

/// One trace line. Which fields are meaningful depends on `kind`; the JSON
/// form only carries those.
struct TraceRecord {
  TraceKind kind = TraceKind::Send;
  std::int64_t t = 0;      // µs
  std::uint32_t v = 0;     // acting validator (sender for Send, receiver for Deliver)
  std::uint32_t peer = 0;  // Send: receiver; Deliver: sender; Reputation: subject
  MsgKind msg = MsgKind::Block;
  std::optional<PullMode> mode;
  std::uint64_t batch = 0;
  std::uint32_t attempt = 0;
  std::int64_t at = -1;  // Send: scheduled delivery (-1 when withheld); Commit: decision time
  Round round = kNoRound;
  std::uint32_t author = 0;
  std::optional<BlockDigest> digest;
  std::int64_t value = 0;  // Reputation: score after; Commit: output position
  std::int64_t delta = 0;  // Reputation: change
  std::string cause;       // Reputation cause, Commit status, Drop reason
  std::vector<Slot> entries;
  std::vector<BlockRef> parents;
  std::vector<BlockRef> weaklinks;

  friend bool operator==(const TraceRecord&, const TraceRecord&) = default;
};

struct Trace {
  nlohmann::json meta;  // scenario config and seed
  std::vector<TraceRecord> records;
};

class ReplayError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

nlohmann::json to_json(const TraceRecord& r);
TraceRecord record_from_json(const nlohmann::json& j);

/// Newline-delimited JSON: a meta line, one line per record, an end marker.
void write_trace(std::ostream& os, const Trace& trace);
/// Throws ReplayError on malformed input or a missing end marker.
Trace read_trace(std::istream& is);

}  // namespace bsync
