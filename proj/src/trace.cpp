#include "bsync/trace.hpp"

#include <istream>
#include <ostream>

namespace bsync {

namespace {

constexpr TraceKind kAllKinds[] = {
    TraceKind::Send,       TraceKind::Deliver, TraceKind::Create, TraceKind::Accept,
    TraceKind::Store,      TraceKind::Quorum,  TraceKind::EnterRound, TraceKind::Reputation,
    TraceKind::Commit,     TraceKind::Live,    TraceKind::Drop,   TraceKind::Halt,
};

nlohmann::json refs_to_json(const std::vector<BlockRef>& refs) {
  auto arr = nlohmann::json::array();
  for (const auto& r : refs) arr.push_back({r.author.value, r.round, r.digest.hex()});
  return arr;
}

std::vector<BlockRef> refs_from_json(const nlohmann::json& j) {
  std::vector<BlockRef> out;
  for (const auto& e : j)
    out.push_back({ValidatorId(e.at(0).get<std::uint32_t>()), e.at(1).get<Round>(),
                   BlockDigest::from_hex(e.at(2).get<std::string>())});
  return out;
}

}  // namespace

std::string_view to_string(TraceKind k) {
  switch (k) {
    case TraceKind::Send: return "send";
    case TraceKind::Deliver: return "deliver";
    case TraceKind::Create: return "create";
    case TraceKind::Accept: return "accept";
    case TraceKind::Store: return "store";
    case TraceKind::Quorum: return "quorum";
    case TraceKind::EnterRound: return "round";
    case TraceKind::Reputation: return "rep";
    case TraceKind::Commit: return "commit";
    case TraceKind::Live: return "live";
    case TraceKind::Drop: return "drop";
    case TraceKind::Halt: return "halt";
  }
  return "?";
}

TraceKind trace_kind_from_string(std::string_view s) {
  for (auto k : kAllKinds)
    if (to_string(k) == s) return k;
  throw ReplayError("unknown trace record kind: " + std::string(s));
}

nlohmann::json to_json(const TraceRecord& r) {
  nlohmann::json j;
  j["ev"] = to_string(r.kind);
  j["t"] = r.t;
  j["v"] = r.v;
  switch (r.kind) {
    case TraceKind::Send:
    case TraceKind::Deliver:
      j["peer"] = r.peer;
      j["msg"] = to_string(r.msg);
      if (r.kind == TraceKind::Send) j["at"] = r.at;
      if (r.mode) {
        j["mode"] = to_string(*r.mode);
        j["batch"] = r.batch;
        j["attempt"] = r.attempt;
      }
      if (!r.entries.empty()) {
        auto arr = nlohmann::json::array();
        for (const auto& s : r.entries) arr.push_back({s.author.value, s.round});
        j["entries"] = arr;
      }
      break;
    case TraceKind::Create:
      j["parents"] = refs_to_json(r.parents);
      j["weak"] = refs_to_json(r.weaklinks);
      break;
    case TraceKind::Reputation:
      j["peer"] = r.peer;
      j["value"] = r.value;
      j["delta"] = r.delta;
      j["cause"] = r.cause;
      break;
    case TraceKind::Commit:
      j["at"] = r.at;
      j["value"] = r.value;
      j["cause"] = r.cause;
      break;
    case TraceKind::Drop:
      j["cause"] = r.cause;
      break;
    default:
      break;
  }
  if (r.round != kNoRound) j["round"] = r.round;
  if (r.digest) {
    j["digest"] = r.digest->hex();
    j["author"] = r.author;
  }
  return j;
}

TraceRecord record_from_json(const nlohmann::json& j) {
  TraceRecord r;
  r.kind = trace_kind_from_string(j.at("ev").get<std::string>());
  r.t = j.at("t").get<std::int64_t>();
  r.v = j.at("v").get<std::uint32_t>();
  if (j.contains("peer")) r.peer = j["peer"].get<std::uint32_t>();
  if (j.contains("msg")) r.msg = msg_kind_from_string(j["msg"].get<std::string>());
  if (j.contains("at")) r.at = j["at"].get<std::int64_t>();
  if (j.contains("mode")) {
    r.mode = pull_mode_from_string(j["mode"].get<std::string>());
    r.batch = j.at("batch").get<std::uint64_t>();
    r.attempt = j.at("attempt").get<std::uint32_t>();
  }
  if (j.contains("entries"))
    for (const auto& e : j["entries"])
      r.entries.push_back({ValidatorId(e.at(0).get<std::uint32_t>()), e.at(1).get<Round>()});
  if (j.contains("parents")) r.parents = refs_from_json(j["parents"]);
  if (j.contains("weak")) r.weaklinks = refs_from_json(j["weak"]);
  if (j.contains("value")) r.value = j["value"].get<std::int64_t>();
  if (j.contains("delta")) r.delta = j["delta"].get<std::int64_t>();
  if (j.contains("cause")) r.cause = j["cause"].get<std::string>();
  if (j.contains("round")) r.round = j["round"].get<Round>();
  if (j.contains("digest")) {
    r.digest = BlockDigest::from_hex(j["digest"].get<std::string>());
    r.author = j.at("author").get<std::uint32_t>();
  }
  return r;
}

void write_trace(std::ostream& os, const Trace& trace) {
  os << nlohmann::json{{"ev", "meta"}, {"meta", trace.meta}}.dump() << '\n';
  for (const auto& r : trace.records) os << to_json(r).dump() << '\n';
  os << nlohmann::json{{"ev", "end"}, {"records", trace.records.size()}}.dump() << '\n';
}

Trace read_trace(std::istream& is) {
  Trace trace;
  std::string line;
  bool have_meta = false;
  bool have_end = false;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    if (have_end) throw ReplayError("trace has records after the end marker");
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ReplayError("malformed trace line " + std::to_string(line_no) + ": " + e.what());
    }
    const auto ev = j.value("ev", std::string{});
    if (!have_meta) {
      if (ev != "meta") throw ReplayError("trace does not start with a meta record");
      trace.meta = j.at("meta");
      have_meta = true;
      continue;
    }
    if (ev == "end") {
      if (j.at("records").get<std::size_t>() != trace.records.size())
        throw ReplayError("trace record count does not match end marker");
      have_end = true;
      continue;
    }
    try {
      trace.records.push_back(record_from_json(j));
    } catch (const nlohmann::json::exception& e) {
      throw ReplayError("bad trace record on line " + std::to_string(line_no) + ": " + e.what());
    } catch (const std::invalid_argument& e) {
      throw ReplayError("bad trace record on line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (!have_meta) throw ReplayError("empty trace");
  if (!have_end) throw ReplayError("trace is truncated (no end marker)");
  return trace;
}

}  // namespace bsync
