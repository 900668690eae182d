#include "bsync/messages.hpp"

#include <stdexcept>
#include <string>

namespace bsync {

std::string_view to_string(PullMode m) {
  switch (m) {
    case PullMode::Live: return "live";
    case PullMode::Bulk: return "bulk";
    case PullMode::Random: return "random";
    case PullMode::Certified: return "certified";
  }
  return "?";
}

PullMode pull_mode_from_string(std::string_view s) {
  if (s == "live") return PullMode::Live;
  if (s == "bulk") return PullMode::Bulk;
  if (s == "random") return PullMode::Random;
  if (s == "certified") return PullMode::Certified;
  throw std::invalid_argument("unknown pull mode: " + std::string(s));
}

MsgKind kind_of(const Payload& p) { return static_cast<MsgKind>(p.index()); }

std::string_view to_string(MsgKind k) {
  switch (k) {
    case MsgKind::Block: return "block";
    case MsgKind::PullRequest: return "pull_req";
    case MsgKind::PullResponse: return "pull_resp";
    case MsgKind::Signature: return "sig";
    case MsgKind::Certificate: return "cert";
  }
  return "?";
}

MsgKind msg_kind_from_string(std::string_view s) {
  for (auto k : {MsgKind::Block, MsgKind::PullRequest, MsgKind::PullResponse, MsgKind::Signature,
                 MsgKind::Certificate})
    if (to_string(k) == s) return k;
  throw std::invalid_argument("unknown message kind: " + std::string(s));
}

}  // namespace bsync
