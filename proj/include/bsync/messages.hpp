#pragma once

#include <set>
#include <string_view>
#include <variant>
#include <vector>

#include "bsync/core.hpp"

namespace bsync {

enum class PullMode { Live, Bulk, Random, Certified };

std::string_view to_string(PullMode m);
PullMode pull_mode_from_string(std::string_view s);

struct PullRequest {
  ValidatorId requester;
  PullMode mode = PullMode::Live;
  /// Requests issued together share a batch id; retries bump `attempt`.
  std::uint64_t batch = 0;
  std::uint32_t attempt = 1;
  std::vector<Slot> wanted_slots;
  std::vector<BlockDigest> wanted_digests;
};

struct PullResponse {
  ValidatorId responder;
  std::vector<BlockPtr> blocks;
};

struct Certificate {
  BlockDigest digest;
  Slot slot;
  std::set<ValidatorId> signers;
};

struct BlockMessage {
  BlockPtr block;
};

struct SignatureMsg {
  BlockDigest digest;
  Slot slot;
  ValidatorId signer;
};

struct CertificateMsg {
  Certificate cert;
};

using Payload = std::variant<BlockMessage, PullRequest, PullResponse, SignatureMsg, CertificateMsg>;

enum class MsgKind { Block, PullRequest, PullResponse, Signature, Certificate };

MsgKind kind_of(const Payload& p);
std::string_view to_string(MsgKind k);
MsgKind msg_kind_from_string(std::string_view s);

struct Message {
  ValidatorId sender;
  ValidatorId receiver;
  Payload payload;
  Micros sent_at{0};
};

}  // namespace bsync
