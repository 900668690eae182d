#pragma once

#include <array>
#include <chrono>
#include <compare>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace bsync {

struct ValidatorId {
  std::uint32_t value = 0;

  constexpr ValidatorId() = default;
  constexpr explicit ValidatorId(std::uint32_t v) : value(v) {}
  constexpr auto operator<=>(const ValidatorId&) const = default;
};

using Round = std::int64_t;
/// Marker for "no block seen / reachable" in watermark and ancestors arrays.
inline constexpr Round kNoRound = -1;

/// Simulated time and durations, microsecond resolution.
using Micros = std::chrono::microseconds;

constexpr Micros millis(std::int64_t ms) { return Micros(ms * 1000); }

struct BlockDigest {
  std::array<std::uint8_t, 32> bytes{};

  auto operator<=>(const BlockDigest&) const = default;
  std::string hex() const;
  std::string short_hex() const { return hex().substr(0, 12); }
  static BlockDigest from_hex(std::string_view s);
};

/// A (author, round) slot. Without equivocation it names at most one block.
struct Slot {
  ValidatorId author;
  Round round = 0;

  friend constexpr auto operator<=>(const Slot& a, const Slot& b) {
    if (auto c = a.round <=> b.round; c != 0) return c;
    return a.author <=> b.author;
  }
  friend constexpr bool operator==(const Slot&, const Slot&) = default;
};

/// A link to another block. Carrying the author and round alongside the digest
/// lets a receiver reason about blocks it has not received yet.
struct BlockRef {
  ValidatorId author;
  Round round = 0;
  BlockDigest digest;

  Slot slot() const { return {author, round}; }
  friend bool operator==(const BlockRef&, const BlockRef&) = default;
};

struct Block {
  Round round = 0;
  ValidatorId author;
  std::vector<BlockRef> parents;
  std::vector<BlockRef> weaklinks;
  std::vector<Round> watermark;
  std::vector<Round> ancestors;
  std::vector<std::uint8_t> payload;
  std::uint64_t signature = 0;
  /// Cached content digest; set by seal(). Not part of the encoding.
  BlockDigest digest;

  BlockRef ref() const { return {author, round, digest}; }
  Slot slot() const { return {author, round}; }
};

using BlockPtr = std::shared_ptr<const Block>;

struct ProtocolConfig {
  std::uint32_t n = 4;
  std::uint32_t f = 1;
  std::int64_t reputation_penalty = 10000;  // R_L
  Micros bulk_retry_timeout = millis(200);  // Δ_bk
  Micros live_retry_timeout = millis(200);  // 2Δ
  Micros leader_timeout = millis(2000);
  /// Reputation increase checks watermark[j] >= quorum_round - watermark_lag.
  Round watermark_lag = 1;
  /// Random-pull fan-out of the uncertified baseline.
  std::uint32_t random_pull_fanout = 2;

  std::uint32_t quorum() const { return 2 * f + 1; }
  std::uint32_t weak_quorum() const { return f + 1; }
  /// Throws ConfigError when n < 3f+1 or a duration is non-positive.
  void check() const;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Validation {
  Ok,
  WrongParentCount,
  WrongParentRound,
  MissingSelfParent,
  OverlappingLinks,
  BadAncestorsArray,
  WrongArraySize,
  BadSignature,
};

std::string_view to_string(Validation v);

/// Little-endian, length-prefixed encoding of every content field in
/// declaration order. Signature and cached digest are excluded.
std::vector<std::uint8_t> canonical_encoding(const Block& b);

/// SHA-256 over canonical_encoding.
BlockDigest digest(const Block& b);

/// Simulated authenticator: a tag only the author's channel produces.
std::uint64_t signature_tag(ValidatorId author, const BlockDigest& d);

/// Fills digest and signature. Call after every content field is final.
void seal(Block& b);

Validation validate_block(const Block& b, const ProtocolConfig& cfg);

Block make_genesis(ValidatorId author, const ProtocolConfig& cfg);

}  // namespace bsync

template <>
struct std::hash<bsync::BlockDigest> {
  std::size_t operator()(const bsync::BlockDigest& d) const noexcept {
    std::size_t h = 0;
    for (int i = 0; i < 8; ++i) h = (h << 8) | d.bytes[i];
    return h;
  }
};
