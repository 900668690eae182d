#include "bsync/core.hpp"

#include <openssl/sha.h>

#include <algorithm>
#include <set>

namespace bsync {

namespace {

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_i64(std::vector<std::uint8_t>& out, std::int64_t v) {
  auto u = static_cast<std::uint64_t>(v);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(u >> (8 * i)));
}

void put_refs(std::vector<std::uint8_t>& out, const std::vector<BlockRef>& refs) {
  put_u32(out, static_cast<std::uint32_t>(refs.size()));
  for (const auto& r : refs) {
    put_u32(out, r.author.value);
    put_i64(out, r.round);
    out.insert(out.end(), r.digest.bytes.begin(), r.digest.bytes.end());
  }
}

void put_rounds(std::vector<std::uint8_t>& out, const std::vector<Round>& rounds) {
  put_u32(out, static_cast<std::uint32_t>(rounds.size()));
  for (Round r : rounds) put_i64(out, r);
}

int hex_value(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  return -1;
}

}  // namespace

std::string BlockDigest::hex() const {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string s;
  s.reserve(64);
  for (auto b : bytes) {
    s.push_back(kDigits[b >> 4]);
    s.push_back(kDigits[b & 0xf]);
  }
  return s;
}

BlockDigest BlockDigest::from_hex(std::string_view s) {
  if (s.size() != 64) throw std::invalid_argument("digest hex must be 64 characters");
  BlockDigest d;
  for (std::size_t i = 0; i < 32; ++i) {
    int hi = hex_value(s[2 * i]);
    int lo = hex_value(s[2 * i + 1]);
    if (hi < 0 || lo < 0) throw std::invalid_argument("bad hex digit in digest");
    d.bytes[i] = static_cast<std::uint8_t>(hi << 4 | lo);
  }
  return d;
}

void ProtocolConfig::check() const {
  if (n == 0) throw ConfigError("n must be positive");
  if (n < 3 * f + 1) throw ConfigError("n must be at least 3f+1");
  if (reputation_penalty <= 0) throw ConfigError("R_L must be positive");
  if (bulk_retry_timeout <= Micros::zero() || live_retry_timeout <= Micros::zero() ||
      leader_timeout <= Micros::zero())
    throw ConfigError("durations must be positive");
  if (watermark_lag < 0) throw ConfigError("watermark lag must be non-negative");
  if (random_pull_fanout == 0) throw ConfigError("random pull fan-out must be positive");
}

std::string_view to_string(Validation v) {
  switch (v) {
    case Validation::Ok: return "Ok";
    case Validation::WrongParentCount: return "WrongParentCount";
    case Validation::WrongParentRound: return "WrongParentRound";
    case Validation::MissingSelfParent: return "MissingSelfParent";
    case Validation::OverlappingLinks: return "OverlappingLinks";
    case Validation::BadAncestorsArray: return "BadAncestorsArray";
    case Validation::WrongArraySize: return "WrongArraySize";
    case Validation::BadSignature: return "BadSignature";
  }
  return "?";
}

std::vector<std::uint8_t> canonical_encoding(const Block& b) {
  std::vector<std::uint8_t> out;
  out.reserve(64 + 44 * (b.parents.size() + b.weaklinks.size()) +
              8 * (b.watermark.size() + b.ancestors.size()) + b.payload.size());
  put_i64(out, b.round);
  put_u32(out, b.author.value);
  put_refs(out, b.parents);
  put_refs(out, b.weaklinks);
  put_rounds(out, b.watermark);
  put_rounds(out, b.ancestors);
  put_u32(out, static_cast<std::uint32_t>(b.payload.size()));
  out.insert(out.end(), b.payload.begin(), b.payload.end());
  return out;
}

BlockDigest digest(const Block& b) {
  auto bytes = canonical_encoding(b);
  BlockDigest d;
  SHA256(bytes.data(), bytes.size(), d.bytes.data());
  return d;
}

std::uint64_t signature_tag(ValidatorId author, const BlockDigest& d) {
  // FNV-1a over author and digest; stands in for a signature check.
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&h](std::uint8_t byte) {
    h ^= byte;
    h *= 1099511628211ULL;
  };
  for (int i = 0; i < 4; ++i) mix(static_cast<std::uint8_t>(author.value >> (8 * i)));
  for (auto byte : d.bytes) mix(byte);
  return h;
}

void seal(Block& b) {
  b.digest = digest(b);
  b.signature = signature_tag(b.author, b.digest);
}

Validation validate_block(const Block& b, const ProtocolConfig& cfg) {
  if (b.watermark.size() != cfg.n || b.ancestors.size() != cfg.n || b.author.value >= cfg.n)
    return Validation::WrongArraySize;
  if (b.signature != signature_tag(b.author, digest(b))) return Validation::BadSignature;

  if (b.round == 0) {
    if (!b.parents.empty()) return Validation::WrongParentCount;
    if (!b.weaklinks.empty()) return Validation::OverlappingLinks;
    for (Round a : b.ancestors)
      if (a != kNoRound) return Validation::BadAncestorsArray;
    return Validation::Ok;
  }
  if (b.round < 0) return Validation::WrongParentRound;

  std::set<ValidatorId> parent_authors;
  for (const auto& p : b.parents) parent_authors.insert(p.author);
  if (parent_authors.size() != b.parents.size() || b.parents.size() < cfg.quorum())
    return Validation::WrongParentCount;

  bool has_self = false;
  for (const auto& p : b.parents) {
    if (p.round != b.round - 1 || p.author.value >= cfg.n) return Validation::WrongParentRound;
    if (p.author == b.author) has_self = true;
  }
  if (!has_self) return Validation::MissingSelfParent;

  for (const auto& w : b.weaklinks) {
    if (w.round > b.round - 1 || w.round < 0 || w.author.value >= cfg.n)
      return Validation::WrongParentRound;
    for (const auto& p : b.parents)
      if (p.digest == w.digest || p.slot() == w.slot()) return Validation::OverlappingLinks;
  }

  if (b.ancestors[b.author.value] != b.round - 1) return Validation::BadAncestorsArray;
  for (Round a : b.ancestors)
    if (a > b.round - 1 || a < kNoRound) return Validation::BadAncestorsArray;
  for (const auto& p : b.parents)
    if (b.ancestors[p.author.value] < p.round) return Validation::BadAncestorsArray;
  return Validation::Ok;
}

Block make_genesis(ValidatorId author, const ProtocolConfig& cfg) {
  Block b;
  b.round = 0;
  b.author = author;
  b.watermark.assign(cfg.n, kNoRound);
  b.ancestors.assign(cfg.n, kNoRound);
  seal(b);
  return b;
}

}  // namespace bsync
