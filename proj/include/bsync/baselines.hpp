#pragma once

#include <map>
#include <set>

#include "bsync/pull.hpp"
#include "bsync/synchronizer.hpp"

namespace bsync {

/// Best-effort-broadcast push; a block is accepted only once its whole
/// causal history is, and missing blocks are fetched by random pulls.
class UncertifiedSynchronizer : public ValidatorBase {
 public:
  UncertifiedSynchronizer(ValidatorId self, const ProtocolConfig& cfg, const ValidatorOptions& opts);

  void on_block_delivered(Context& ctx, ValidatorId from, const BlockMessage& msg) override;
  void on_pull_request(Context& ctx, ValidatorId from, const PullRequest& req) override;
  void on_pull_response(Context& ctx, ValidatorId from, const PullResponse& resp) override;

 protected:
  std::optional<Block> make_block(Context& ctx, Round r) override;
  void pull_step(Context& ctx) override;

 private:
  void ingest(Context& ctx, const BlockPtr& b);

  struct Attempt {
    std::uint32_t count = 0;
    Micros sent_at{0};
  };
  std::map<BlockDigest, Attempt> attempts_;
  std::uint64_t next_batch_ = 1;
};

/// Parents are every accepted round r-1 block; no admission control.
std::optional<Block> uncertified_push(const DagState& state, ValidatorId proposer, Round r,
                                      std::vector<std::uint8_t> payload = {});

/// Random pull targets: `fanout` distinct peers other than self.
std::vector<ValidatorId> uncertified_random_pull(std::mt19937_64& rng, ValidatorId self,
                                                 const ProtocolConfig& cfg);

/// Three-step certificate push (block, signatures, certificate) with pulls
/// addressed to the certificate signers.
class CertifiedSynchronizer : public ValidatorBase {
 public:
  CertifiedSynchronizer(ValidatorId self, const ProtocolConfig& cfg, const ValidatorOptions& opts);

  void on_start(Context& ctx) override;
  void on_block_delivered(Context& ctx, ValidatorId from, const BlockMessage& msg) override;
  void on_pull_request(Context& ctx, ValidatorId from, const PullRequest& req) override;
  void on_pull_response(Context& ctx, ValidatorId from, const PullResponse& resp) override;
  void on_signature(Context& ctx, ValidatorId from, const SignatureMsg& msg) override;
  void on_certificate(Context& ctx, ValidatorId from, const CertificateMsg& msg) override;

  bool certified(const BlockDigest& d) const { return certified_.count(d) != 0; }

 protected:
  bool quorum_ready(Round r) const override;
  std::optional<Block> make_block(Context& ctx, Round r) override;
  void adopt_own(Context& ctx, const BlockPtr& b) override;
  void pull_step(Context& ctx) override;

 private:
  /// Accepts a certified digest; stores it if held, else schedules a pull.
  void accept_certified(Context& ctx, const BlockDigest& d, Slot slot,
                        std::set<ValidatorId> holders);
  void store(Context& ctx, const BlockPtr& b);
  void try_sign(Context& ctx);

  struct Missing {
    Slot slot;
    std::set<ValidatorId> holders;
    Micros sent_at{0};
    std::uint32_t attempt = 0;
  };
  std::set<BlockDigest> certified_;
  std::map<Round, std::set<ValidatorId>> certified_authors_;
  std::map<Slot, BlockDigest> slot_digest_;
  std::map<Round, std::pair<BlockDigest, std::set<ValidatorId>>> own_signatures_;
  std::set<Slot> signed_;
  std::set<BlockDigest> unsigned_;
  std::map<BlockDigest, Missing> missing_;
  std::uint64_t next_batch_ = 1;
};

/// Requests a missing certified block from every signer except self.
std::vector<Outgoing> certified_deterministic_pull(const Certificate& cert, ValidatorId self,
                                                   std::uint64_t batch, std::uint32_t attempt);

}  // namespace bsync
