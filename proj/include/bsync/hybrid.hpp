#pragma once

#include "bsync/pull.hpp"
#include "bsync/push.hpp"
#include "bsync/synchronizer.hpp"

namespace bsync {

/// Admission-controlled optimistic push with reputation, plus the
/// live/bulk pull driven by implicit proofs of availability.
class HybridSynchronizer : public ValidatorBase {
 public:
  HybridSynchronizer(ValidatorId self, const ProtocolConfig& cfg, const ValidatorOptions& opts,
                     std::vector<std::int64_t> initial_reputation = {});

  void on_block_delivered(Context& ctx, ValidatorId from, const BlockMessage& msg) override;
  void on_pull_request(Context& ctx, ValidatorId from, const PullRequest& req) override;
  void on_pull_response(Context& ctx, ValidatorId from, const PullResponse& resp) override;
  void on_round_advance(Context& ctx, Round r) override;

  const ReputationTable& reputation() const { return rep_; }
  const BlameLedger& blame_ledger() const { return blame_; }

 protected:
  std::optional<Block> make_block(Context& ctx, Round r) override;
  void pull_step(Context& ctx) override;

 private:
  void record_rep(Context& ctx, ValidatorId subject, std::int64_t delta, std::int64_t score,
                  std::string cause);
  void record_blame(Context& ctx, const std::optional<BlameEvent>& e);
  void after_ingest(Context& ctx, std::vector<AcceptEvent> events,
                    const std::vector<std::pair<BlockDigest, Classification>>& classified);

  ReputationTable rep_;
  BlameLedger blame_;
  PullState pulls_;
  Round scored_through_ = 0;
};

}  // namespace bsync
