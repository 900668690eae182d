#pragma once

#include <optional>
#include <set>
#include <variant>
#include <vector>

#include "bsync/core.hpp"

namespace bsync {

struct Honest {};

/// Sends each own block to a rotating subset of honest validators.
struct PullInduction {
  /// Target order; empty means every other validator in index order.
  std::vector<ValidatorId> rotation;
  std::uint32_t fanout = 1;
  /// When set, non-targets get the block this much later instead of never.
  std::optional<Micros> lag;
  /// Hold the round-r block from its target until some validator's block
  /// that strong-links the round r-1 block reaches the adversary. Keeps the
  /// next target from learning about the withheld block ahead of the others.
  bool paced = true;
};

/// Creates blocks but keeps them until round `hoard_rounds`, then releases
/// the whole backlog at once.
struct HoardAndDump {
  Round hoard_rounds = 0;
};

/// Last block is `at_round`; the validator halts afterwards.
struct Crash {
  Round at_round = 0;
};

using AdversaryPolicy = std::variant<Honest, PullInduction, HoardAndDump, Crash>;

bool is_honest(const AdversaryPolicy& p);

/// Receivers of the adversary's round-r block; round 1 goes to rotation[0].
std::set<ValidatorId> pull_induction_targets(const PullInduction& policy, Round r, ValidatorId self,
                                             std::uint32_t n);

/// Own-block broadcasts under HoardAndDump: held while the round is below
/// hoard_rounds, then the backlog and the current block go out together.
class HoardBuffer {
 public:
  explicit HoardBuffer(HoardAndDump policy) : policy_(policy) {}
  /// Blocks to broadcast now, ascending by round.
  std::vector<BlockPtr> hoard_and_dump(BlockPtr b);
  std::size_t held() const { return held_.size(); }

 private:
  HoardAndDump policy_;
  std::vector<BlockPtr> held_;
};

}  // namespace bsync
