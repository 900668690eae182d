#include "bsync/adversary.hpp"

#include <algorithm>

namespace bsync {

bool is_honest(const AdversaryPolicy& p) { return std::holds_alternative<Honest>(p); }

std::set<ValidatorId> pull_induction_targets(const PullInduction& policy, Round r, ValidatorId self,
                                             std::uint32_t n) {
  std::vector<ValidatorId> rotation = policy.rotation;
  if (rotation.empty())
    for (std::uint32_t k = 0; k < n; ++k)
      if (k != self.value) rotation.push_back(ValidatorId(k));
  std::set<ValidatorId> out;
  if (rotation.empty() || r < 1) return out;
  const auto size = static_cast<Round>(rotation.size());
  const auto fanout = std::min<Round>(policy.fanout, size);
  for (Round k = 0; k < fanout; ++k) out.insert(rotation[static_cast<std::size_t>((r - 1 + k) % size)]);
  return out;
}

std::vector<BlockPtr> HoardBuffer::hoard_and_dump(BlockPtr b) {
  if (policy_.hoard_rounds <= 0) return {std::move(b)};
  if (b->round < policy_.hoard_rounds) {
    held_.push_back(std::move(b));
    return {};
  }
  std::vector<BlockPtr> out = std::move(held_);
  held_.clear();
  out.push_back(std::move(b));
  std::stable_sort(out.begin(), out.end(),
                   [](const BlockPtr& x, const BlockPtr& y) { return x->round < y->round; });
  return out;
}

}  // namespace bsync
