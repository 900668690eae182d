#include "bsync/synchronizer.hpp"

namespace bsync {

void Synchronizer::deliver(Context& ctx, const Message& msg) {
  std::visit(
      [&](const auto& p) {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, BlockMessage>)
          on_block_delivered(ctx, msg.sender, p);
        else if constexpr (std::is_same_v<T, PullRequest>)
          on_pull_request(ctx, msg.sender, p);
        else if constexpr (std::is_same_v<T, PullResponse>)
          on_pull_response(ctx, msg.sender, p);
        else if constexpr (std::is_same_v<T, SignatureMsg>)
          on_signature(ctx, msg.sender, p);
        else
          on_certificate(ctx, msg.sender, p);
      },
      msg.payload);
}

ValidatorBase::ValidatorBase(ValidatorId self, const ProtocolConfig& cfg, AcceptRule rule,
                             const ValidatorOptions& opts)
    : self_(self),
      cfg_(cfg),
      opts_(opts),
      dag_(cfg, rule),
      commits_(cfg),
      rng_(opts.seed ^ (0x9e3779b97f4a7c15ULL * (self.value + 1))) {}

void ValidatorBase::on_start(Context& ctx) {
  for (std::uint32_t k = 0; k < cfg_.n; ++k)
    dag_.insert_received(std::make_shared<const Block>(make_genesis(ValidatorId(k), cfg_)));
  for (std::uint32_t k = 0; k < cfg_.n; ++k) {
    const Block* g = dag_.find_slot({ValidatorId(k), 0});
    if (!dag_.accepted(g->digest)) record_accepts(ctx, dag_.accept(g->digest));
  }
  request_tick(ctx);
}

void ValidatorBase::on_timer(Context& ctx, TimerTag tag) {
  if (halted_) return;
  switch (tag.kind) {
    case TimerKind::Tick:
      tick_pending_ = false;
      progress(ctx);
      break;
    case TimerKind::PullRetry:
      request_tick(ctx);
      break;
    case TimerKind::LeaderTimeout:
      for (const auto& rec : commits_.skip(tag.round, ctx.now())) record_commit(ctx, rec);
      request_tick(ctx);
      break;
  }
}

bool ValidatorBase::quorum_ready(Round r) const {
  return dag_.accepted_author_count(r) >= cfg_.quorum();
}

void ValidatorBase::adopt_own(Context& ctx, const BlockPtr& b) {
  dag_.insert_received(b);
  record_accepts(ctx, dag_.accept(b->digest));
}

void ValidatorBase::request_tick(Context& ctx) {
  if (tick_pending_ || halted_) return;
  tick_pending_ = true;
  ctx.set_timer(Micros::zero(), {TimerKind::Tick, 0});
}

void ValidatorBase::record_accepts(Context& ctx, const std::vector<AcceptEvent>& events) {
  for (const auto& e : events) {
    TraceRecord r;
    r.kind = e.kind == AcceptKind::Accept ? TraceKind::Accept : TraceKind::Store;
    r.round = e.slot.round;
    r.author = e.slot.author.value;
    r.digest = e.digest;
    ctx.record(r);
  }
}

void ValidatorBase::record_block(Context& ctx, TraceKind kind, const Block& b) {
  TraceRecord r;
  r.kind = kind;
  r.round = b.round;
  r.author = b.author.value;
  r.digest = b.digest;
  if (kind == TraceKind::Create) {
    r.parents = b.parents;
    r.weaklinks = b.weaklinks;
  }
  ctx.record(r);
}

std::vector<std::uint8_t> ValidatorBase::next_payload() {
  std::vector<std::uint8_t> p(8);
  const std::uint64_t c = payload_counter_++;
  for (int i = 0; i < 8; ++i) p[i] = static_cast<std::uint8_t>(c >> (8 * i));
  return p;
}

void ValidatorBase::progress(Context& ctx) {
  if (halted_) return;
  for (;;) {
    while (quorum_ready(quorum_recorded_ + 1)) {
      ++quorum_recorded_;
      TraceRecord r;
      r.kind = TraceKind::Quorum;
      r.round = quorum_recorded_;
      ctx.record(r);
    }
    if (!quorum_ready(round_)) break;
    const Round next = round_ + 1;
    if (next > opts_.max_round) {
      if (opts_.halt_at_max) {
        halted_ = true;
        TraceRecord r;
        r.kind = TraceKind::Halt;
        r.round = round_;
        ctx.record(r);
        ctx.halt();
        return;
      }
      break;
    }
    auto block = make_block(ctx, next);
    if (!block) break;
    auto ptr = std::make_shared<const Block>(std::move(*block));
    record_block(ctx, TraceKind::Create, *ptr);
    adopt_own(ctx, ptr);
    ctx.broadcast(BlockMessage{ptr});
    round_ = next;
    TraceRecord r;
    r.kind = TraceKind::EnterRound;
    r.round = round_;
    ctx.record(r);
    ctx.set_timer(cfg_.leader_timeout, {TimerKind::LeaderTimeout, round_});
    on_round_advance(ctx, round_);
  }

  pull_step(ctx);

  for (const auto& rec : commits_.evaluate(dag_, ctx.now())) record_commit(ctx, rec);
}

void ValidatorBase::record_commit(Context& ctx, const CommitRecord& rec) {
  TraceRecord r;
  r.kind = TraceKind::Commit;
  r.round = rec.slot.round;
  r.value = static_cast<std::int64_t>(rec.position);
  r.at = rec.decided_at.count();
  if (rec.status == SlotStatus::Committed) {
    r.cause = "committed";
    r.digest = rec.digest;
    r.author = rec.slot.leader.value;
  } else {
    r.cause = "skipped";
  }
  ctx.record(r);
}

}  // namespace bsync
