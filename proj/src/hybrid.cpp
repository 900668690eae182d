#include "bsync/hybrid.hpp"

namespace bsync {

HybridSynchronizer::HybridSynchronizer(ValidatorId self, const ProtocolConfig& cfg,
                                       const ValidatorOptions& opts,
                                       std::vector<std::int64_t> initial_reputation)
    : ValidatorBase(self, cfg, AcceptRule::ImplicitPoa, opts),
      rep_(initial_reputation.empty() ? ReputationTable(cfg.n)
                                      : ReputationTable(std::move(initial_reputation))) {
  if (rep_.size() != cfg.n) throw ConfigError("initial reputation must have n entries");
}

void HybridSynchronizer::record_rep(Context& ctx, ValidatorId subject, std::int64_t delta,
                                    std::int64_t score, std::string cause) {
  TraceRecord r;
  r.kind = TraceKind::Reputation;
  r.peer = subject.value;
  r.delta = delta;
  r.value = score;
  r.cause = std::move(cause);
  ctx.record(std::move(r));
}

void HybridSynchronizer::record_blame(Context& ctx, const std::optional<BlameEvent>& e) {
  if (!e) return;
  TraceRecord r;
  r.kind = TraceKind::Reputation;
  r.peer = e->author.value;
  r.delta = -cfg_.reputation_penalty;
  r.value = e->score;
  r.round = e->slot.round;
  r.cause = e->cause == BlameCause::OwnPull ? "blame_pull" : "blame_reports";
  ctx.record(std::move(r));
}

void HybridSynchronizer::after_ingest(
    Context& ctx, std::vector<AcceptEvent> events,
    const std::vector<std::pair<BlockDigest, Classification>>& classified) {
  for (const auto& [d, c] : classified) {
    if (c != Classification::Live || !dag_.live_set().count(d)) continue;
    const Block* b = dag_.find(d);
    record_block(ctx, TraceKind::Live, *b);
  }
  promote(dag_, LiveSetGrew{}, events);
  record_accepts(ctx, events);
  request_tick(ctx);
}

void HybridSynchronizer::on_block_delivered(Context& ctx, ValidatorId, const BlockMessage& msg) {
  if (halted_) return;
  const auto& b = msg.block;
  if (auto v = validate_block(*b, cfg_); v != Validation::Ok) {
    TraceRecord r;
    r.kind = TraceKind::Drop;
    r.cause = std::string(to_string(v));
    ctx.record(std::move(r));
    return;
  }
  if (dag_.insert_received(b) == InsertResult::DuplicateIgnored) return;
  std::vector<AcceptEvent> events;
  auto c = classify_incoming(dag_, b->digest, round_, events);
  after_ingest(ctx, std::move(events), {{b->digest, c}});
}

void HybridSynchronizer::on_pull_request(Context& ctx, ValidatorId from, const PullRequest& req) {
  if (halted_) return;
  auto served = handle_pull_request(dag_, self_, req);
  for (const auto& s : served.reports)
    record_blame(ctx, record_pull_report(blame_, s, from, self_, rep_, cfg_));
  if (!served.response.blocks.empty()) ctx.send(from, std::move(served.response));
}

void HybridSynchronizer::on_pull_response(Context& ctx, ValidatorId, const PullResponse& resp) {
  if (halted_) return;
  auto outcome = handle_pull_response(dag_, pulls_, resp, round_, cfg_);
  for (std::size_t i = 0; i < outcome.dropped_invalid; ++i) {
    TraceRecord r;
    r.kind = TraceKind::Drop;
    r.cause = "invalid_pulled_block";
    ctx.record(std::move(r));
  }
  after_ingest(ctx, std::move(outcome.events), outcome.classified);
}

void HybridSynchronizer::on_round_advance(Context&, Round r) { promote(dag_, RoundAdvanced{r}); }

std::optional<Block> HybridSynchronizer::make_block(Context& ctx, Round r) {
  std::vector<const Block*> quorum;
  for (const auto& b : dag_.accepted_at(r - 1)) quorum.push_back(b.get());
  for (const auto& ch : update_score_with_watermarks(r - 1, quorum, rep_, scored_through_, cfg_))
    record_rep(ctx, ch.subject, ch.delta, ch.score, "watermark");
  return create_block(dag_, self_, r, rep_, cfg_, next_payload());
}

void HybridSynchronizer::pull_step(Context& ctx) {
  const Micros now = ctx.now();
  auto live = schedule_live_pulls(dag_, pulls_, self_, now, cfg_.live_retry_timeout);
  for (const auto& s : live.first_pulls)
    record_blame(ctx, record_pull_report(blame_, s, self_, self_, rep_, cfg_));
  for (auto& out : live.requests) ctx.send(out.to, std::move(out.request));
  if (!live.requests.empty()) ctx.set_timer(cfg_.live_retry_timeout, {TimerKind::PullRetry, 0});

  dag_.prune_bulk();
  auto bulk = schedule_bulk_pulls(dag_, pulls_, rng_, self_, now, cfg_);
  for (const auto& s : bulk.first_pulls)
    record_blame(ctx, record_pull_report(blame_, s, self_, self_, rep_, cfg_));
  for (auto& out : bulk.requests) ctx.send(out.to, std::move(out.request));
  if (!bulk.requests.empty()) ctx.set_timer(cfg_.bulk_retry_timeout, {TimerKind::PullRetry, 0});
}

}  // namespace bsync
